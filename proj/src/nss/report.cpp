#include "nsslab/nss/report.hpp"

#include <cmath>
#include <sstream>

#include "nsslab/io/csv.hpp"

namespace nsslab::nss {

namespace {

// JSON has no inf/nan; they are written as strings.
nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return io::format_double(v);
}

}  // namespace

nlohmann::json report_json(const NSSReport& r) {
  nlohmann::json j;
  j["clean_mse"] = number(r.clean_mse);
  j["perturbed_mse"] = number(r.perturbed_mse);
  j["mse_ratio"] = number(r.mse_ratio());
  j["peak_state_clean"] = number(r.peak_clean);
  j["peak_state_perturbed"] = number(r.peak_perturbed);
  j["peak_state"] = number(r.peak_state);
  j["divergence_flag"] = r.divergence;
  j["sequence_length"] = r.states_clean.size();
  return j;
}

void write_state_series(const std::filesystem::path& path, const Eigen::VectorXd& series) {
  io::write_series_csv(path, {"step", "abs_sum"}, series.transpose());
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& loss) {
  std::ostringstream os;
  io::CsvWriter w(os, {"epoch", "loss"});
  for (std::size_t i = 0; i < loss.size(); ++i) w.row({static_cast<double>(i), loss[i]});
  io::write_text_file(path, os.str());
}

}  // namespace nsslab::nss
