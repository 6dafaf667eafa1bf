#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "nsslab/nss/evaluate.hpp"

namespace nsslab::nss {

/// Metrics only; the series go to CSV.
nlohmann::json report_json(const NSSReport& report);

/// Header step,abs_sum.
void write_state_series(const std::filesystem::path& path, const Eigen::VectorXd& series);
/// Header epoch,loss; an empty body when no epochs ran.
void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& loss);

}  // namespace nsslab::nss
