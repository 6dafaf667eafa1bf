#include "nsslab/etc/export.hpp"

#include <sstream>
#include <vector>

#include <json.hpp>

#include "nsslab/io/csv.hpp"

namespace nsslab::etc {

using Eigen::Index;

namespace {

std::vector<std::string> header(Index n, Index m) {
  std::vector<std::string> h{"t"};
  for (Index i = 1; i <= n; ++i) h.push_back("x" + std::to_string(i));
  for (Index i = 1; i <= m; ++i) h.push_back("u" + std::to_string(i));
  h.insert(h.end(), {"LV", "e_norm", "triggered"});
  return h;
}

}  // namespace

std::string trajectory_csv(const ETCTrajectory& traj) {
  const Index n = traj.states.rows();
  const Index m = traj.controls.rows();
  std::ostringstream os;
  io::CsvWriter w(os, header(n, m));
  for (Index k = 0; k < traj.times.size(); ++k) {
    std::vector<double> r{traj.times[k]};
    for (Index i = 0; i < n; ++i) r.push_back(traj.states(i, k));
    for (Index i = 0; i < m; ++i) r.push_back(traj.controls(i, k));
    r.push_back(traj.lyapunov[k]);
    r.push_back(traj.sampling_error.col(k).norm());
    r.push_back(traj.triggered[static_cast<std::size_t>(k)] ? 1.0 : 0.0);
    w.row(r);
  }
  return os.str();
}

std::string open_loop_csv(const OpenLoopTrajectory& traj, const HeldSchedule& schedule) {
  const Index n = traj.states.rows();
  const Index m = traj.controls.rows();
  std::vector<bool> starts(static_cast<std::size_t>(traj.times.size()), false);
  for (Index s : schedule.starts)
    if (s < traj.times.size()) starts[static_cast<std::size_t>(s)] = true;
  std::ostringstream os;
  io::CsvWriter w(os, header(n, m));
  for (Index k = 0; k < traj.times.size(); ++k) {
    std::vector<double> r{traj.times[k]};
    for (Index i = 0; i < n; ++i) r.push_back(traj.states(i, k));
    for (Index i = 0; i < m; ++i) r.push_back(traj.controls(i, k));
    r.push_back(traj.lyapunov[k]);
    r.push_back(0.0);
    r.push_back(starts[static_cast<std::size_t>(k)] ? 1.0 : 0.0);
    w.row(r);
  }
  return os.str();
}

std::string triggers_json(const ETCTrajectory& traj) {
  return nlohmann::json(traj.trigger_times).dump() + "\n";
}

void write_trajectory(const std::filesystem::path& path, const ETCTrajectory& traj) {
  io::write_text_file(path, trajectory_csv(traj));
}

}  // namespace nsslab::etc
