#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Core>

#include "nsslab/etc/simulate.hpp"

namespace nsslab::etc {

/// CSV with header t,x1..xn,u1..um,LV,e_norm,triggered.
std::string trajectory_csv(const ETCTrajectory& traj);

/// Open-loop replay in the same column layout (e_norm = 0, triggered = 0
/// except at schedule starts).
std::string open_loop_csv(const OpenLoopTrajectory& traj, const HeldSchedule& schedule);

/// JSON array of trigger times.
std::string triggers_json(const ETCTrajectory& traj);

void write_trajectory(const std::filesystem::path& path, const ETCTrajectory& traj);

}  // namespace nsslab::etc
