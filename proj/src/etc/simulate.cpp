#include "nsslab/etc/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nsslab/errors.hpp"
#include "nsslab/random.hpp"

namespace nsslab::etc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index SimGrid::steps() const {
  if (!(dt > 0.0)) throw ContractError("grid: dt must be positive");
  const double ratio = (t_end - t_start) / dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9)
    throw ContractError("grid: (t_end - t_start)/dt must be a positive integer");
  return static_cast<Index>(rounded);
}

namespace {

// One step of x' = A x + B u with u held constant.
VectorXd step(const MatrixXd& A, const MatrixXd& B, const VectorXd& x, const VectorXd& u, double dt,
              Integrator integrator) {
  const VectorXd bu = B * u;
  if (integrator == Integrator::kEuler) return x + dt * (A * x + bu);
  const VectorXd k1 = A * x + bu;
  const VectorXd k2 = A * (x + 0.5 * dt * k1) + bu;
  const VectorXd k3 = A * (x + 0.5 * dt * k2) + bu;
  const VectorXd k4 = A * (x + dt * k3) + bu;
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

ETCTrajectory simulate_etc(const ETCPlant& plant, const SimGrid& grid, const VectorXd& x0,
                           const ETCOptions& options) {
  plant.validate();
  const Index n = plant.state_size();
  const Index m = plant.input_size();
  if (x0.size() != n) throw ShapeError("simulate_etc: x0 has wrong size");
  const auto check = verify_lyapunov_equation(plant);
  if (check.max_abs_residual >= 1e-9 && !options.allow_uncertified)
    throw ContractError("simulate_etc: Lyapunov residual " + std::to_string(check.max_abs_residual) +
                        " exceeds 1e-9; refusing to simulate an uncertified plant");

  const Index steps = grid.steps();
  const Index points = steps + 1;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  ETCTrajectory traj;
  traj.times.resize(points);
  traj.states = MatrixXd::Constant(n, points, nan);
  traj.controls = MatrixXd::Constant(m, points, nan);
  traj.lyapunov = VectorXd::Constant(points, nan);
  traj.sampling_error = MatrixXd::Constant(n, points, nan);
  traj.trigger_lhs = VectorXd::Constant(points, nan);
  traj.triggered.assign(static_cast<std::size_t>(points), false);

  VectorXd x = x0;
  VectorXd held = x0;
  for (Index k = 0; k < points; ++k) {
    traj.times[k] = grid.time(k);
    bool fire = k == 0;
    const TriggerDecision d = trigger_check(x, held - x, plant);
    traj.trigger_lhs[k] = d.lhs;
    fire = fire || d.fire;
    if (fire) {
      held = x;
      traj.triggered[static_cast<std::size_t>(k)] = true;
      traj.trigger_indices.push_back(k);
      traj.trigger_times.push_back(traj.times[k]);
    }
    const VectorXd u = plant.T * held;
    traj.states.col(k) = x;
    traj.controls.col(k) = u;
    traj.sampling_error.col(k) = held - x;
    traj.lyapunov[k] = lyapunov_value(plant.P, x);
    if (k == steps) break;
    x = step(plant.A, plant.B, x, u, grid.dt, grid.integrator);
    if (!x.allFinite()) {
      traj.divergence = SimDivergence{k + 1, grid.time(k + 1)};
      for (Index j = k + 1; j < points; ++j) traj.times[j] = grid.time(j);
      break;
    }
  }
  return traj;
}

VectorXd HeldSchedule::at(Index k) const {
  if (starts.empty() || k < starts.front()) throw ContractError("schedule: no control before first start");
  Index i = 0;
  while (i + 1 < static_cast<Index>(starts.size()) && starts[i + 1] <= k) ++i;
  return values.col(i);
}

MatrixXd HeldSchedule::per_grid_point(Index points) const {
  if (starts.empty() || starts.front() != 0) throw ContractError("schedule: must start at grid index 0");
  MatrixXd out(values.rows(), points);
  Index i = 0;
  for (Index k = 0; k < points; ++k) {
    while (i + 1 < static_cast<Index>(starts.size()) && starts[i + 1] <= k) ++i;
    out.col(k) = values.col(i);
  }
  return out;
}

HeldSchedule nominal_schedule(const ETCTrajectory& traj, const ETCPlant& plant) {
  HeldSchedule s;
  s.starts = traj.trigger_indices;
  s.values.resize(plant.input_size(), static_cast<Index>(s.starts.size()));
  for (std::size_t i = 0; i < s.starts.size(); ++i)
    s.values.col(static_cast<Index>(i)) = plant.T * traj.states.col(s.starts[i]);
  return s;
}

HeldSchedule perturb_samples(const ETCTrajectory& traj, const ETCPlant& plant, const SimGrid& grid,
                             double delta_max, std::uint64_t seed) {
  if (!(delta_max >= 0.0) || delta_max > grid.dt)
    throw ContractError("perturb_samples: delta_max must lie in [0, dt]");
  HeldSchedule s = nominal_schedule(traj, plant);
  if (delta_max == 0.0) return s;
  Rng rng(seed);
  const Index last = traj.states.cols() - 1;
  for (std::size_t i = 0; i < s.starts.size(); ++i) {
    const double delta = rng.uniform_open(-0.5 * delta_max, 0.5 * delta_max);
    const double t = std::clamp(traj.trigger_times[i] + delta, grid.t_start, grid.time(last));
    const double pos = (t - grid.t_start) / grid.dt;
    const Index j = std::clamp<Index>(static_cast<Index>(std::floor(pos)), 0, last - 1);
    const double w = pos - static_cast<double>(j);
    const VectorXd x = (1.0 - w) * traj.states.col(j) + w * traj.states.col(j + 1);
    s.values.col(static_cast<Index>(i)) = plant.T * x;
  }
  return s;
}

OpenLoopTrajectory simulate_open_loop(const ETCPlant& plant, const HeldSchedule& schedule,
                                      const SimGrid& grid, const VectorXd& x0) {
  const Index n = plant.state_size();
  if (x0.size() != n) throw ShapeError("simulate_open_loop: x0 has wrong size");
  const Index steps = grid.steps();
  const Index points = steps + 1;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  OpenLoopTrajectory out;
  out.times.resize(points);
  out.states = MatrixXd::Constant(n, points, nan);
  out.controls = schedule.per_grid_point(points);
  out.lyapunov = VectorXd::Constant(points, nan);
  VectorXd x = x0;
  for (Index k = 0; k < points; ++k) {
    out.times[k] = grid.time(k);
    if (out.divergence) continue;
    out.states.col(k) = x;
    out.lyapunov[k] = lyapunov_value(plant.P, x);
    out.max_state_norm = std::max(out.max_state_norm, x.norm());
    out.max_lyapunov = std::max(out.max_lyapunov, out.lyapunov[k]);
    if (k == steps) break;
    x = step(plant.A, plant.B, x, out.controls.col(k), grid.dt, grid.integrator);
    if (!x.allFinite()) {
      out.divergence = SimDivergence{k + 1, grid.time(k + 1)};
      out.max_state_norm = std::numeric_limits<double>::infinity();
      out.max_lyapunov = std::numeric_limits<double>::infinity();
    }
  }
  return out;
}

DecayFit fit_decay_rate(const ETCTrajectory& traj, double kappa) {
  DecayFit fit;
  const double lv0 = traj.lyapunov[0];
  double stt = 0.0, sty = 0.0;
  std::vector<std::pair<double, double>> pts;
  for (Index k : traj.trigger_indices) {
    const double t = traj.times[k];
    const double lv = traj.lyapunov[k];
    if (t <= traj.times[0] || !(lv > 0.0) || !(lv0 > 0.0)) continue;
    const double y = std::log(lv / lv0);
    pts.emplace_back(t, y);
    stt += t * t;
    sty += t * y;
  }
  fit.points = static_cast<int>(pts.size());
  if (pts.empty()) return fit;
  const double slope = sty / stt;
  fit.iota = slope / (kappa - 1.0);
  double ss = 0.0;
  for (const auto& [t, y] : pts) ss += (y - slope * t) * (y - slope * t);
  fit.rms_residual = std::sqrt(ss / static_cast<double>(pts.size()));
  return fit;
}

}  // namespace nsslab::etc
