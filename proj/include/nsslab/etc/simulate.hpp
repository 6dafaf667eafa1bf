#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "nsslab/etc/plant.hpp"

namespace nsslab::etc {

enum class Integrator { kEuler, kRk4 };

/// Fixed time grid t_start, t_start + dt, ..., t_end.
struct SimGrid {
  double t_start = 0.0;
  double t_end = 10.0;
  double dt = 0.01;
  Integrator integrator = Integrator::kEuler;

  /// Number of steps; throws unless (t_end - t_start)/dt is an integer within 1e-9.
  Eigen::Index steps() const;
  double time(Eigen::Index k) const { return t_start + static_cast<double>(k) * dt; }
};

/// First grid index whose post-step state is non-finite.
struct SimDivergence {
  Eigen::Index step = 0;
  double time = 0.0;
};

/// Closed-loop run. Per-grid-point quantities are stored one column (or
/// entry) per grid point, N+1 in total.
struct ETCTrajectory {
  Eigen::VectorXd times;
  Eigen::MatrixXd states;          // n x (N+1)
  Eigen::MatrixXd controls;        // m x (N+1), control held over [t_k, t_k+1)
  Eigen::VectorXd lyapunov;        // x^T P x
  Eigen::MatrixXd sampling_error;  // x(t_i) - x(t), after any refresh at t
  Eigen::VectorXd trigger_lhs;     // trigger LHS with the pre-refresh error
  std::vector<bool> triggered;
  std::vector<Eigen::Index> trigger_indices;
  std::vector<double> trigger_times;
  std::optional<SimDivergence> divergence;
};

struct ETCOptions {
  /// Simulate even when the Lyapunov residual exceeds 1e-9.
  bool allow_uncertified = false;
};

/// Event-triggered closed loop. The trigger is evaluated at every grid
/// point on the pre-step state with the held sample from before the
/// refresh (the left limit e(t^-)); the first sample is taken at t_start.
ETCTrajectory simulate_etc(const ETCPlant& plant, const SimGrid& grid, const Eigen::VectorXd& x0,
                           const ETCOptions& options = {});

/// Piecewise-constant control: `values.col(i)` is held from grid index
/// `starts[i]` up to the next start.
struct HeldSchedule {
  std::vector<Eigen::Index> starts;
  Eigen::MatrixXd values;

  /// Control applied over [t_k, t_k+1).
  Eigen::VectorXd at(Eigen::Index k) const;
  Eigen::MatrixXd per_grid_point(Eigen::Index points) const;
};

HeldSchedule nominal_schedule(const ETCTrajectory& traj, const ETCPlant& plant);

/// Re-samples the nominal control at jittered times t_i + delta_i,
/// delta_i ~ U(-delta_max/2, delta_max/2), linearly interpolating the
/// nominal states. Hold intervals are unchanged. Requires delta_max <= dt.
HeldSchedule perturb_samples(const ETCTrajectory& traj, const ETCPlant& plant, const SimGrid& grid,
                             double delta_max, std::uint64_t seed);

struct OpenLoopTrajectory {
  Eigen::VectorXd times;
  Eigen::MatrixXd states;
  Eigen::MatrixXd controls;
  Eigen::VectorXd lyapunov;
  double max_state_norm = 0.0;
  double max_lyapunov = 0.0;
  std::optional<SimDivergence> divergence;
};

/// x' = A x + B u_held(t) with the schedule replayed open loop.
OpenLoopTrajectory simulate_open_loop(const ETCPlant& plant, const HeldSchedule& schedule,
                                      const SimGrid& grid, const Eigen::VectorXd& x0);

/// Least-squares fit of log(L_V(t_i)/L_V(0)) = (kappa-1) iota t_i over the
/// trigger times (t_i > 0), through the origin.
struct DecayFit {
  double iota = 0.0;
  double rms_residual = 0.0;
  int points = 0;
};

DecayFit fit_decay_rate(const ETCTrajectory& traj, double kappa);

}  // namespace nsslab::etc
