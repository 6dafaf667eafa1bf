#pragma once

#include <Eigen/Core>

namespace nsslab::pendulum {

struct Dynamics {
  double g_over_l = 1.0;
  double damping = 0.1;
  double max_substep = 0.01;
};

/// theta'' = -(g/l) sin(theta) - damping theta', RK4 from t = 0 with
/// substeps of at most `max_substep`, sampled at the sorted `timestamps`.
Eigen::VectorXd simulate_angles(double theta0, double omega0, const Dynamics& dyn,
                                const Eigen::VectorXd& timestamps);

/// Angles and angular velocities at the timestamps.
Eigen::MatrixXd simulate_phase(double theta0, double omega0, const Dynamics& dyn,
                               const Eigen::VectorXd& timestamps);

/// 0.5 omega^2 + (g/l)(1 - cos theta).
double energy(double theta, double omega, double g_over_l);

}  // namespace nsslab::pendulum
