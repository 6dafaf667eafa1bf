#include "nsslab/pendulum/simulate.hpp"

#include <cmath>

#include "nsslab/errors.hpp"

namespace nsslab::pendulum {

using Eigen::Index;

namespace {

struct State {
  double theta;
  double omega;
};

State rhs(const State& s, const Dynamics& d) {
  return {s.omega, -d.g_over_l * std::sin(s.theta) - d.damping * s.omega};
}

State rk4(const State& s, double h, const Dynamics& d) {
  const State k1 = rhs(s, d);
  const State k2 = rhs({s.theta + 0.5 * h * k1.theta, s.omega + 0.5 * h * k1.omega}, d);
  const State k3 = rhs({s.theta + 0.5 * h * k2.theta, s.omega + 0.5 * h * k2.omega}, d);
  const State k4 = rhs({s.theta + h * k3.theta, s.omega + h * k3.omega}, d);
  return {s.theta + h / 6.0 * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta),
          s.omega + h / 6.0 * (k1.omega + 2.0 * k2.omega + 2.0 * k3.omega + k4.omega)};
}

}  // namespace

Eigen::MatrixXd simulate_phase(double theta0, double omega0, const Dynamics& dyn,
                               const Eigen::VectorXd& timestamps) {
  if (!(dyn.max_substep > 0.0)) throw ContractError("pendulum: max_substep must be positive");
  Eigen::MatrixXd out(timestamps.size(), 2);
  State s{theta0, omega0};
  double t = 0.0;
  for (Index i = 0; i < timestamps.size(); ++i) {
    const double target = timestamps[i];
    if (target < t) throw ContractError("pendulum: timestamps must be sorted and >= 0");
    const double span = target - t;
    const auto steps = static_cast<long>(std::ceil(span / dyn.max_substep));
    if (steps > 0) {
      const double h = span / static_cast<double>(steps);
      for (long k = 0; k < steps; ++k) s = rk4(s, h, dyn);
    }
    t = target;
    out(i, 0) = s.theta;
    out(i, 1) = s.omega;
  }
  return out;
}

Eigen::VectorXd simulate_angles(double theta0, double omega0, const Dynamics& dyn,
                                const Eigen::VectorXd& timestamps) {
  return simulate_phase(theta0, omega0, dyn, timestamps).col(0);
}

double energy(double theta, double omega, double g_over_l) {
  return 0.5 * omega * omega + g_over_l * (1.0 - std::cos(theta));
}

}  // namespace nsslab::pendulum
