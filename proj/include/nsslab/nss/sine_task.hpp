#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Core>

namespace nsslab::nss {

struct SineTask {
  Eigen::VectorXd times;
  Eigen::VectorXd values;
  double frequency = 0.0;
  double width = 0.0;  // grid spacing
};

/// t_i = i / count on [0, 1), u_i = sin(frequency * t_i).
SineTask make_sine_task(Eigen::Index count = 100, double frequency = 5.0 * 3.141592653589793);

struct PerturbedGrid {
  Eigen::VectorXd times;
  Eigen::VectorXd values;
  Eigen::VectorXd offsets;
};

/// t'_i = clamp(t_i + delta_i, lo, hi), delta_i ~ U(-delta_max/2, delta_max/2);
/// u'_i = values_fn(t'_i). Requires delta_max <= the minimum grid spacing.
PerturbedGrid perturb_grid(const Eigen::VectorXd& times, const std::function<double(double)>& values_fn,
                           double delta_max, std::uint64_t seed, double lo, double hi);

/// Sine-task convenience: domain [0, 1), values_fn = sin(frequency t).
PerturbedGrid perturb_sine(const SineTask& task, double delta_max, std::uint64_t seed);

}  // namespace nsslab::nss
