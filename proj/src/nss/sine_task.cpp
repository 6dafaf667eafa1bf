#include "nsslab/nss/sine_task.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nsslab/errors.hpp"
#include "nsslab/random.hpp"

namespace nsslab::nss {

using Eigen::Index;

SineTask make_sine_task(Index count, double frequency) {
  if (count < 2) throw ContractError("make_sine_task: count must be >= 2");
  SineTask task;
  task.frequency = frequency;
  task.width = 1.0 / static_cast<double>(count);
  task.times.resize(count);
  task.values.resize(count);
  for (Index i = 0; i < count; ++i) {
    task.times[i] = static_cast<double>(i) / static_cast<double>(count);
    task.values[i] = std::sin(frequency * task.times[i]);
  }
  return task;
}

PerturbedGrid perturb_grid(const Eigen::VectorXd& times, const std::function<double(double)>& values_fn,
                           double delta_max, std::uint64_t seed, double lo, double hi) {
  const Index n = times.size();
  double spacing = std::numeric_limits<double>::infinity();
  for (Index i = 1; i < n; ++i) spacing = std::min(spacing, times[i] - times[i - 1]);
  if (!(delta_max >= 0.0) || delta_max > spacing * (1.0 + 1e-9))
    throw ContractError("perturb_grid: delta_max must lie in [0, min grid spacing]");
  PerturbedGrid out;
  out.times.resize(n);
  out.values.resize(n);
  out.offsets = Eigen::VectorXd::Zero(n);
  Rng rng(seed);
  for (Index i = 0; i < n; ++i) {
    const double delta = delta_max > 0.0 ? rng.uniform_open(-0.5 * delta_max, 0.5 * delta_max) : 0.0;
    out.offsets[i] = delta;
    out.times[i] = std::clamp(times[i] + delta, lo, hi);
    out.values[i] = values_fn(out.times[i]);
  }
  return out;
}

PerturbedGrid perturb_sine(const SineTask& task, double delta_max, std::uint64_t seed) {
  const double f = task.frequency;
  const double hi = std::nextafter(1.0, 0.0);
  return perturb_grid(task.times, [f](double t) { return std::sin(f * t); }, delta_max, seed, 0.0, hi);
}

}  // namespace nsslab::nss
