#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "nsslab/grad/tensor.hpp"

namespace nsslab::grad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Decoupled (AdamW) decay factor; 0 disables it.
  double weight_decay = 0.0;
};

/// Moment estimates for one parameter set.
struct AdamState {
  AdamConfig config;
  std::vector<Eigen::VectorXd> m;
  std::vector<Eigen::VectorXd> v;
  std::int64_t t = 0;

  AdamState() = default;
  AdamState(AdamConfig cfg, const std::vector<Tensor*>& params);
};

/// One bias-corrected Adam update of `params` using their gradient
/// accumulators. With weight decay, w <- w - lr*wd*w precedes the moment
/// update.
void adam_step(AdamState& state, const std::vector<Tensor*>& params);

}  // namespace nsslab::grad
