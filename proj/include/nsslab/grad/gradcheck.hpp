#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nsslab/grad/tape.hpp"

namespace nsslab::grad {

/// Builds a scalar loss on `tape` from the bound parameters.
using LossBuilder = std::function<Var(Tape&)>;

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::vector<Eigen::VectorXd> analytic;
  std::vector<Eigen::VectorXd> numeric;
};

/// Compares reverse-mode gradients of `build` against central differences
/// with step `h`, per parameter. The relative error is
/// ||analytic - numeric||_2 / max(||analytic||_2, ||numeric||_2, 1e-10),
/// maximized over parameters. Marks every parameter as requiring grad.
GradcheckResult check_gradient(const LossBuilder& build, const std::vector<Tensor*>& params,
                               double h = 1e-5);

struct PrimitiveCheck {
  std::string name;
  int instances = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradcheckOptions {
  int instances = 100;
  std::uint64_t seed = 0;
  double h = 1e-5;
  double tolerance = 1e-4;
  /// Test hook: scales the analytic gradient of the named check by 1.5.
  std::string corrupt;
};

/// Finite-difference suite over every primitive plus a 3-layer composite.
std::vector<PrimitiveCheck> run_primitive_suite(const GradcheckOptions& options = {});

}  // namespace nsslab::grad
