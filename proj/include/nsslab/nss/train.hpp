#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "nsslab/grad/adam.hpp"
#include "nsslab/nss/model.hpp"

namespace nsslab::nss {

enum class Objective { kNextStep, kReconstruction };

struct TrainConfig {
  Index epochs = 2000;
  grad::AdamConfig adam;
  std::uint64_t seed = 0;
  Objective objective = Objective::kNextStep;
};

/// Model input and target for one sequence [C x L].
struct SequencePair {
  Eigen::MatrixXd input;
  Eigen::MatrixXd target;
};

/// Next-step: input u_1..u_{L-1}, target u_2..u_L. Reconstruction: both u.
SequencePair make_pair(const Eigen::MatrixXd& values, Objective objective);

struct TrainResult {
  /// Loss before each epoch's update.
  std::vector<double> loss;
  /// First epoch whose loss was non-finite; training stops there.
  std::optional<Index> diverged_epoch;
};

/// Full-batch Adam on MSE(model(input), target).
TrainResult train_model(SequenceModel& model, const SequencePair& data, const TrainConfig& config);

/// Mean over windows of `window` consecutive losses (length size-window+1).
std::vector<double> moving_average(const std::vector<double>& values, std::size_t window);

}  // namespace nsslab::nss
