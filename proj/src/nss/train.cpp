#include "nsslab/nss/train.hpp"

#include <cmath>

#include "nsslab/errors.hpp"

namespace nsslab::nss {

using Eigen::MatrixXd;

SequencePair make_pair(const MatrixXd& values, Objective objective) {
  if (values.cols() < 2) throw ContractError("make_pair: need at least two steps");
  if (objective == Objective::kReconstruction) return {values, values};
  const Index L = values.cols();
  return {values.leftCols(L - 1), values.rightCols(L - 1)};
}

TrainResult train_model(SequenceModel& model, const SequencePair& data, const TrainConfig& config) {
  if (data.input.cols() == 0) throw ContractError("train_model: empty dataset");
  if (config.epochs < 0) throw ConfigError("train_model: epochs must be >= 0");
  const auto params = model.parameters();
  grad::AdamState state(config.adam, params);
  TrainResult result;
  result.loss.reserve(static_cast<std::size_t>(config.epochs));
  const Tensor target = Tensor::from_matrix(data.target);
  for (Index epoch = 0; epoch < config.epochs; ++epoch) {
    grad::Tape tape;
    ForwardOutput fwd = model.forward(tape, data.input);
    Var loss = grad::mse(fwd.y, tape.constant(target));
    const double value = loss.value().item();
    result.loss.push_back(value);
    if (!std::isfinite(value)) {
      result.diverged_epoch = epoch;
      break;
    }
    grad::zero_grads(params);
    try {
      grad::backward(tape, loss);
    } catch (const NumericError&) {
      result.diverged_epoch = epoch;
      break;
    }
    grad::adam_step(state, params);
  }
  return result;
}

std::vector<double> moving_average(const std::vector<double>& values, std::size_t window) {
  std::vector<double> out;
  if (window == 0 || values.size() < window) return out;
  double sum = 0.0;
  for (std::size_t i = 0; i < window; ++i) sum += values[i];
  out.push_back(sum / static_cast<double>(window));
  for (std::size_t i = window; i < values.size(); ++i) {
    sum += values[i] - values[i - window];
    out.push_back(sum / static_cast<double>(window));
  }
  return out;
}

}  // namespace nsslab::nss
