#include "nsslab/pendulum/regression.hpp"

#include <cmath>
#include <numeric>

#include "nsslab/errors.hpp"
#include "nsslab/random.hpp"

namespace nsslab::pendulum {

using Eigen::Index;
using Eigen::MatrixXd;

RegressionConfig RegressionConfig::defaults(int side) {
  RegressionConfig c;
  c.model.layers = 4;
  c.model.state_size = 64;
  c.model.channels = 64;
  c.model.in_channels = static_cast<Index>(side) * side;
  c.model.out_channels = 2;
  c.model.smr.tau = 4;
  c.adam.lr = 1e-4;
  c.adam.weight_decay = 0.01;
  return c;
}

std::pair<MatrixXd, MatrixXd> stack_batch(const std::vector<PendulumSample>& samples,
                                          const std::vector<std::size_t>& order, std::size_t first,
                                          std::size_t count) {
  if (count == 0 || first + count > order.size()) throw ContractError("stack_batch: range out of bounds");
  const auto& s0 = samples[order[first]];
  const Index L = s0.frames.rows();
  const Index pixels = s0.frames.cols();
  const Index b = static_cast<Index>(count);
  MatrixXd u(pixels, L * b);
  MatrixXd y(2, L * b);
  for (Index j = 0; j < b; ++j) {
    const auto& s = samples[order[first + static_cast<std::size_t>(j)]];
    for (Index k = 0; k < L; ++k) {
      u.col(k * b + j) = s.frames.row(k).transpose();
      y.col(k * b + j) = s.targets.row(k).transpose();
    }
  }
  return {u, y};
}

double sequence_mse(nss::SequenceModel& model, const std::vector<PendulumSample>& samples, int batch) {
  if (samples.empty()) throw ContractError("sequence_mse: no samples");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double sse = 0.0;
  for (std::size_t first = 0; first < samples.size(); first += static_cast<std::size_t>(batch)) {
    const std::size_t count = std::min(samples.size() - first, static_cast<std::size_t>(batch));
    auto [u, y] = stack_batch(samples, order, first, count);
    grad::Tape tape;
    const auto fwd = model.forward(tape, u, static_cast<Index>(count));
    sse += (fwd.y.value().to_matrix() - y).squaredNorm();
  }
  return sse / static_cast<double>(samples.size());
}

double mean_predictor_mse(const std::vector<PendulumSample>& samples) {
  if (samples.empty()) throw ContractError("mean_predictor_mse: no samples");
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Index rows = 0;
  for (const auto& s : samples) {
    mean += s.targets.colwise().sum().transpose();
    rows += s.targets.rows();
  }
  mean /= static_cast<double>(rows);
  double sse = 0.0;
  for (const auto& s : samples) sse += (s.targets.rowwise() - mean.transpose()).squaredNorm();
  return sse / static_cast<double>(samples.size());
}

VariantResult train_variant(const PendulumDataset& data, const RegressionConfig& config, bool smr) {
  if (config.batch < 1) throw ConfigError("regression: batch must be >= 1");
  if (config.epochs < 0) throw ConfigError("regression: epochs must be >= 0");
  if (data.train.empty() || data.test.empty()) throw ContractError("regression: empty dataset");
  nss::ModelConfig mc = config.model;
  mc.smr.enabled = smr;
  auto model = nss::SequenceModel::build(mc, config.seed);
  const auto params = model.parameters();
  grad::AdamState adam(config.adam, params);

  VariantResult r;
  r.name = smr ? "smr_on" : "smr_off";
  r.initial_test_mse = sequence_mse(model, data.test, config.batch);
  r.best_test_mse = r.initial_test_mse;

  const std::size_t n = data.train.size();
  const auto batch = static_cast<std::size_t>(config.batch);
  for (int epoch = 0; epoch < config.epochs && !r.diverged_epoch; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::stream(config.seed, (std::uint64_t{1} << 40) + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t first = 0; first < n; first += batch) {
      const std::size_t count = std::min(n - first, batch);
      auto [u, y] = stack_batch(data.train, order, first, count);
      grad::Tape tape;
      const auto fwd = model.forward(tape, u, static_cast<Index>(count));
      grad::Var loss = grad::mse(fwd.y, tape.constant(grad::Tensor::from_matrix(y)));
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        r.diverged_epoch = epoch;
        break;
      }
      grad::zero_grads(params);
      try {
        grad::backward(tape, loss);
      } catch (const NumericError&) {
        r.diverged_epoch = epoch;
        break;
      }
      grad::adam_step(adam, params);
      epoch_loss += value;
      ++batches;
    }
    if (r.diverged_epoch) break;
    r.train_loss.push_back(epoch_loss / static_cast<double>(batches));
    const double test = sequence_mse(model, data.test, config.batch);
    r.test_mse.push_back(test);
    if (std::isfinite(test) && (r.best_epoch < 0 || test < r.best_test_mse)) {
      r.best_test_mse = test;
      r.best_epoch = epoch;
    }
  }
  return r;
}

RegressionResult run_regression(const PendulumDataset& data, const RegressionConfig& config) {
  RegressionResult res;
  res.smr_off = train_variant(data, config, false);
  res.smr_on = train_variant(data, config, true);
  res.mean_predictor_mse = mean_predictor_mse(data.test);
  res.smr_improves = res.smr_on.best_test_mse < res.smr_off.best_test_mse;
  res.relative_improvement = 1.0 - res.smr_on.best_test_mse / res.smr_off.best_test_mse;
  return res;
}

}  // namespace nsslab::pendulum
