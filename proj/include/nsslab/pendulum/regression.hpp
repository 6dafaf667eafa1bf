#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nsslab/grad/adam.hpp"
#include "nsslab/nss/model.hpp"
#include "nsslab/pendulum/dataset.hpp"

namespace nsslab::pendulum {

struct RegressionConfig {
  /// Shared by both variants; `smr.enabled` is set per variant.
  nss::ModelConfig model;
  int epochs = 100;
  int batch = 50;
  grad::AdamConfig adam;
  std::uint64_t seed = 0;

  /// 4 blocks, 64 channels, 64 states, AdamW lr 1e-4, wd 0.01, tau 4.
  static RegressionConfig defaults(int side = 24);
};

struct VariantResult {
  std::string name;
  double initial_test_mse = 0.0;
  double best_test_mse = 0.0;
  int best_epoch = -1;
  std::vector<double> train_loss;
  std::vector<double> test_mse;
  std::optional<int> diverged_epoch;
};

struct RegressionResult {
  VariantResult smr_off;
  VariantResult smr_on;
  /// Error of predicting the mean test target everywhere.
  double mean_predictor_mse = 0.0;
  bool smr_improves = false;
  /// 1 - on/off.
  double relative_improvement = 0.0;
};

/// Stacks samples [first, first+count) into time-major columns:
/// inputs [side^2 x L*count], targets [2 x L*count].
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> stack_batch(const std::vector<PendulumSample>& samples,
                                                        const std::vector<std::size_t>& order,
                                                        std::size_t first, std::size_t count);

/// (1/|V|) sum over sequences of the summed squared error.
double sequence_mse(nss::SequenceModel& model, const std::vector<PendulumSample>& samples, int batch);

/// Per-sequence squared error of the constant mean-target predictor.
double mean_predictor_mse(const std::vector<PendulumSample>& samples);

VariantResult train_variant(const PendulumDataset& data, const RegressionConfig& config, bool smr);

RegressionResult run_regression(const PendulumDataset& data, const RegressionConfig& config);

}  // namespace nsslab::pendulum
