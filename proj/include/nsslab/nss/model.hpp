#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "nsslab/grad/ops.hpp"
#include "nsslab/smr/gate.hpp"
#include "nsslab/ssm/checkpoint.hpp"
#include "nsslab/ssm/model.hpp"

namespace nsslab::nss {

using grad::Index;
using grad::Tensor;
using grad::Var;

enum class Nonlinearity { kNone, kGelu };

struct SMRConfig {
  bool enabled = false;
  Index tau = 4;
  smr::PaddingMode padding = smr::PaddingMode::kZero;
  bool use_linear = false;
};

struct ModelConfig {
  Index layers = 1;
  Index state_size = 16;
  Index channels = 1;
  Index in_channels = 1;
  Index out_channels = 1;
  ssm::ParamForm form = ssm::ParamForm::kDense;
  SMRConfig smr;
  bool residual = true;
  /// Applied after every block except the last.
  Nonlinearity nonlinearity = Nonlinearity::kGelu;
  /// log(dt) drawn uniformly in [log dt_min, log dt_max].
  double dt_min = 1e-3;
  double dt_max = 1e-1;

  void validate() const;
};

struct LayerParams {
  Tensor A;       // [n, n] dense or [n] diagonal
  Tensor B;       // [n, m]
  Tensor C;       // [m, n]
  Tensor log_dt;  // scalar
  Tensor smr_kernel;  // [m, m, tau]
  Tensor smr_bias;    // [m]
  Tensor smr_linear_weight;  // [m, m]
  Tensor smr_linear_bias;    // [m]
};

struct ForwardOutput {
  Var y;
  /// Per layer, states [n x L*batch] in time-major column order.
  std::vector<Var> states;
  std::vector<Var> gated_inputs;
};

/// Stack of [SMR gate -> SSM -> residual -> nonlinearity] blocks between an
/// input and an output projection. Sequences are [C x L*batch] with column
/// k*batch + b holding step k of sequence b.
class SequenceModel {
 public:
  static SequenceModel build(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  /// Parameters in a fixed order: W_in, b_in, per layer (A, B, C, log_dt
  /// [, kernel, bias [, W_lin, b_lin]]), W_out, b_out.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  Index parameter_count() const;

  ForwardOutput forward(grad::Tape& tape, const Eigen::MatrixXd& u, Index batch = 1);

  /// Bilinear discretization of layer `l` at its current parameters.
  ssm::DiscreteSSM<double> discrete_layer(Index l) const;
  ssm::ContinuousSSM<double> continuous_layer(Index l) const;
  std::optional<smr::SMRGate<double>> gate_layer(Index l) const;

  ssm::Checkpoint to_checkpoint() const;
  static SequenceModel from_checkpoint(const ModelConfig& config, const ssm::Checkpoint& checkpoint);

  std::vector<LayerParams>& layers() { return layers_; }
  const std::vector<LayerParams>& layers() const { return layers_; }

 private:
  explicit SequenceModel(ModelConfig config) : config_(std::move(config)) {}

  ModelConfig config_;
  Tensor in_weight_;   // [m, in]
  Tensor in_bias_;     // [m]
  std::vector<LayerParams> layers_;
  Tensor out_weight_;  // [out, m]
  Tensor out_bias_;    // [out]
};

/// Closed-form parameter count for a configuration.
Index expected_parameter_count(const ModelConfig& config);

/// SSM recurrence on the tape: x_k = Abar x_{k-1} + Bbar v_k from x_0 = 0,
/// returning the stacked states [n x L*batch].
Var ssm_states(Var Abar, Var Bbar, Var v, Index batch, bool diagonal);

/// Bilinear discretization on the tape. Returns (Abar, Bbar); diagonal
/// Abar is rank 1.
std::pair<Var, Var> discretize_on_tape(grad::Tape& tape, Var A, Var B, Var log_dt, bool diagonal);

}  // namespace nsslab::nss
