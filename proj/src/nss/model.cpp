#include "nsslab/nss/model.hpp"

#include <cmath>

#include "nsslab/errors.hpp"
#include "nsslab/random.hpp"
#include "nsslab/ssm/discretize.hpp"

namespace nsslab::nss {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using namespace nsslab::grad;

void ModelConfig::validate() const {
  if (layers < 1) throw ConfigError("model: layers must be >= 1");
  if (state_size < 1) throw ConfigError("model: state_size must be >= 1");
  if (channels < 1 || in_channels < 1 || out_channels < 1)
    throw ConfigError("model: channel counts must be >= 1");
  if (smr.enabled && smr.tau < 1) throw ConfigError("model: smr tau must be >= 1");
  if (!(dt_min > 0.0) || !(dt_max >= dt_min)) throw ConfigError("model: need 0 < dt_min <= dt_max");
}

namespace {

// RNG slot per parameter so toggling SMR leaves the SSM and projection
// initialization untouched.
enum Slot : std::uint64_t { kInW = 1, kOutW = 2, kA = 0, kB, kC, kLogDt, kKernel, kLinear };

std::uint64_t layer_slot(Index layer, Slot s) { return 1000 + 16 * static_cast<std::uint64_t>(layer) + s; }

Tensor uniform_tensor(std::uint64_t seed, std::uint64_t slot, Index rows, Index cols, double bound) {
  Rng rng = Rng::stream(seed, slot);
  return Tensor::from_matrix(rng.uniform_matrix(rows, cols, -bound, bound));
}

Var affine(Tape& tape, Tensor& w, Tensor& b, Var x) {
  Var y = matmul(tape.leaf(w), x);
  return add(y, broadcast_cols(tape.leaf(b), x.value().cols()));
}

}  // namespace

SequenceModel SequenceModel::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  SequenceModel model(config);
  const Index n = config.state_size;
  const Index m = config.channels;
  const double sm = std::sqrt(static_cast<double>(m));
  model.in_weight_ = uniform_tensor(seed, kInW, m, config.in_channels,
                                    1.0 / std::sqrt(static_cast<double>(config.in_channels)));
  model.in_bias_ = Tensor({m});
  model.out_weight_ = uniform_tensor(seed, kOutW, config.out_channels, m, 1.0 / sm);
  model.out_bias_ = Tensor({config.out_channels});
  for (Index l = 0; l < config.layers; ++l) {
    LayerParams p;
    if (config.form == ssm::ParamForm::kDense) {
      Rng rng = Rng::stream(seed, layer_slot(l, kA));
      MatrixXd a = -MatrixXd::Identity(n, n) + rng.uniform_matrix(n, n, -0.1, 0.1);
      p.A = Tensor::from_matrix(a);
    } else {
      Rng rng = Rng::stream(seed, layer_slot(l, kA));
      VectorXd a(n);
      for (Index i = 0; i < n; ++i) a[i] = rng.uniform(-1.0, -0.1);
      p.A = Tensor::from_vector(a);
    }
    p.B = uniform_tensor(seed, layer_slot(l, kB), n, m, 1.0 / sm);
    p.C = uniform_tensor(seed, layer_slot(l, kC), m, n, 1.0 / std::sqrt(static_cast<double>(n)));
    {
      Rng rng = Rng::stream(seed, layer_slot(l, kLogDt));
      p.log_dt = Tensor::scalar(rng.uniform(std::log(config.dt_min), std::log(config.dt_max)));
    }
    if (config.smr.enabled) {
      const Index tau = config.smr.tau;
      Rng rng = Rng::stream(seed, layer_slot(l, kKernel));
      const double bound = 1.0 / std::sqrt(static_cast<double>(m * tau));
      p.smr_kernel = Tensor({m, m, tau});
      for (Index i = 0; i < p.smr_kernel.size(); ++i) p.smr_kernel.flat()[i] = rng.uniform(-bound, bound);
      p.smr_bias = Tensor({m});
      if (config.smr.use_linear) {
        p.smr_linear_weight = uniform_tensor(seed, layer_slot(l, kLinear), m, m, 1.0 / sm);
        p.smr_linear_bias = Tensor({m});
      }
    }
    model.layers_.push_back(std::move(p));
  }
  for (Tensor* t : model.parameters()) t->set_requires_grad(true);
  return model;
}

std::vector<Tensor*> SequenceModel::parameters() {
  std::vector<Tensor*> out{&in_weight_, &in_bias_};
  for (auto& p : layers_) {
    out.insert(out.end(), {&p.A, &p.B, &p.C, &p.log_dt});
    if (config_.smr.enabled) {
      out.insert(out.end(), {&p.smr_kernel, &p.smr_bias});
      if (config_.smr.use_linear) out.insert(out.end(), {&p.smr_linear_weight, &p.smr_linear_bias});
    }
  }
  out.insert(out.end(), {&out_weight_, &out_bias_});
  return out;
}

std::vector<const Tensor*> SequenceModel::parameters() const {
  auto mut = const_cast<SequenceModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

Index SequenceModel::parameter_count() const {
  Index total = 0;
  for (const Tensor* t : parameters()) total += t->size();
  return total;
}

Index expected_parameter_count(const ModelConfig& c) {
  const Index n = c.state_size, m = c.channels;
  Index per_layer = (c.form == ssm::ParamForm::kDense ? n * n : n) + n * m + m * n + 1;
  if (c.smr.enabled) {
    per_layer += m * m * c.smr.tau + m;
    if (c.smr.use_linear) per_layer += m * m + m;
  }
  return m * c.in_channels + m + c.layers * per_layer + c.out_channels * m + c.out_channels;
}

std::pair<Var, Var> discretize_on_tape(Tape& tape, Var A, Var B, Var log_dt, bool diagonal) {
  const Index n = B.value().rows();
  const Index m = B.value().cols();
  Var dt = grad::exp(log_dt);
  Var half_dt = scale(dt, 0.5);
  Var hA = scale(half_dt, A);
  Var dtB = scale(dt, B);
  if (diagonal) {
    Var ones = tape.constant(Tensor({n}, 1.0));
    Var minus = sub(ones, hA);
    Var abar = div(add(ones, hA), minus);
    Var bbar = div(dtB, broadcast_cols(minus, m));
    return {abar, bbar};
  }
  Var eye = tape.constant(Tensor::from_matrix(MatrixXd::Identity(n, n)));
  Var minus = sub(eye, hA);
  return {solve(minus, add(eye, hA)), solve(minus, dtB)};
}

Var ssm_states(Var Abar, Var Bbar, Var v, Index batch, bool diagonal) {
  const Index cols = v.value().cols();
  if (batch < 1 || cols % batch != 0) throw ShapeError("ssm_states: columns not a multiple of batch");
  const Index steps = cols / batch;
  Var bu = matmul(Bbar, v);
  Var a = diagonal ? broadcast_cols(Abar, batch) : Abar;
  std::vector<Var> states;
  states.reserve(static_cast<std::size_t>(steps));
  Var x = slice_cols(bu, 0, batch);
  states.push_back(x);
  for (Index k = 1; k < steps; ++k) {
    Var carry = diagonal ? mul(a, x) : matmul(a, x);
    x = add(carry, slice_cols(bu, k * batch, batch));
    states.push_back(x);
  }
  return concat_cols(states);
}

ForwardOutput SequenceModel::forward(Tape& tape, const MatrixXd& u, Index batch) {
  if (u.rows() != config_.in_channels) throw ShapeError("model: input channel mismatch");
  const bool diagonal = config_.form == ssm::ParamForm::kDiagonal;
  ForwardOutput out;
  Var h = affine(tape, in_weight_, in_bias_, tape.constant(Tensor::from_matrix(u)));
  for (Index l = 0; l < config_.layers; ++l) {
    LayerParams& p = layers_[static_cast<std::size_t>(l)];
    Var v = h;
    if (config_.smr.enabled) {
      Conv1dOptions opts;
      opts.batch = batch;
      opts.padding = config_.smr.padding == smr::PaddingMode::kZero ? Padding::kZero : Padding::kReplicateFirst;
      Var c = conv1d_causal(v, tape.leaf(p.smr_kernel), tape.leaf(p.smr_bias), opts);
      if (config_.smr.use_linear) c = affine(tape, p.smr_linear_weight, p.smr_linear_bias, c);
      v = mul(sigmoid(c), v);
    }
    out.gated_inputs.push_back(v);
    auto [abar, bbar] = discretize_on_tape(tape, tape.leaf(p.A), tape.leaf(p.B), tape.leaf(p.log_dt), diagonal);
    Var states = ssm_states(abar, bbar, v, batch, diagonal);
    out.states.push_back(states);
    Var y = matmul(tape.leaf(p.C), states);
    if (config_.residual) y = add(y, v);
    if (l + 1 < config_.layers && config_.nonlinearity == Nonlinearity::kGelu) y = gelu(y);
    h = y;
  }
  out.y = affine(tape, out_weight_, out_bias_, h);
  return out;
}

ssm::ContinuousSSM<double> SequenceModel::continuous_layer(Index l) const {
  const LayerParams& p = layers_.at(static_cast<std::size_t>(l));
  ssm::ContinuousSSM<double> c;
  c.form = config_.form;
  c.A = config_.form == ssm::ParamForm::kDense ? p.A.to_matrix() : MatrixXd(p.A.flat());
  c.B = p.B.to_matrix();
  c.C = p.C.to_matrix();
  c.dt = std::exp(p.log_dt.item());
  c.residual = config_.residual;
  return c;
}

ssm::DiscreteSSM<double> SequenceModel::discrete_layer(Index l) const {
  return ssm::discretize_bilinear(continuous_layer(l));
}

std::optional<smr::SMRGate<double>> SequenceModel::gate_layer(Index l) const {
  if (!config_.smr.enabled) return std::nullopt;
  const LayerParams& p = layers_.at(static_cast<std::size_t>(l));
  const Index m = config_.channels;
  const Index tau = config_.smr.tau;
  smr::SMRGate<double> g;
  g.padding = config_.smr.padding;
  for (Index j = 0; j < tau; ++j) {
    MatrixXd w(m, m);
    for (Index o = 0; o < m; ++o)
      for (Index i = 0; i < m; ++i) w(o, i) = p.smr_kernel.flat()[(o * m + i) * tau + j];
    g.taps.push_back(w);
  }
  g.bias = p.smr_bias.flat();
  g.use_linear = config_.smr.use_linear;
  if (g.use_linear) {
    g.linear_weight = p.smr_linear_weight.to_matrix();
    g.linear_bias = p.smr_linear_bias.flat();
  }
  return g;
}

ssm::Checkpoint SequenceModel::to_checkpoint() const {
  ssm::Checkpoint ck;
  for (Index l = 0; l < config_.layers; ++l) ck.blocks.push_back({continuous_layer(l), gate_layer(l)});
  ck.projections = ssm::CheckpointProjections{in_weight_.to_matrix(), in_bias_.flat(), out_weight_.to_matrix(),
                                              out_bias_.flat()};
  return ck;
}

SequenceModel SequenceModel::from_checkpoint(const ModelConfig& config, const ssm::Checkpoint& ck) {
  config.validate();
  if (static_cast<Index>(ck.blocks.size()) != config.layers || !ck.projections)
    throw ContractError("checkpoint does not match model configuration");
  SequenceModel model(config);
  model.in_weight_ = Tensor::from_matrix(ck.projections->in_weight);
  model.in_bias_ = Tensor::from_vector(ck.projections->in_bias);
  model.out_weight_ = Tensor::from_matrix(ck.projections->out_weight);
  model.out_bias_ = Tensor::from_vector(ck.projections->out_bias);
  for (const auto& block : ck.blocks) {
    LayerParams p;
    const auto& c = block.model;
    p.A = c.form == ssm::ParamForm::kDense ? Tensor::from_matrix(c.A) : Tensor::from_vector(c.A.col(0));
    p.B = Tensor::from_matrix(c.B);
    p.C = Tensor::from_matrix(c.C);
    p.log_dt = Tensor::scalar(std::log(c.dt));
    if (config.smr.enabled) {
      if (!block.gate) throw ContractError("checkpoint lacks SMR parameters");
      const auto& g = *block.gate;
      const Index m = g.in_channels(), tau = g.tau();
      p.smr_kernel = Tensor({g.out_channels(), m, tau});
      for (Index o = 0; o < g.out_channels(); ++o)
        for (Index i = 0; i < m; ++i)
          for (Index j = 0; j < tau; ++j) p.smr_kernel.flat()[(o * m + i) * tau + j] = g.taps[j](o, i);
      p.smr_bias = Tensor::from_vector(g.bias);
      if (g.use_linear) {
        p.smr_linear_weight = Tensor::from_matrix(g.linear_weight);
        p.smr_linear_bias = Tensor::from_vector(g.linear_bias);
      }
    }
    model.layers_.push_back(std::move(p));
  }
  if (model.parameter_count() != expected_parameter_count(config))
    throw ContractError("checkpoint parameter shapes do not match model configuration");
  for (Tensor* t : model.parameters()) t->set_requires_grad(true);
  return model;
}

}  // namespace nsslab::nss
