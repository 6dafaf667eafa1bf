#pragma once

#include <cmath>
#include <vector>

#include "nsslab/ssm/kernel.hpp"
#include "nsslab/ssm/model.hpp"
#include "nsslab/ssm/scan.hpp"

namespace nsslab::smr {

using ssm::Index;
using ssm::Matrix;
using ssm::Vector;

enum class PaddingMode { kZero, kReplicateFirst };

/// State Memory Replay gate: sigma(Conv_tau(pad(u))) multiplied into u.
///
/// `taps[j]` (C_out x C_in) weighs input step k - (tau-1) + j. The left
/// pad has width tau-1: zeros by default, copies of u_1 in
/// kReplicateFirst mode.
template <typename Scalar = double>
struct SMRGate {
  std::vector<Matrix<Scalar>> taps;
  Vector<Scalar> bias;
  bool use_linear = false;
  Matrix<Scalar> linear_weight;
  Vector<Scalar> linear_bias;
  PaddingMode padding = PaddingMode::kZero;

  Index tau() const { return static_cast<Index>(taps.size()); }
  Index in_channels() const { return taps.empty() ? 0 : taps.front().cols(); }
  Index out_channels() const { return taps.empty() ? 0 : taps.front().rows(); }

  /// All-zero weights: every gate value is sigma(0) = 1/2.
  static SMRGate neutral(Index channels, Index tau) {
    SMRGate g;
    g.taps.assign(static_cast<std::size_t>(tau), Matrix<Scalar>::Zero(channels, channels));
    g.bias = Vector<Scalar>::Zero(channels);
    return g;
  }

  void validate() const {
    if (taps.empty()) throw ContractError("smr: tau must be >= 1");
    for (const auto& t : taps)
      if (t.rows() != out_channels() || t.cols() != in_channels())
        throw ShapeError("smr: inconsistent tap shapes");
    if (bias.size() != out_channels()) throw ShapeError("smr: bias size");
    if (use_linear && (linear_weight.rows() != in_channels() || linear_weight.cols() != out_channels() ||
                       linear_bias.size() != in_channels()))
      throw ShapeError("smr: linear map must take C_out back to C_in channels");
    if (!use_linear && out_channels() != in_channels())
      throw ShapeError("smr: gate without linear map needs C_out == C_in");
  }
};

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// Gate values h_k in (0, 1), same shape as `u`.
template <typename Scalar, typename Derived>
Matrix<Scalar> smr_gate_values(const SMRGate<Scalar>& gate, const Eigen::MatrixBase<Derived>& u) {
  gate.validate();
  if (u.rows() != gate.in_channels()) throw ShapeError("smr_gate: channel mismatch");
  const Index steps = u.cols();
  const Index tau = gate.tau();
  Matrix<Scalar> conv = gate.bias.replicate(1, steps);
  for (Index k = 0; k < steps; ++k) {
    for (Index j = 0; j < tau; ++j) {
      const Index src = k - (tau - 1) + j;
      if (src >= 0)
        conv.col(k).noalias() += gate.taps[j] * u.col(src);
      else if (gate.padding == PaddingMode::kReplicateFirst)
        conv.col(k).noalias() += gate.taps[j] * u.col(0);
    }
  }
  if (gate.use_linear) conv = (gate.linear_weight * conv).colwise() + gate.linear_bias;
  return conv.unaryExpr([](Scalar x) { return sigmoid(x); });
}

/// u_k scaled elementwise by its gate value.
template <typename Scalar, typename Derived>
Matrix<Scalar> smr_gate(const SMRGate<Scalar>& gate, const Eigen::MatrixBase<Derived>& u) {
  return smr_gate_values(gate, u).cwiseProduct(u);
}

enum class ExecutionMode { kScan, kConv };

template <typename Scalar = double>
struct SMRForwardResult {
  Matrix<Scalar> y;
  ssm::StateTrace<Scalar> trace;
  Matrix<Scalar> gated_input;
  Scalar gate_min = Scalar(0);
  Scalar gate_max = Scalar(0);
  /// ||gated input||_inf, never above ||u||_inf.
  Scalar gated_inf_norm = Scalar(0);
};

/// SSM run on smr_gate(gate, u) in either execution mode. Conv mode
/// recovers the states through the recurrence only for the trace; the
/// output itself comes from the kernel.
template <typename Scalar, typename Derived>
SMRForwardResult<Scalar> smr_ssm_forward(const ssm::DiscreteSSM<Scalar>& model,
                                         const SMRGate<Scalar>& gate,
                                         const Eigen::MatrixBase<Derived>& u, ExecutionMode mode) {
  const Matrix<Scalar> h = smr_gate_values(gate, u);
  SMRForwardResult<Scalar> out;
  out.gated_input = h.cwiseProduct(u);
  out.gate_min = h.minCoeff();
  out.gate_max = h.maxCoeff();
  out.gated_inf_norm = out.gated_input.cwiseAbs().maxCoeff();

  auto scan = ssm::ssm_scan(model, out.gated_input);
  if (mode == ExecutionMode::kScan) {
    out.y = std::move(scan.y);
  } else {
    const auto kernel = ssm::ssm_kernel(model, u.cols());
    out.y = ssm::ssm_conv(kernel, out.gated_input);
    if (model.residual) out.y += out.gated_input;
  }
  out.trace = std::move(scan.trace);
  return out;
}

}  // namespace nsslab::smr
