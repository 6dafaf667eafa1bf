#pragma once

#include <cmath>
#include <optional>

#include "nsslab/ssm/model.hpp"

namespace nsslab::ssm {

/// First step at which a hidden state stopped being finite.
struct Divergence {
  Index step = 0;
  /// Largest finite per-step state abs-sum seen before `step`.
  double last_finite_magnitude = 0.0;
};

/// Hidden states x_1..x_L (one column per step) and their abs-sums.
template <typename Scalar = double>
struct StateTrace {
  Matrix<Scalar> states;
  Vector<Scalar> abs_sum;
  std::optional<Divergence> divergence;

  Scalar peak_abs_sum() const {
    Scalar peak(0);
    for (Index k = 0; k < abs_sum.size(); ++k) {
      if (!std::isfinite(static_cast<double>(abs_sum[k]))) return abs_sum[k];
      peak = std::max(peak, abs_sum[k]);
    }
    return peak;
  }
};

template <typename Scalar = double>
struct ScanResult {
  Matrix<Scalar> y;
  StateTrace<Scalar> trace;
};

/// Per-step abs-sum column metric; records the first non-finite step.
template <typename Scalar>
StateTrace<Scalar> make_trace(Matrix<Scalar> states) {
  StateTrace<Scalar> trace;
  trace.abs_sum = states.cwiseAbs().colwise().sum().transpose();
  double peak = 0.0;
  for (Index k = 0; k < states.cols(); ++k) {
    const double s = static_cast<double>(trace.abs_sum[k]);
    if (!std::isfinite(s)) {
      trace.divergence = Divergence{k, peak};
      break;
    }
    peak = std::max(peak, s);
  }
  trace.states = std::move(states);
  return trace;
}

/// Sequential recurrence x_k = A-bar x_{k-1} + B-bar u_k, y_k = C-bar x_k
/// (+ u_k with the residual flag). `u` is m x L, one column per step.
///
/// Overflow is not an error: the returned trace carries the step index.
template <typename Scalar, typename Derived>
ScanResult<Scalar> ssm_scan(const DiscreteSSM<Scalar>& model, const Eigen::MatrixBase<Derived>& u,
                            const Vector<Scalar>& x0) {
  model.validate();
  const Index n = model.state_size();
  const Index m = model.channels();
  if (u.rows() != m) throw ShapeError("ssm_scan: input has wrong channel count");
  if (u.cols() < 1) throw ShapeError("ssm_scan: empty input");
  if (x0.size() != n) throw ShapeError("ssm_scan: x0 has wrong size");

  const Index steps = u.cols();
  Matrix<Scalar> states(n, steps);
  Vector<Scalar> x = x0;
  const bool diagonal = model.form == ParamForm::kDiagonal;
  const Vector<Scalar> diag = model.Abar.diagonal();
  for (Index k = 0; k < steps; ++k) {
    if (diagonal)
      x = diag.cwiseProduct(x) + model.Bbar * u.col(k);
    else
      x = model.Abar * x + model.Bbar * u.col(k);
    states.col(k) = x;
  }

  ScanResult<Scalar> out;
  out.y = model.Cbar * states;
  if (model.residual) out.y += u;
  out.trace = make_trace<Scalar>(std::move(states));
  return out;
}

template <typename Scalar, typename Derived>
ScanResult<Scalar> ssm_scan(const DiscreteSSM<Scalar>& model, const Eigen::MatrixBase<Derived>& u) {
  return ssm_scan(model, u, Vector<Scalar>::Zero(model.state_size()).eval());
}

/// ||a - b||_inf / ||b||_inf (or the absolute deviation when b == 0).
template <typename A, typename B>
double max_relative_deviation(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  const double scale = static_cast<double>(b.cwiseAbs().maxCoeff());
  const double diff = static_cast<double>((a - b).cwiseAbs().maxCoeff());
  return scale > 0.0 ? diff / scale : diff;
}

}  // namespace nsslab::ssm
