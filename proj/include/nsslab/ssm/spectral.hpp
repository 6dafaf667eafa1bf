#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "nsslab/ssm/model.hpp"

namespace nsslab::ssm {

struct SpectralRadius {
  double value = 0.0;
  /// False when the iteration hit its cap; `value` is then the last iterate.
  bool converged = true;
  int iterations = 0;
};

/// |lambda_max| of a square matrix by block power (subspace) iteration.
///
/// A block of up to four vectors is multiplied and re-orthonormalized each
/// round; the estimate is the largest Ritz value magnitude of the projected
/// matrix, which also captures complex-conjugate dominant pairs.
template <typename Derived>
SpectralRadius spectral_radius(const Eigen::MatrixBase<Derived>& a, double tolerance = 1e-10,
                               int max_iterations = 10000) {
  using Mat = Eigen::MatrixXd;
  const Mat m = a.template cast<double>();
  const Index n = m.rows();
  if (n != m.cols()) throw ShapeError("spectral_radius: matrix must be square");
  if (!m.allFinite()) throw ContractError("spectral_radius: non-finite matrix");
  if (n == 1) return {std::abs(m(0, 0)), true, 0};

  const Index block = std::min<Index>(n, 4);
  Mat q(n, block);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < block; ++j) q(i, j) = 1.0 / static_cast<double>(1 + ((i * (j + 2) + j) % 7));
  q = Eigen::HouseholderQR<Mat>(q).householderQ() * Mat::Identity(n, block);

  SpectralRadius out;
  out.converged = false;
  double previous = -1.0;
  for (int it = 1; it <= max_iterations; ++it) {
    const Mat z = m * q;
    if (z.norm() == 0.0) return {0.0, true, it};
    const Mat h = q.transpose() * z;
    Eigen::EigenSolver<Mat> es(h, false);
    double estimate = 0.0;
    for (Index i = 0; i < block; ++i) estimate = std::max(estimate, std::abs(es.eigenvalues()[i]));
    q = Eigen::HouseholderQR<Mat>(z).householderQ() * Mat::Identity(n, block);
    out.value = estimate;
    out.iterations = it;
    if (previous >= 0.0 && std::abs(estimate - previous) <= tolerance * std::max(1.0, estimate)) {
      out.converged = true;
      break;
    }
    previous = estimate;
  }
  return out;
}

/// Spectral radius of A-bar; exact max |entry| for diagonal models.
template <typename Scalar>
SpectralRadius spectral_radius(const DiscreteSSM<Scalar>& model) {
  if (model.form == ParamForm::kDiagonal)
    return {static_cast<double>(model.Abar.diagonal().cwiseAbs().maxCoeff()), true, 0};
  return spectral_radius(model.Abar);
}

}  // namespace nsslab::ssm
