#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "nsslab/ssm/model.hpp"

namespace nsslab::ssm {

/// Bilinear (Tustin) discretization:
///   A-bar = (I - dt/2 A)^-1 (I + dt/2 A),  B-bar = (I - dt/2 A)^-1 dt B,  C-bar = C.
///
/// Throws DiscretizationError when the condition number of (I - dt/2 A)
/// exceeds `max_condition`; the error carries the eigenvalue of A closest
/// to the pole 2/dt.
template <typename Scalar>
DiscreteSSM<Scalar> discretize_bilinear(const ContinuousSSM<Scalar>& model,
                                        double max_condition = 1e12) {
  model.validate();
  const Index n = model.state_size();
  const Scalar half = model.dt / Scalar(2);

  auto fail = [&](double condition) {
    const Matrix<Scalar> a = model.dense_A();
    Eigen::EigenSolver<Matrix<Scalar>> es(a, false);
    std::complex<double> worst(0.0, 0.0);
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n; ++i) {
      const std::complex<double> lambda(static_cast<double>(es.eigenvalues()[i].real()),
                                        static_cast<double>(es.eigenvalues()[i].imag()));
      const double gap = std::abs(1.0 - static_cast<double>(half) * lambda);
      if (gap < best) {
        best = gap;
        worst = lambda;
      }
    }
    std::ostringstream os;
    os << "discretize_bilinear: I - dt/2*A is singular to working precision (dt="
       << static_cast<double>(model.dt) << ", condition~" << condition << ", eigenvalue "
       << worst.real() << (worst.imag() < 0 ? "-" : "+") << std::abs(worst.imag()) << "i)";
    throw DiscretizationError(os.str(), static_cast<double>(model.dt), worst.real(), worst.imag());
  };

  DiscreteSSM<Scalar> out;
  out.form = model.form;
  out.residual = model.residual;
  out.Cbar = model.C;
  out.source = std::make_shared<const ContinuousSSM<Scalar>>(model);

  if (model.form == ParamForm::kDiagonal) {
    const Vector<Scalar> minus = Vector<Scalar>::Ones(n) - half * model.A.col(0);
    const Vector<Scalar> plus = Vector<Scalar>::Ones(n) + half * model.A.col(0);
    const double lo = static_cast<double>(minus.cwiseAbs().minCoeff());
    const double hi = static_cast<double>(minus.cwiseAbs().maxCoeff());
    if (!(lo > 0.0) || hi / lo > max_condition) fail(lo > 0.0 ? hi / lo : INFINITY);
    out.Abar = plus.cwiseQuotient(minus).asDiagonal();
    out.Bbar = minus.cwiseInverse().asDiagonal() * (model.dt * model.B);
    return out;
  }

  const Matrix<Scalar> eye = Matrix<Scalar>::Identity(n, n);
  const Matrix<Scalar> minus = eye - half * model.A;
  Eigen::PartialPivLU<Matrix<Scalar>> lu(minus);
  const double rcond = static_cast<double>(lu.rcond());
  if (!(rcond > 0.0) || 1.0 / rcond > max_condition) fail(rcond > 0.0 ? 1.0 / rcond : INFINITY);
  out.Abar = lu.solve(eye + half * model.A);
  out.Bbar = lu.solve(model.dt * model.B);
  return out;
}

}  // namespace nsslab::ssm
