#include "nsslab/etc/observer.hpp"

#include <cmath>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "nsslab/errors.hpp"

namespace nsslab::etc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double spectral_norm(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<MatrixXd>(m).singularValues()(0);
}

}  // namespace

MatrixXd observer_kernel(const MatrixXd& A, const MatrixXd& B, double dt, Index count) {
  if (B.cols() != 1 || B.rows() != A.rows() || A.rows() != A.cols())
    throw ShapeError("observer_kernel: expects square A and n x 1 B");
  const MatrixXd E = (A * dt).exp();
  MatrixXd k(A.rows(), count);
  VectorXd col = B.col(0);
  for (Index j = 0; j < count; ++j) {
    k.col(j) = col;
    col = E * col;
  }
  return k;
}

ObserverRun observer_bound_check(const ObserverSystem& sys, const ObserverInputs& in,
                                 const SimGrid& grid, const VectorXd& x0, const VectorXd& z0) {
  const Index points = grid.steps() + 1;
  return observer_bound_check(sys, in, grid, x0, z0, observer_kernel(sys.A, sys.B, grid.dt, points));
}

ObserverRun observer_bound_check(const ObserverSystem& sys, const ObserverInputs& in,
                                 const SimGrid& grid, const VectorXd& x0, const VectorXd& z0,
                                 const MatrixXd& kernel) {
  const Index n = sys.A.rows();
  if (sys.A.cols() != n || sys.B.rows() != n || sys.B.cols() != 1 || sys.P.rows() != n ||
      sys.P.cols() != n)
    throw ShapeError("observer_bound_check: expects n x n A and P, n x 1 B");
  if (x0.size() != n || z0.size() != n) throw ShapeError("observer_bound_check: x0/z0 size");
  const Index steps = grid.steps();
  const Index points = steps + 1;
  if (in.h.size() != points || in.eps.size() != points || in.u.size() != points)
    throw ShapeError("observer_bound_check: schedules need one value per grid point");
  if (kernel.rows() != n || kernel.cols() < points)
    throw ShapeError("observer_bound_check: kernel must cover the grid");

  constexpr double kNormTol = 1e-12;
  const double h_inf = in.h.cwiseAbs().maxCoeff();
  if (h_inf > 1.0 + kNormTol)
    throw ContractError("observer_bound_check: ||h||_inf = " + std::to_string(h_inf) + " exceeds 1");
  const double pa = spectral_norm(sys.P * sys.A);
  if (pa > 1.0 + kNormTol)
    throw ContractError("observer_bound_check: ||PA||_2 = " + std::to_string(pa) + " exceeds 1");
  const double b_norm = spectral_norm(sys.B);
  if (spectral_norm(sys.P * sys.B) > b_norm + kNormTol)
    throw ContractError("observer_bound_check: ||PB||_2 exceeds ||B||_2");

  VectorXd k_norm(points);
  for (Index j = 0; j < points; ++j) k_norm[j] = kernel.col(j).norm();
  const VectorXd heps = in.h.cwiseProduct(in.eps);
  const MatrixXd PA = sys.P * sys.A;
  const MatrixXd sym = PA + PA.transpose();
  const VectorXd b = sys.B.col(0);
  const double dt = grid.dt;

  ObserverRun run;
  run.times.resize(points);
  run.x.resize(n, points);
  run.z.resize(n, points);
  run.e.resize(n, points);
  run.h = in.h;
  run.eps = in.eps;
  run.lyapunov.resize(points);
  run.lhs.resize(points);
  run.rhs.resize(points);
  run.slack.resize(points);

  VectorXd x = x0;
  VectorXd z = z0;
  for (Index k = 0; k < points; ++k) {
    // trapezoid over l_j = j dt, j = 0..k
    VectorXd I = VectorXd::Zero(n);
    double J = 0.0;
    for (Index j = 0; j <= k; ++j) {
      const double w = (k == 0) ? 0.0 : ((j == 0 || j == k) ? 0.5 * dt : dt);
      I += (w * heps[j]) * kernel.col(k - j);
      J += w * k_norm[k - j] * std::abs(in.eps[j]);
    }
    const VectorXd e = x - z;
    const VectorXd edot = sys.A * e + sys.A * I - b * heps[k];
    run.times[k] = grid.time(k);
    run.x.col(k) = x;
    run.z.col(k) = z;
    run.e.col(k) = e;
    run.lyapunov[k] = e.dot(sys.P * e);
    run.lhs[k] = 2.0 * e.dot(sys.P * edot);
    run.rhs[k] = e.dot(sym * e) + 2.0 * h_inf * e.norm() * (J + b_norm * std::abs(in.eps[k]));
    run.slack[k] = run.rhs[k] - run.lhs[k];
    if (k == steps) break;
    const VectorXd xdot = sys.A * (x + I) + b * (in.h[k] * in.u[k]);
    const VectorXd zdot = sys.A * z + b * (in.h[k] * (in.u[k] + in.eps[k]));
    x += dt * xdot;
    z += dt * zdot;
  }
  run.min_slack = run.slack.minCoeff();
  run.mean_rhs = run.rhs.mean();
  return run;
}

}  // namespace nsslab::etc
