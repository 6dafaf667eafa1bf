#pragma once

#include <Eigen/Core>

#include "nsslab/etc/simulate.hpp"

namespace nsslab::etc {

/// Single-input system for the observer-error bound: x' = A x + B u with
/// Lyapunov weight P for L_e = e^T P e.
struct ObserverSystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;  // n x 1
  Eigen::MatrixXd P;
};

/// Per-grid-point schedules, N+1 entries each.
struct ObserverInputs {
  Eigen::VectorXd h;    // gate values, |h| <= 1
  Eigen::VectorXd eps;  // injected noise
  Eigen::VectorXd u;    // nominal input
};

struct ObserverRun {
  Eigen::VectorXd times;
  Eigen::MatrixXd x;
  Eigen::MatrixXd z;
  Eigen::MatrixXd e;
  Eigen::VectorXd h;
  Eigen::VectorXd eps;
  Eigen::VectorXd lyapunov;  // e^T P e
  Eigen::VectorXd lhs;       // dL_e/dt
  Eigen::VectorXd rhs;       // bound
  Eigen::VectorXd slack;     // rhs - lhs
  double min_slack = 0.0;
  double mean_rhs = 0.0;
};

/// k(s) = exp(A s) B sampled at s = j dt, j = 0..count-1.
Eigen::MatrixXd observer_kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, double dt,
                                Eigen::Index count);

/// Co-integrates (forward Euler on the grid)
///   x' = A (x + I_h(t)) + B h u,   z' = A z + B h (u + eps),
/// with I_h(t) = int_0^t k(t-l) h(l) eps(l) dl by the trapezoid rule, and
/// evaluates at every grid point
///   lhs = 2 e^T P (A e + A I_h - B h eps)
///   rhs = e^T (PA + A^T P) e + 2 ||h||_inf ||e|| (int_0^t ||k(t-l)|| |eps(l)| dl + ||B|| |eps(t)|).
/// The bound is only valid for ||PA||_2 <= 1 and ||PB||_2 <= ||B||_2;
/// both are checked, as is ||h||_inf <= 1.
ObserverRun observer_bound_check(const ObserverSystem& sys, const ObserverInputs& in,
                                 const SimGrid& grid, const Eigen::VectorXd& x0,
                                 const Eigen::VectorXd& z0);

/// Same, with a caller-provided kernel (n x (N+1), column j is k(j dt)).
ObserverRun observer_bound_check(const ObserverSystem& sys, const ObserverInputs& in,
                                 const SimGrid& grid, const Eigen::VectorXd& x0,
                                 const Eigen::VectorXd& z0, const Eigen::MatrixXd& kernel);

}  // namespace nsslab::etc
