#pragma once

#include <Eigen/Core>

namespace nsslab::etc {

/// Linear plant x' = A x + B u under state feedback u = T x(t_i), with a
/// Lyapunov pair (P, M) and trigger constant kappa in (0, 1).
struct ETCPlant {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd T;
  Eigen::MatrixXd P;
  Eigen::MatrixXd M;
  double kappa = 0.05;

  Eigen::Index state_size() const { return A.rows(); }
  Eigen::Index input_size() const { return B.cols(); }
  Eigen::MatrixXd closed_loop() const { return A + B * T; }

  /// Shapes, symmetry (1e-12), positive definiteness of P and M, kappa.
  void validate() const;

  /// The 2-state example with A = [[0,1],[-2,3]]: the sign-corrected A for
  /// which (A+BT)^T P + P (A+BT) = -M holds exactly.
  static ETCPlant example_corrected(double kappa = 0.05);
  /// Same example with A = [[0,1],[2,-3]] as printed; not Lyapunov-certified.
  static ETCPlant example_printed(double kappa = 0.05);
};

struct LyapunovCheck {
  Eigen::MatrixXd residual;
  double max_abs_residual = 0.0;
  /// Largest real part among eigenvalues of A + B T.
  double spectral_abscissa = 0.0;
  Eigen::MatrixXd closed_loop;
};

/// Residual (A+BT)^T P + P (A+BT) + M.
LyapunovCheck verify_lyapunov_equation(const ETCPlant& plant);

double lyapunov_value(const Eigen::MatrixXd& P, const Eigen::VectorXd& x);

struct TriggerDecision {
  bool fire = false;
  /// kappa x^T M x - 2 x^T P B T e.
  double lhs = 0.0;
  bool suppressed = false;
};

/// Fires when kappa x^T M x - 2 x^T P B T e <= 0. Suppressed (never fires)
/// while ||x|| < 1e-9.
TriggerDecision trigger_check(const Eigen::VectorXd& x, const Eigen::VectorXd& e,
                              const ETCPlant& plant);

}  // namespace nsslab::etc
