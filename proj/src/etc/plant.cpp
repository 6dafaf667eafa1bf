#include "nsslab/etc/plant.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "nsslab/errors.hpp"

namespace nsslab::etc {

namespace {

ETCPlant example(double a10, double a11, double kappa) {
  ETCPlant p;
  p.A.resize(2, 2);
  p.A << 0.0, 1.0, a10, a11;
  p.B.resize(2, 1);
  p.B << 0.0, 1.0;
  p.T.resize(1, 2);
  p.T << 1.0, -4.0;
  p.P.resize(2, 2);
  p.P << 1.0, 0.25, 0.25, 1.0;
  p.M.resize(2, 2);
  p.M << 0.5, 0.25, 0.25, 1.5;
  p.kappa = kappa;
  return p;
}

void require_spd(const Eigen::MatrixXd& m, const char* name) {
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ContractError(std::string("etc: ") + name + " is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw ContractError(std::string("etc: ") + name + " is not positive definite");
}

}  // namespace

void ETCPlant::validate() const {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n || T.rows() != B.cols() || T.cols() != n ||
      P.rows() != n || P.cols() != n || M.rows() != n || M.cols() != n)
    throw ShapeError("etc: inconsistent plant shapes");
  require_spd(P, "P");
  require_spd(M, "M");
  if (!(kappa > 0.0 && kappa < 1.0)) throw ContractError("etc: kappa must lie in (0, 1)");
}

ETCPlant ETCPlant::example_corrected(double kappa) { return example(-2.0, 3.0, kappa); }
ETCPlant ETCPlant::example_printed(double kappa) { return example(2.0, -3.0, kappa); }

LyapunovCheck verify_lyapunov_equation(const ETCPlant& plant) {
  LyapunovCheck out;
  out.closed_loop = plant.closed_loop();
  out.residual = out.closed_loop.transpose() * plant.P + plant.P * out.closed_loop + plant.M;
  out.max_abs_residual = out.residual.cwiseAbs().maxCoeff();
  Eigen::EigenSolver<Eigen::MatrixXd> es(out.closed_loop, false);
  out.spectral_abscissa = es.eigenvalues().real().maxCoeff();
  return out;
}

double lyapunov_value(const Eigen::MatrixXd& P, const Eigen::VectorXd& x) { return x.dot(P * x); }

TriggerDecision trigger_check(const Eigen::VectorXd& x, const Eigen::VectorXd& e, const ETCPlant& plant) {
  TriggerDecision d;
  d.lhs = plant.kappa * x.dot(plant.M * x) - 2.0 * x.dot(plant.P * plant.B * plant.T * e);
  if (x.norm() < 1e-9) {
    d.suppressed = true;
    return d;
  }
  d.fire = d.lhs <= 0.0;
  return d;
}

}  // namespace nsslab::etc
