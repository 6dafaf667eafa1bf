#include "nsslab/nss/evaluate.hpp"

#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "nsslab/errors.hpp"
#include "nsslab/ssm/scan.hpp"
#include "nsslab/ssm/spectral.hpp"

namespace nsslab::nss {

using Eigen::MatrixXd;
using Eigen::VectorXd;

EvalRun evaluate_pair(SequenceModel& model, const SequencePair& pair) {
  grad::Tape tape;
  ForwardOutput fwd = model.forward(tape, pair.input);
  EvalRun run;
  const MatrixXd y = fwd.y.value().to_matrix();
  run.mse = (y - pair.target).squaredNorm() / static_cast<double>(y.size());
  run.state_abs_sum = fwd.states.front().value().to_matrix().cwiseAbs().colwise().sum().transpose();
  run.non_finite = !y.allFinite();
  for (const Var& s : fwd.states) run.non_finite = run.non_finite || !s.value().all_finite();
  return run;
}

namespace {

double peak(const VectorXd& v) {
  double p = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) return INFINITY;
    p = std::max(p, v[i]);
  }
  return p;
}

}  // namespace

NSSReport evaluate_perturbed(SequenceModel& model, const SequencePair& clean, const SequencePair& perturbed) {
  if (clean.input.cols() != perturbed.input.cols() || clean.target.cols() != perturbed.target.cols())
    throw ShapeError("evaluate_perturbed: clean and perturbed lengths differ");
  const EvalRun a = evaluate_pair(model, clean);
  const EvalRun b = evaluate_pair(model, perturbed);
  NSSReport r;
  r.clean_mse = a.mse;
  r.perturbed_mse = b.mse;
  r.states_clean = a.state_abs_sum;
  r.states_perturbed = b.state_abs_sum;
  r.peak_clean = peak(a.state_abs_sum);
  r.peak_perturbed = peak(b.state_abs_sum);
  r.peak_state = std::max(r.peak_clean, r.peak_perturbed);
  r.divergence = a.non_finite || b.non_finite || r.peak_state > kDivergenceThreshold;
  return r;
}

namespace {

double op_norm(const MatrixXd& m) { return Eigen::JacobiSVD<MatrixXd>(m).singularValues()(0); }

}  // namespace

Prop1Result prop1_bound_check(const ssm::DiscreteSSM<double>& model, const MatrixXd& u, const MatrixXd& eps,
                              const Prop1Input& bounds) {
  model.validate();
  const Index L = u.cols();
  if (u.rows() != model.channels() || eps.rows() != u.rows() || eps.cols() != L)
    throw ShapeError("prop1_bound_check: u and eps must be [m x L]");
  if (!(bounds.zeta > 0.0) || !(bounds.b > 0.0) || !(bounds.c > 0.0))
    throw ContractError("prop1_bound_check: bounds must be positive");
  const double u_inf = u.cwiseAbs().maxCoeff();
  if (u_inf > bounds.zeta) throw ContractError("prop1_bound_check: ||u||_inf exceeds zeta");
  const double bn = op_norm(model.Bbar), cn = op_norm(model.Cbar);
  if (bn > bounds.b) throw ContractError("prop1_bound_check: b is below ||Bbar||_2 = " + std::to_string(bn));
  if (cn > bounds.c) throw ContractError("prop1_bound_check: c is below ||Cbar||_2 = " + std::to_string(cn));

  Prop1Result res;
  res.spectral_radius = ssm::spectral_radius(model).value;
  const double rho = res.spectral_radius;
  {
    MatrixXd power = MatrixXd::Identity(model.state_size(), model.state_size());
    double rk = 1.0;
    for (Index k = 1; k < L; ++k) {
      power = model.Abar * power;
      rk *= rho;
      if (op_norm(power) > rk * (1.0 + 1e-9 * static_cast<double>(k)) + 1e-300)
        throw ContractError("prop1_bound_check: ||Abar^" + std::to_string(k) +
                            "||_2 exceeds |lambda_max|^k (Abar is not normal)");
    }
  }

  ssm::DiscreteSSM<double> plain = model;
  plain.residual = false;
  const MatrixXd y = ssm::ssm_scan(plain, u).y;
  const MatrixXd yp = ssm::ssm_scan(plain, MatrixXd(u + eps)).y;
  res.error.resize(L);
  res.bound.resize(L);
  double acc = 0.0;
  for (Index t = 0; t < L; ++t) {
    acc = rho * acc + bounds.c * bounds.b * eps.col(t).norm();
    res.error[t] = (yp.col(t) - y.col(t)).norm();
    res.bound[t] = acc;
  }
  res.max_excess = (res.error - res.bound).maxCoeff();
  for (Index t = 0; t < L; ++t)
    if (res.error[t] > res.bound[t] * (1.0 + 1e-9) + 1e-12) res.holds = false;
  return res;
}

}  // namespace nsslab::nss
