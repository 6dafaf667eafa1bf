#pragma once

#include <Eigen/Core>

#include "nsslab/nss/model.hpp"
#include "nsslab/nss/train.hpp"
#include "nsslab/ssm/model.hpp"

namespace nsslab::nss {

constexpr double kDivergenceThreshold = 1e6;

struct NSSReport {
  double clean_mse = 0.0;
  double perturbed_mse = 0.0;
  /// Per-step sum_j |x_k[j]| of the first layer, clean and perturbed runs.
  Eigen::VectorXd states_clean;
  Eigen::VectorXd states_perturbed;
  double peak_clean = 0.0;
  double peak_perturbed = 0.0;
  /// Max of the two peaks.
  double peak_state = 0.0;
  bool divergence = false;

  double mse_ratio() const { return perturbed_mse / clean_mse; }
};

struct EvalRun {
  double mse = 0.0;
  Eigen::VectorXd state_abs_sum;
  bool non_finite = false;
};

/// Open-loop run of the model on one pair.
EvalRun evaluate_pair(SequenceModel& model, const SequencePair& pair);

/// Divergence is flagged when any state or output is non-finite or the
/// first-layer peak exceeds kDivergenceThreshold.
NSSReport evaluate_perturbed(SequenceModel& model, const SequencePair& clean, const SequencePair& perturbed);

struct Prop1Input {
  double zeta = 0.0;
  double b = 0.0;
  double c = 0.0;
};

struct Prop1Result {
  /// ||y'_t - y_t|| and sum_i rho^{t-i} c b |eps_i|, t = 1..L.
  Eigen::VectorXd error;
  Eigen::VectorXd bound;
  double spectral_radius = 0.0;
  /// max_t (error_t - bound_t).
  double max_excess = 0.0;
  bool holds = true;
};

/// Runs the (residual-free) recurrence on u and u + eps and compares the
/// output error with the geometric accumulation bound. Throws
/// ContractError when ||u||_inf > zeta, b < ||Bbar||_2, c < ||Cbar||_2, or
/// ||Abar^k||_2 > rho^k for some k < L.
Prop1Result prop1_bound_check(const ssm::DiscreteSSM<double>& model, const Eigen::MatrixXd& u,
                              const Eigen::MatrixXd& eps, const Prop1Input& bounds);

}  // namespace nsslab::nss
