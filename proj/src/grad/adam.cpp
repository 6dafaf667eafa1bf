#include "nsslab/grad/adam.hpp"

#include <cmath>

#include "nsslab/errors.hpp"

namespace nsslab::grad {

AdamState::AdamState(AdamConfig cfg, const std::vector<Tensor*>& params) : config(cfg) {
  if (!(cfg.lr > 0.0)) throw ContractError("adam: learning rate must be positive");
  m.reserve(params.size());
  v.reserve(params.size());
  for (const Tensor* p : params) {
    m.push_back(Eigen::VectorXd::Zero(p->size()));
    v.push_back(Eigen::VectorXd::Zero(p->size()));
  }
}

void adam_step(AdamState& state, const std::vector<Tensor*>& params) {
  if (params.size() != state.m.size()) throw ContractError("adam: parameter count changed");
  const AdamConfig& c = state.config;
  if (!(c.lr > 0.0)) throw ContractError("adam: learning rate must be positive");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i]->size() != state.m[i].size())
      throw ContractError("adam: shape mismatch for parameter " + std::to_string(i));

  state.t += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    auto& w = p.flat();
    const Eigen::VectorXd g = p.has_grad() ? Eigen::VectorXd(p.grad_flat()) : Eigen::VectorXd::Zero(w.size());
    if (c.weight_decay != 0.0) w *= 1.0 - c.lr * c.weight_decay;
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g.cwiseAbs2();
    w.array() -= c.lr * (state.m[i].array() / bc1) / ((state.v[i].array() / bc2).sqrt() + c.eps);
  }
}

}  // namespace nsslab::grad
