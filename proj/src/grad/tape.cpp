#include "nsslab/grad/tape.hpp"

#include <string>

#include "nsslab/errors.hpp"

namespace nsslab::grad {

const char* op_name(OpId op) {
  switch (op) {
    case OpId::kLeaf: return "leaf";
    case OpId::kConstant: return "constant";
    case OpId::kMatMul: return "matmul";
    case OpId::kAdd: return "add";
    case OpId::kSub: return "sub";
    case OpId::kMul: return "mul";
    case OpId::kDiv: return "div";
    case OpId::kScale: return "scale";
    case OpId::kScaleConst: return "scale_const";
    case OpId::kSigmoid: return "sigmoid";
    case OpId::kGelu: return "gelu";
    case OpId::kExp: return "exp";
    case OpId::kConv1dCausal: return "conv1d_causal";
    case OpId::kMse: return "mse";
    case OpId::kSliceCols: return "slice_cols";
    case OpId::kConcatCols: return "concat_cols";
    case OpId::kBroadcastCols: return "broadcast_cols";
    case OpId::kSolve: return "solve";
  }
  return "unknown";
}

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::leaf(Tensor& param) {
  Tensor value(param.shape());
  value.flat() = param.flat();
  nodes_.push_back(Node{OpId::kLeaf, {}, std::move(value), nullptr, &param, param.requires_grad(), {}});
  return {this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{OpId::kConstant, {}, std::move(value), nullptr, nullptr, false, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::record(OpId op, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward) {
  bool needs = false;
  for (std::size_t in : inputs) needs = needs || nodes_.at(in).needs_grad;
  nodes_.push_back(Node{op, std::move(inputs), std::move(value),
                        needs ? std::move(backward) : BackwardFn{}, nullptr, needs, {}});
  return {this, nodes_.size() - 1};
}

ConstMatrixMap Tape::out_grad(std::size_t id) const {
  const Node& n = nodes_[id];
  return ConstMatrixMap(n.grad.data(), n.value.rows(), n.value.cols());
}

MatrixMap Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Eigen::VectorXd::Zero(n.value.size());
  return MatrixMap(n.grad.data(), n.value.rows(), n.value.cols());
}

void backward(Tape& tape, Var loss) {
  if (loss.tape != &tape) throw ContractError("loss does not belong to this tape");
  if (tape.value(loss.id).size() != 1)
    throw ContractError("backward needs a scalar loss, got shape " +
                        tape.value(loss.id).shape_string());

  for (auto& node : tape.nodes_) node.grad.resize(0);
  tape.grad(loss.id)(0, 0) = 1.0;

  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Tape::Node& node = tape.nodes_[i];
    if (!node.needs_grad || node.grad.size() == 0 || !node.backward) continue;
    node.backward(tape, i);
    for (std::size_t in : tape.nodes_[i].inputs) {
      const auto& g = tape.nodes_[in].grad;
      if (g.size() != 0 && !g.allFinite())
        throw NumericError(std::string("non-finite gradient from ") + op_name(tape.nodes_[i].op) +
                               " (node " + std::to_string(i) + ")",
                           op_name(tape.nodes_[i].op));
    }
  }

  for (auto& node : tape.nodes_) {
    if (node.param == nullptr || !node.param->requires_grad()) continue;
    auto acc = node.param->grad_flat();
    if (node.grad.size() == acc.size()) acc += node.grad;
  }
}

}  // namespace nsslab::grad
