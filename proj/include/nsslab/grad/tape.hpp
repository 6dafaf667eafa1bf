#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "nsslab/grad/tensor.hpp"

namespace nsslab::grad {

enum class OpId : std::uint8_t {
  kLeaf,
  kConstant,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,
  kScaleConst,
  kSigmoid,
  kGelu,
  kExp,
  kConv1dCausal,
  kMse,
  kSliceCols,
  kConcatCols,
  kBroadcastCols,
  kSolve,
};

const char* op_name(OpId op);

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
};

/// Ordered record of primitive applications. Nodes are appended in
/// evaluation order, so every input precedes its consumer.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Binds a parameter. Its gradient accumulates into `param` on backward.
  Var leaf(Tensor& param);
  Var constant(Tensor value);
  Var record(OpId op, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward);

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  OpId op(std::size_t id) const { return nodes_[id].op; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  /// Incoming gradient of node `id` during backward.
  ConstMatrixMap out_grad(std::size_t id) const;
  /// Accumulator for node `id`, zero-initialized on first touch.
  MatrixMap grad(std::size_t id);

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    OpId op;
    std::vector<std::size_t> inputs;
    Tensor value;
    BackwardFn backward;
    Tensor* param = nullptr;
    bool needs_grad = false;
    Eigen::VectorXd grad;
  };

  std::vector<Node> nodes_;

  friend void backward(Tape& tape, Var loss);
};

/// Reverse-mode sweep from a scalar `loss`.
///
/// Gradients add into the bound parameters' accumulators; call
/// zero_grads() between steps. Throws ContractError if `loss` is not a
/// scalar and NumericError (carrying the op name) when a backward rule
/// produces a non-finite value.
void backward(Tape& tape, Var loss);

}  // namespace nsslab::grad
