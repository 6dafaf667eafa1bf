#include "nsslab/grad/ops.hpp"

#include <cmath>
#include <string>

#include <Eigen/LU>

#include "nsslab/errors.hpp"

namespace nsslab::grad {

namespace {

Tape& tape_of(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw ContractError("operands live on different tapes");
  return *a.tape;
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
}

using KernelTap = Eigen::Map<const RowMatrix, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
using KernelTapMut = Eigen::Map<RowMatrix, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;

// Tap j of a row-major [C_out x C_in x tau] kernel as a C_out x C_in matrix.
KernelTap tap(const Tensor& kernel, Index j) {
  const Index co = kernel.shape()[0], ci = kernel.shape()[1], tau = kernel.shape()[2];
  return KernelTap(kernel.flat().data() + j, co, ci,
                   Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(ci * tau, tau));
}

KernelTapMut tap(MatrixMap grad, const Tensor& kernel, Index j) {
  const Index co = kernel.shape()[0], ci = kernel.shape()[1], tau = kernel.shape()[2];
  return KernelTapMut(grad.data() + j, co, ci,
                      Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(ci * tau, tau));
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_slope(double x) {
  constexpr double kInvSqrt2Pi = 0.3989422804014327;
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() > 2 || bv.rank() > 2 || av.cols() != bv.rows())
    throw ShapeError("matmul: " + av.shape_string() + " x " + bv.shape_string());
  Tensor out(bv.rank() == 1 ? std::vector<Index>{av.rows()} : std::vector<Index>{av.rows(), bv.cols()});
  out.matrix().noalias() = av.matrix() * bv.matrix();
  return t.record(OpId::kMatMul, {a.id, b.id}, std::move(out), [](Tape& tp, std::size_t self) {
    const auto& in = tp.inputs(self);
    const auto g = tp.out_grad(self);
    if (tp.needs_grad(in[0])) tp.grad(in[0]).noalias() += g * tp.value(in[1]).matrix().transpose();
    if (tp.needs_grad(in[1])) tp.grad(in[1]).noalias() += tp.value(in[0]).matrix().transpose() * g;
  });
}

Var matvec(Var a, Var x) {
  if (x.value().rank() != 1) throw ShapeError("matvec: right operand must be rank 1");
  return matmul(a, x);
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape("add", a.value(), b.value());
  Tensor out(a.value().shape());
  out.flat() = a.value().flat() + b.value().flat();
  return t.record(OpId::kAdd, {a.id, b.id}, std::move(out), [](Tape& tp, std::size_t self) {
    const auto& in = tp.inputs(self);
    const auto g = tp.out_grad(self);
    for (std::size_t k : in)
      if (tp.needs_grad(k)) tp.grad(k) += g;
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape("sub", a.value(), b.value());
  Tensor out(a.value().shape());
  out.flat() = a.value().flat() - b.value().flat();
  return t.record(OpId::kSub, {a.id, b.id}, std::move(out), [](Tape& tp, std::size_t self) {
    const auto& in = tp.inputs(self);
    const auto g = tp.out_grad(self);
    if (tp.needs_grad(in[0])) tp.grad(in[0]) += g;
    if (tp.needs_grad(in[1])) tp.grad(in[1]) -= g;
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape("mul", a.value(), b.value());
  Tensor out(a.value().shape());
  out.flat() = a.value().flat().cwiseProduct(b.value().flat());
  return t.record(OpId::kMul, {a.id, b.id}, std::move(out), [](Tape& tp, std::size_t self) {
    const auto& in = tp.inputs(self);
    const auto g = tp.out_grad(self);
    if (tp.needs_grad(in[0])) tp.grad(in[0]) += g.cwiseProduct(tp.value(in[1]).matrix());
    if (tp.needs_grad(in[1])) tp.grad(in[1]) += g.cwiseProduct(tp.value(in[0]).matrix());
  });
}

Var div(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape("div", a.value(), b.value());
  Tensor out(a.value().shape());
  out.flat() = a.value().flat().cwiseQuotient(b.value().flat());
  return t.record(OpId::kDiv, {a.id, b.id}, std::move(out), [](Tape& tp, std::size_t self) {
    const auto& in = tp.inputs(self);
    const auto g = tp.out_grad(self);
    const auto bv = tp.value(in[1]).matrix();
    if (tp.needs_grad(in[0])) tp.grad(in[0]) += g.cwiseQuotient(bv);
    if (tp.needs_grad(in[1]))
      tp.grad(in[1]) -= g.cwiseProduct(tp.value(self).matrix()).cwiseQuotient(bv);
  });
}

Var scale(Var s, Var a) {
  Tape& t = tape_of(s, a);
  if (s.value().size() != 1) throw ShapeError("scale: factor must hold one element");
  Tensor out(a.value().shape());
  out.flat() = s.value().flat()[0] * a.value().flat();
  return t.record(OpId::kScale, {s.id, a.id}, std::move(out), [](Tape& tp, std::size_t self) {
    const auto& in = tp.inputs(self);
    const auto g = tp.out_grad(self);
    if (tp.needs_grad(in[0])) tp.grad(in[0])(0, 0) += g.cwiseProduct(tp.value(in[1]).matrix()).sum();
    if (tp.needs_grad(in[1])) tp.grad(in[1]) += tp.value(in[0]).flat()[0] * g;
  });
}

Var scale(Var a, double c) {
  Tensor out(a.value().shape());
  out.flat() = c * a.value().flat();
  return a.tape->record(OpId::kScaleConst, {a.id}, std::move(out), [c](Tape& tp, std::size_t self) {
    tp.grad(tp.inputs(self)[0]) += c * tp.out_grad(self);
  });
}

Var sigmoid(Var a) {
  Tensor out(a.value().shape());
  out.flat() = a.value().flat().unaryExpr([](double x) {
    // Split by sign so large |x| never overflows exp.
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return a.tape->record(OpId::kSigmoid, {a.id}, std::move(out), [](Tape& tp, std::size_t self) {
    const auto s = tp.value(self).matrix().array();
    tp.grad(tp.inputs(self)[0]).array() += tp.out_grad(self).array() * s * (1.0 - s);
  });
}

Var gelu(Var a) {
  Tensor out(a.value().shape());
  out.flat() = a.value().flat().unaryExpr(&gelu_value);
  return a.tape->record(OpId::kGelu, {a.id}, std::move(out), [](Tape& tp, std::size_t self) {
    const std::size_t in = tp.inputs(self)[0];
    tp.grad(in).array() +=
        tp.out_grad(self).array() * tp.value(in).matrix().unaryExpr(&gelu_slope).array();
  });
}

Var exp(Var a) {
  Tensor out(a.value().shape());
  out.flat() = a.value().flat().array().exp().matrix();
  return a.tape->record(OpId::kExp, {a.id}, std::move(out), [](Tape& tp, std::size_t self) {
    tp.grad(tp.inputs(self)[0]) += tp.out_grad(self).cwiseProduct(tp.value(self).matrix());
  });
}

Var conv1d_causal(Var input, Var kernel, Var bias, const Conv1dOptions& options) {
  Tape& t = tape_of(input, kernel);
  tape_of(input, bias);
  const Tensor& x = input.value();
  const Tensor& w = kernel.value();
  const Tensor& b = bias.value();
  if (w.rank() != 3) throw ShapeError("conv1d_causal: kernel must be [C_out x C_in x tau]");
  const Index co = w.shape()[0], ci = w.shape()[1], tau = w.shape()[2];
  if (tau < 1) throw ShapeError("conv1d_causal: kernel length must be >= 1");
  if (tau > options.max_kernel)
    throw ConfigError("conv1d_causal: kernel length " + std::to_string(tau) +
                      " exceeds configured maximum " + std::to_string(options.max_kernel));
  if (x.rank() != 2 || x.rows() != ci)
    throw ShapeError("conv1d_causal: input " + x.shape_string() + " does not match kernel " +
                     w.shape_string());
  if (b.size() != co) throw ShapeError("conv1d_causal: bias must have C_out entries");
  const Index batch = options.batch;
  if (batch < 1 || x.cols() % batch != 0 || x.cols() == 0)
    throw ShapeError("conv1d_causal: column count is not a positive multiple of batch");
  const Index n = x.cols();
  const Index steps = n / batch;

  Tensor out({co, n});
  auto y = out.matrix();
  y = b.flat().replicate(1, n);
  const auto xm = x.matrix();
  for (Index j = 0; j < tau; ++j) {
    const Index shift = std::min(tau - 1 - j, steps);
    const Index off = shift * batch;
    const auto wj = tap(w, j);
    if (off < n) y.rightCols(n - off).noalias() += wj * xm.leftCols(n - off);
    if (options.padding == Padding::kReplicateFirst && shift > 0) {
      const RowMatrix first = wj * xm.leftCols(batch);
      for (Index k = 0; k < shift; ++k) y.middleCols(k * batch, batch) += first;
    }
  }

  const Padding padding = options.padding;
  return t.record(
      OpId::kConv1dCausal, {input.id, kernel.id, bias.id}, std::move(out),
      [batch, padding, steps](Tape& tp, std::size_t self) {
        const auto& in = tp.inputs(self);
        const auto g = tp.out_grad(self);
        const Tensor& xv = tp.value(in[0]);
        const Tensor& wv = tp.value(in[1]);
        const auto xm = xv.matrix();
        const Index tau = wv.shape()[2];
        const Index n = xv.cols();
        for (Index j = 0; j < tau; ++j) {
          const Index shift = std::min(tau - 1 - j, steps);
          const Index off = shift * batch;
          const auto wj = tap(wv, j);
          if (tp.needs_grad(in[0]) && off < n)
            tp.grad(in[0]).leftCols(n - off).noalias() += wj.transpose() * g.rightCols(n - off);
          if (tp.needs_grad(in[1]) && off < n)
            tap(tp.grad(in[1]), wv, j).noalias() += g.rightCols(n - off) * xm.leftCols(n - off).transpose();
          if (padding == Padding::kReplicateFirst && shift > 0) {
            RowMatrix gsum = RowMatrix::Zero(g.rows(), batch);
            for (Index k = 0; k < shift; ++k) gsum += g.middleCols(k * batch, batch);
            if (tp.needs_grad(in[0])) tp.grad(in[0]).leftCols(batch).noalias() += wj.transpose() * gsum;
            if (tp.needs_grad(in[1]))
              tap(tp.grad(in[1]), wv, j).noalias() += gsum * xm.leftCols(batch).transpose();
          }
        }
        if (tp.needs_grad(in[2])) tp.grad(in[2]) += g.rowwise().sum();
      });
}

Var mse(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape("mse", a.value(), b.value());
  const Index n = a.value().size();
  if (n == 0) throw ShapeError("mse: empty operands");
  Tensor out = Tensor::scalar((a.value().flat() - b.value().flat()).squaredNorm() / static_cast<double>(n));
  return t.record(OpId::kMse, {a.id, b.id}, std::move(out), [n](Tape& tp, std::size_t self) {
    const auto& in = tp.inputs(self);
    const double g = tp.out_grad(self)(0, 0) * 2.0 / static_cast<double>(n);
    const auto diff = tp.value(in[0]).matrix() - tp.value(in[1]).matrix();
    if (tp.needs_grad(in[0])) tp.grad(in[0]) += g * diff;
    if (tp.needs_grad(in[1])) tp.grad(in[1]) -= g * diff;
  });
}

Var slice_cols(Var a, Index begin, Index count) {
  const Tensor& av = a.value();
  if (av.rank() != 2 || begin < 0 || count < 0 || begin + count > av.cols())
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + av.shape_string());
  Tensor out({av.rows(), count});
  out.matrix() = av.matrix().middleCols(begin, count);
  return a.tape->record(OpId::kSliceCols, {a.id}, std::move(out),
                        [begin, count](Tape& tp, std::size_t self) {
                          tp.grad(tp.inputs(self)[0]).middleCols(begin, count) += tp.out_grad(self);
                        });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: nothing to concatenate");
  Tape& t = *parts.front().tape;
  const Index rows = parts.front().value().rows();
  Index cols = 0;
  std::vector<std::size_t> ids;
  ids.reserve(parts.size());
  for (const Var& p : parts) {
    tape_of(parts.front(), p);
    if (p.value().rank() != 2 || p.value().rows() != rows)
      throw ShapeError("concat_cols: row count mismatch " + p.value().shape_string());
    cols += p.value().cols();
    ids.push_back(p.id);
  }
  Tensor out({rows, cols});
  Index at = 0;
  for (const Var& p : parts) {
    out.matrix().middleCols(at, p.value().cols()) = p.value().matrix();
    at += p.value().cols();
  }
  return t.record(OpId::kConcatCols, std::move(ids), std::move(out), [](Tape& tp, std::size_t self) {
    const auto g = tp.out_grad(self);
    Index at = 0;
    for (std::size_t k : tp.inputs(self)) {
      const Index c = tp.value(k).cols();
      if (tp.needs_grad(k)) tp.grad(k) += g.middleCols(at, c);
      at += c;
    }
  });
}

Var broadcast_cols(Var v, Index count) {
  const Tensor& vv = v.value();
  if (vv.rank() != 1) throw ShapeError("broadcast_cols: operand must be rank 1");
  Tensor out({vv.size(), count});
  out.matrix() = vv.flat().replicate(1, count);
  return v.tape->record(OpId::kBroadcastCols, {v.id}, std::move(out), [](Tape& tp, std::size_t self) {
    tp.grad(tp.inputs(self)[0]) += tp.out_grad(self).rowwise().sum();
  });
}

Var solve(Var m, Var rhs) {
  Tape& t = tape_of(m, rhs);
  const Tensor& mv = m.value();
  const Tensor& rv = rhs.value();
  if (mv.rank() != 2 || mv.rows() != mv.cols() || rv.rows() != mv.rows())
    throw ShapeError("solve: " + mv.shape_string() + " \\ " + rv.shape_string());
  const Eigen::MatrixXd dense = mv.matrix();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(dense);
  Tensor out(rv.shape());
  out.matrix() = lu.solve(Eigen::MatrixXd(rv.matrix()));
  return t.record(OpId::kSolve, {m.id, rhs.id}, std::move(out), [](Tape& tp, std::size_t self) {
    const auto& in = tp.inputs(self);
    const Eigen::MatrixXd mt = tp.value(in[0]).matrix().transpose();
    const Eigen::MatrixXd g = tp.out_grad(self);
    const Eigen::MatrixXd grhs = Eigen::PartialPivLU<Eigen::MatrixXd>(mt).solve(g);
    if (tp.needs_grad(in[1])) tp.grad(in[1]) += grhs;
    if (tp.needs_grad(in[0]))
      tp.grad(in[0]).noalias() -= grhs * tp.value(self).matrix().transpose();
  });
}

}  // namespace nsslab::grad
