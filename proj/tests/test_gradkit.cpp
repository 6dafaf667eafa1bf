#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "nsslab/errors.hpp"
#include "nsslab/grad/adam.hpp"
#include "nsslab/grad/gradcheck.hpp"
#include "nsslab/grad/ops.hpp"
#include "nsslab/random.hpp"

using namespace nsslab;
using namespace nsslab::grad;

namespace {

Tensor conv_kernel(Index co, Index ci, Index tau, std::initializer_list<double> values) {
  Tensor k({co, ci, tau});
  Index i = 0;
  for (double v : values) k.flat()[i++] = v;
  return k;
}

Eigen::MatrixXd run_conv(const Eigen::MatrixXd& x, Tensor kernel, Tensor bias, Conv1dOptions opts = {}) {
  Tape tape;
  Var y = conv1d_causal(tape.constant(Tensor::from_matrix(x)), tape.constant(std::move(kernel)),
                        tape.constant(std::move(bias)), opts);
  return y.value().to_matrix();
}

}  // namespace

TEST(Tensor, ShapeAndGradAccumulator) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24);
  EXPECT_EQ(t.rows(), 2);
  EXPECT_EQ(t.cols(), 12);
  EXPECT_FALSE(t.has_grad());
  t.grad();
  EXPECT_TRUE(t.has_grad());
  EXPECT_EQ(t.grad().size(), t.size());
  EXPECT_EQ(t.grad().squaredNorm(), 0.0);
}

TEST(Conv1dCausal, ZeroKernelGivesZeros) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 7);
  const Eigen::MatrixXd y = run_conv(x, Tensor({3, 2, 4}), Tensor({3}));
  EXPECT_EQ(y.rows(), 3);
  EXPECT_EQ(y.cols(), 7);
  EXPECT_EQ(y.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Conv1dCausal, DeltaKernelIsIdentity) {
  Eigen::MatrixXd x(1, 5);
  x << 0.3, -1.0, 2.5, 4.0, -0.25;
  EXPECT_EQ(run_conv(x, conv_kernel(1, 1, 1, {1.0}), Tensor({1})), x);
}

TEST(Conv1dCausal, MovingSumWithZeroLeftPad) {
  Eigen::MatrixXd x(1, 3);
  x << 1, 2, 3;
  Eigen::MatrixXd expected(1, 3);
  expected << 1, 3, 5;
  EXPECT_EQ(run_conv(x, conv_kernel(1, 1, 2, {1.0, 1.0}), Tensor({1})), expected);
}

TEST(Conv1dCausal, ReplicateFirstPadding) {
  Eigen::MatrixXd x(1, 3);
  x << 1, 2, 3;
  Conv1dOptions opts;
  opts.padding = Padding::kReplicateFirst;
  Eigen::MatrixXd expected(1, 3);
  expected << 3, 4, 6;  // pad [1, 1] then sums over a window of 3
  EXPECT_EQ(run_conv(x, conv_kernel(1, 1, 3, {1.0, 1.0, 1.0}), Tensor({1}), opts), expected);
}

TEST(Conv1dCausal, ChannelMismatchIsShapeError) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 4);
  EXPECT_THROW(run_conv(x, Tensor({1, 2, 2}), Tensor({1})), ShapeError);
}

TEST(Conv1dCausal, KernelLongerThanMaximumIsConfigError) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(1, 4);
  EXPECT_THROW(run_conv(x, Tensor({1, 1, 1025}), Tensor({1})), ConfigError);
  Conv1dOptions opts;
  opts.max_kernel = 3;
  EXPECT_THROW(run_conv(x, Tensor({1, 1, 4}), Tensor({1}), opts), ConfigError);
}

TEST(Conv1dCausal, CausalityExhaustive) {
  Rng rng(7);
  for (Index L = 1; L <= 16; ++L) {
    for (Index tau : {1, 2, 3, 5}) {
      for (Padding pad : {Padding::kZero, Padding::kReplicateFirst}) {
        Conv1dOptions opts;
        opts.padding = pad;
        Tensor kernel({2, 2, tau});
        kernel.flat() = rng.uniform_matrix(kernel.size(), 1, -1, 1);
        Tensor bias = Tensor::from_vector(rng.uniform_matrix(2, 1, -1, 1));
        const Eigen::MatrixXd x = rng.uniform_matrix(2, L, -1, 1);
        const Eigen::MatrixXd full = run_conv(x, kernel, bias, opts);
        for (Index k = 0; k < L; ++k) {
          Eigen::MatrixXd cut = x;
          cut.rightCols(L - k - 1).setZero();
          const Eigen::MatrixXd part = run_conv(cut, kernel, bias, opts);
          EXPECT_EQ(part.col(k), full.col(k)) << "L=" << L << " tau=" << tau << " k=" << k;
        }
      }
    }
  }
}

TEST(Conv1dCausal, BatchedMatchesPerSequence) {
  Rng rng(3);
  const Index L = 6, batch = 3;
  Tensor kernel({2, 2, 3});
  kernel.flat() = rng.uniform_matrix(kernel.size(), 1, -1, 1);
  Tensor bias = Tensor::from_vector(rng.uniform_matrix(2, 1, -1, 1));
  Eigen::MatrixXd seqs[batch];
  Eigen::MatrixXd packed(2, L * batch);
  for (Index b = 0; b < batch; ++b) {
    seqs[b] = rng.uniform_matrix(2, L, -1, 1);
    for (Index k = 0; k < L; ++k) packed.col(k * batch + b) = seqs[b].col(k);
  }
  Conv1dOptions opts;
  opts.batch = batch;
  const Eigen::MatrixXd y = run_conv(packed, kernel, bias, opts);
  for (Index b = 0; b < batch; ++b) {
    const Eigen::MatrixXd single = run_conv(seqs[b], kernel, bias);
    for (Index k = 0; k < L; ++k) EXPECT_EQ(y.col(k * batch + b), single.col(k));
  }
}

TEST(Backward, NonScalarLossIsContractError) {
  Tensor w = Tensor::from_vector(Eigen::VectorXd::Ones(3));
  w.set_requires_grad(true);
  Tape tape;
  Var v = sigmoid(tape.leaf(w));
  EXPECT_THROW(backward(tape, v), ContractError);
}

TEST(Backward, UnusedParameterHasZeroGrad) {
  Tensor w = Tensor::from_vector(Eigen::VectorXd::Constant(3, 2.0));
  Tensor unused = Tensor::from_vector(Eigen::VectorXd::Constant(2, 5.0));
  w.set_requires_grad(true);
  unused.set_requires_grad(true);
  Tape tape;
  tape.leaf(unused);
  Var loss = mse(tape.leaf(w), tape.constant(Tensor({3})));
  zero_grads({&w, &unused});
  backward(tape, loss);
  EXPECT_EQ(unused.grad().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, LinearMapGradientIsInputExactly) {
  Eigen::MatrixXd u(3, 1);
  u << 0.5, -2.0, 7.25;
  Tensor w = Tensor::from_matrix(Eigen::MatrixXd::Constant(1, 3, 0.1));
  w.set_requires_grad(true);
  Tape tape;
  Var loss = matmul(tape.leaf(w), tape.constant(Tensor::from_matrix(u)));
  zero_grads({&w});
  backward(tape, loss);
  EXPECT_EQ(Eigen::MatrixXd(w.grad().transpose()), u);
}

TEST(Backward, AccumulatesUntilZeroed) {
  Tensor w = Tensor::from_vector(Eigen::VectorXd::Constant(2, 1.5));
  w.set_requires_grad(true);
  zero_grads({&w});
  Eigen::VectorXd once;
  for (int rep = 0; rep < 2; ++rep) {
    Tape tape;
    Var loss = mse(tape.leaf(w), tape.constant(Tensor({2})));
    backward(tape, loss);
    if (rep == 0) once = w.grad_flat();
  }
  EXPECT_EQ(Eigen::VectorXd(w.grad_flat()), Eigen::VectorXd(2.0 * once));
  zero_grads({&w});
  EXPECT_EQ(w.grad_flat().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, NonFiniteGradientNamesTheOp) {
  Tensor a = Tensor::from_vector(Eigen::VectorXd::Ones(2));
  a.set_requires_grad(true);
  Tape tape;
  Var denom = tape.constant(Tensor({2}));  // zeros
  Var loss = mse(div(tape.leaf(a), denom), tape.constant(Tensor({2})));
  try {
    backward(tape, loss);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_FALSE(e.op().empty());
  }
}

TEST(Backward, ThreeLayerCompositeMatchesFiniteDifferences) {
  Rng rng(11);
  Tensor w1 = Tensor::from_matrix(rng.uniform_matrix(5, 4, -1, 1));
  Tensor w2 = Tensor::from_matrix(rng.uniform_matrix(5, 5, -1, 1));
  Tensor w3 = Tensor::from_matrix(rng.uniform_matrix(2, 5, -1, 1));
  const Tensor x = Tensor::from_matrix(rng.uniform_matrix(4, 6, -1, 1));
  const Tensor y = Tensor::from_matrix(rng.uniform_matrix(2, 6, -1, 1));
  std::vector<Tensor*> params{&w1, &w2, &w3};
  for (Tensor* p : params) p->set_requires_grad(true);
  auto build = [&](Tape& t) {
    Var h = gelu(matmul(t.leaf(w1), t.constant(x)));
    h = sigmoid(matmul(t.leaf(w2), h));
    return mse(matmul(t.leaf(w3), h), t.constant(y));
  };
  EXPECT_LT(check_gradient(build, params, 1e-5).max_rel_error, 1e-4);
}

TEST(Backward, ReplayIsBitIdentical) {
  auto grads = [] {
    Rng rng(5);
    Tensor w = Tensor::from_matrix(rng.uniform_matrix(3, 3, -1, 1));
    Tensor k({3, 3, 2});
    k.flat() = rng.uniform_matrix(18, 1, -1, 1);
    w.set_requires_grad(true);
    k.set_requires_grad(true);
    const Tensor x = Tensor::from_matrix(rng.uniform_matrix(3, 8, -1, 1));
    Tape tape;
    Var c = conv1d_causal(tape.constant(x), tape.leaf(k), tape.constant(Tensor({3})));
    Var loss = mse(matmul(tape.leaf(w), sigmoid(c)), tape.constant(Tensor({3, 8})));
    zero_grads({&w, &k});
    backward(tape, loss);
    return std::make_pair(Eigen::VectorXd(w.grad_flat()), Eigen::VectorXd(k.grad_flat()));
  };
  const auto a = grads();
  const auto b = grads();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Gradcheck, EveryPrimitivePasses) {
  const auto checks = run_primitive_suite();
  EXPECT_GE(checks.size(), 15u);
  for (const auto& c : checks) {
    EXPECT_TRUE(c.passed) << c.name << " rel err " << c.max_rel_error;
    EXPECT_EQ(c.instances, 100) << c.name;
  }
}

TEST(Gradcheck, CorruptedGradientIsDetected) {
  GradcheckOptions opts;
  opts.instances = 3;
  opts.corrupt = "sigmoid";
  for (const auto& c : run_primitive_suite(opts)) EXPECT_EQ(c.passed, c.name != "sigmoid") << c.name;
}

TEST(Adam, ZeroGradientLeavesParametersAndCountsStep) {
  Tensor w = Tensor::from_vector(Eigen::VectorXd::LinSpaced(4, -1, 2));
  w.set_requires_grad(true);
  const Eigen::VectorXd before = w.flat();
  AdamState st(AdamConfig{}, {&w});
  zero_grads({&w});
  adam_step(st, {&w});
  EXPECT_EQ(w.flat(), before);
  EXPECT_EQ(st.t, 1);
}

TEST(Adam, FirstStepOnSquareMovesByLearningRate) {
  Tensor w = Tensor::from_vector(Eigen::VectorXd::Ones(1));
  w.set_requires_grad(true);
  AdamConfig cfg;
  cfg.lr = 0.1;
  AdamState st(cfg, {&w});
  zero_grads({&w});
  w.grad_flat()[0] = 2.0;  // d(w^2)/dw at w = 1
  adam_step(st, {&w});
  // m_hat = g, v_hat = g^2: step = lr * g / (|g| + eps)
  EXPECT_NEAR(w.flat()[0], 1.0 - 0.1 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_NEAR(w.flat()[0], 0.9, 1e-8);
  EXPECT_GE(st.v[0].minCoeff(), 0.0);
}

TEST(Adam, ConvergesOnShiftedQuadratic) {
  Tensor w = Tensor::from_vector(Eigen::VectorXd::Zero(1));
  w.set_requires_grad(true);
  AdamConfig cfg;
  cfg.lr = 0.1;
  AdamState st(cfg, {&w});
  for (int i = 0; i < 200; ++i) {
    Tape tape;
    Var loss = mse(tape.leaf(w), tape.constant(Tensor::from_vector(Eigen::VectorXd::Constant(1, 3.0))));
    zero_grads({&w});
    backward(tape, loss);
    adam_step(st, {&w});
    EXPECT_EQ(st.t, i + 1);
  }
  EXPECT_LT(std::abs(w.flat()[0] - 3.0), 1e-2);
}

TEST(Adam, DecoupledDecayPrecedesMomentUpdate) {
  Tensor w = Tensor::from_vector(Eigen::VectorXd::Constant(2, 4.0));
  w.set_requires_grad(true);
  AdamConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.5;
  AdamState st(cfg, {&w});
  zero_grads({&w});
  adam_step(st, {&w});
  EXPECT_DOUBLE_EQ(w.flat()[0], 4.0 * (1.0 - 0.01 * 0.5));
}

TEST(Adam, ShapeMismatchIsContractError) {
  Tensor a = Tensor::from_vector(Eigen::VectorXd::Ones(2));
  Tensor b = Tensor::from_vector(Eigen::VectorXd::Ones(3));
  a.set_requires_grad(true);
  AdamState st(AdamConfig{}, {&a});
  EXPECT_THROW(adam_step(st, {&b}), ContractError);
  EXPECT_THROW(adam_step(st, {&a, &b}), ContractError);
  AdamConfig bad;
  bad.lr = 0.0;
  EXPECT_THROW(AdamState(bad, {&a}), ContractError);
}
