#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "nsslab/errors.hpp"
#include "nsslab/pendulum/dataset.hpp"
#include "nsslab/pendulum/regression.hpp"
#include "nsslab/pendulum/render.hpp"
#include "nsslab/pendulum/simulate.hpp"
#include "nsslab/random.hpp"

using namespace nsslab;
using namespace nsslab::pendulum;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

PendulumConfig small_config() {
  PendulumConfig c;
  c.length = 12;
  c.side = 8;
  c.train_size = 6;
  c.test_size = 4;
  c.seed = 17;
  return c;
}

VectorXd linspace(double lo, double hi, Index n) { return VectorXd::LinSpaced(n, lo, hi); }

}  // namespace

TEST(Dynamics, EquilibriumStaysPut) {
  const VectorXd th = simulate_angles(0.0, 0.0, Dynamics{}, linspace(0, 100, 50));
  EXPECT_EQ(th.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Dynamics, UndampedEnergyConserved) {
  Rng rng(5);
  Dynamics dyn;
  dyn.damping = 0.0;
  const VectorXd times = linspace(0, 100, 101);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double th0 = rng.uniform_open(-std::numbers::pi, std::numbers::pi);
    const double om0 = rng.uniform_open(-0.5, 0.5);
    const double e0 = energy(th0, om0, dyn.g_over_l);
    const MatrixXd ph = simulate_phase(th0, om0, dyn, times);
    for (Index k = 0; k < ph.rows(); ++k) worst = std::max(worst, std::abs(energy(ph(k, 0), ph(k, 1), 1.0) - e0));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Dynamics, SmallAngleOracle) {
  Dynamics dyn;
  dyn.damping = 0.0;
  const VectorXd times = linspace(0, 2 * std::numbers::pi, 200);
  const VectorXd th = simulate_angles(0.01, 0.0, dyn, times);
  for (Index k = 0; k < times.size(); ++k) EXPECT_NEAR(th[k], 0.01 * std::cos(times[k]), 1e-5);
}

TEST(Dynamics, DampingDissipates) {
  const MatrixXd ph = simulate_phase(1.0, 0.0, Dynamics{}, linspace(0, 50, 11));
  for (Index k = 1; k < ph.rows(); ++k)
    EXPECT_LT(energy(ph(k, 0), ph(k, 1), 1.0), energy(ph(k - 1, 0), ph(k - 1, 1), 1.0));
}

TEST(Dynamics, RejectsUnsortedTimes) {
  VectorXd t(2);
  t << 1.0, 0.5;
  EXPECT_THROW(simulate_angles(0.1, 0.0, Dynamics{}, t), ContractError);
}

TEST(Render, HangingDownIsCentered) {
  const VectorXd f = render_frame(0.0);
  ASSERT_EQ(f.size(), 576);
  Index best = 0;
  double best_sum = -1.0;
  for (Index col = 0; col < 24; ++col) {
    double s = 0.0;
    for (Index r = 12; r < 24; ++r) s += f[r * 24 + col];
    if (s > best_sum + 1e-12) {
      best_sum = s;
      best = col;
    }
  }
  EXPECT_TRUE(best == 11 || best == 12) << best;
  double top = 0.0;
  double bottom = 0.0;
  for (Index r = 0; r < 24; ++r)
    for (Index col = 0; col < 24; ++col) (r < 12 ? top : bottom) += f[r * 24 + col];
  EXPECT_GT(bottom, 5.0 * top);
}

TEST(Render, MirrorSymmetry) {
  for (double th : {0.3, 1.2, 2.5, -0.7, 3.0}) {
    const VectorXd a = render_frame(th);
    const VectorXd b = render_frame(-th);
    for (Index r = 0; r < 24; ++r)
      for (Index c = 0; c < 24; ++c) ASSERT_EQ(a[r * 24 + c], b[r * 24 + (23 - c)]) << th;
  }
}

TEST(Render, PartialCoverageAndRange) {
  for (int i = 0; i < 64; ++i) {
    const double th = -std::numbers::pi + 2 * std::numbers::pi * i / 64.0;
    const VectorXd f = render_frame(th);
    EXPECT_GT(f.sum(), 0.0);
    EXPECT_LT(f.sum(), 576.0);
    EXPECT_GE(f.minCoeff(), 0.0);
    EXPECT_LE(f.maxCoeff(), 1.0);
  }
  EXPECT_THROW(render_frame(0.0, 3), ContractError);
}

TEST(Render, PgmHeader) {
  const std::string pgm = to_pgm(render_frame(0.4, 8), 8);
  EXPECT_EQ(pgm.substr(0, 9), "P5\n8 8\n25");
  EXPECT_EQ(pgm.size(), std::string("P5\n8 8\n255\n").size() + 64);
}

TEST(Corrupt, Probabilities) {
  const MatrixXd frames = MatrixXd::Constant(50, 16, 0.25);
  const auto none = corrupt_frames(frames, 0.0, 1);
  EXPECT_TRUE(none.frames == frames);
  for (auto m : none.mask) EXPECT_EQ(m, 0);
  const auto all = corrupt_frames(frames, 1.0, 1);
  for (auto m : all.mask) EXPECT_EQ(m, 1);
  for (Index r = 0; r < 50; ++r) EXPECT_NE(all.frames.row(r), frames.row(r));
  EXPECT_GE(all.frames.minCoeff(), 0.0);
  EXPECT_LT(all.frames.maxCoeff(), 1.0);

  const MatrixXd many = MatrixXd::Zero(10000, 2);
  const auto part = corrupt_frames(many, 0.3, 2);
  double count = 0;
  for (Index r = 0; r < 10000; ++r) {
    count += part.mask[static_cast<std::size_t>(r)];
    if (!part.mask[static_cast<std::size_t>(r)]) EXPECT_EQ(part.frames.row(r).sum(), 0.0);
  }
  EXPECT_NEAR(count / 10000.0, 0.3, 0.02);
  EXPECT_THROW(corrupt_frames(frames, 1.5, 0), ContractError);
}

TEST(Dataset, DefaultSizesAndShapes) {
  PendulumConfig c;
  c.train_size = 500;
  c.test_size = 200;
  const auto ds = generate_dataset(c);
  ASSERT_EQ(ds.train.size(), 500u);
  ASSERT_EQ(ds.test.size(), 200u);
  for (const auto* split : {&ds.train, &ds.test}) {
    for (const auto& s : *split) {
      ASSERT_EQ(s.timestamps.size(), 50);
      ASSERT_EQ(s.frames.rows(), 50);
      ASSERT_EQ(s.frames.cols(), 576);
      ASSERT_EQ(s.targets.rows(), 50);
      ASSERT_EQ(s.targets.cols(), 2);
      ASSERT_EQ(s.mask.size(), 50u);
      for (Index k = 0; k < 50; ++k) {
        ASSERT_NEAR(s.targets(k, 0) * s.targets(k, 0) + s.targets(k, 1) * s.targets(k, 1), 1.0, 1e-12);
        if (k > 0) ASSERT_GT(s.timestamps[k], s.timestamps[k - 1]);
      }
      ASSERT_GE(s.timestamps[0], 0.0);
      ASSERT_LE(s.timestamps[49], 100.0);
      ASSERT_GE(s.frames.minCoeff(), 0.0);
      ASSERT_LE(s.frames.maxCoeff(), 1.0);
    }
  }
}

TEST(Dataset, CleanFramesMatchTargets) {
  PendulumConfig c = small_config();
  c.corruption = 0.0;
  const auto ds = generate_dataset(c);
  const auto& s = ds.train[0];
  for (Index k = 0; k < c.length; ++k) {
    const double th = std::atan2(s.targets(k, 0), s.targets(k, 1));
    EXPECT_LT((s.frames.row(k).transpose() - render_frame(th, c.side)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Dataset, TrainAndTestStreamsDiffer) {
  const auto ds = generate_dataset(small_config());
  for (const auto& a : ds.train)
    for (const auto& b : ds.test) EXPECT_NE(a.timestamps, b.timestamps);
}

TEST(Dataset, ByteIdenticalAndRoundTrip) {
  const auto c = small_config();
  std::ostringstream a;
  std::ostringstream b;
  write_dataset(a, generate_dataset(c));
  write_dataset(b, generate_dataset(c));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, 8), "NSSLABPD");

  std::istringstream in(a.str());
  const auto back = read_dataset(in);
  std::ostringstream again;
  write_dataset(again, back);
  EXPECT_EQ(again.str(), a.str());

  PendulumConfig other = c;
  other.seed = 18;
  std::ostringstream d;
  write_dataset(d, generate_dataset(other));
  EXPECT_NE(d.str(), a.str());
}

TEST(Dataset, ConfigValidation) {
  PendulumConfig c;
  c.length = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = PendulumConfig{};
  c.side = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = PendulumConfig{};
  c.corruption = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Regression, MeanPredictorEqualsVariance) {
  const auto ds = generate_dataset(small_config());
  double sum[2] = {0, 0};
  double sq[2] = {0, 0};
  double n = 0;
  for (const auto& s : ds.test)
    for (Index k = 0; k < s.targets.rows(); ++k) {
      for (int c = 0; c < 2; ++c) {
        sum[c] += s.targets(k, c);
        sq[c] += s.targets(k, c) * s.targets(k, c);
      }
      n += 1;
    }
  double variance = 0.0;
  for (int c = 0; c < 2; ++c) variance += sq[c] / n - (sum[c] / n) * (sum[c] / n);
  const double per_sequence = variance * small_config().length;
  EXPECT_NEAR(mean_predictor_mse(ds.test), per_sequence, 1e-12);
}

TEST(Regression, SequenceMseMatchesDefinition) {
  const auto ds = generate_dataset(small_config());
  auto cfg = RegressionConfig::defaults(small_config().side);
  cfg.model.layers = 1;
  cfg.model.channels = 4;
  cfg.model.state_size = 4;
  auto model = nss::SequenceModel::build(cfg.model, 1);
  double total = 0.0;
  for (const auto& s : ds.test) {
    grad::Tape tape;
    const MatrixXd y = model.forward(tape, s.frames.transpose()).y.value().to_matrix();
    total += (y - s.targets.transpose()).squaredNorm();
  }
  EXPECT_NEAR(sequence_mse(model, ds.test, 3), total / static_cast<double>(ds.test.size()), 1e-9);
}

TEST(Regression, ZeroEpochParity) {
  PendulumConfig pc;
  pc.train_size = 10;
  pc.test_size = 50;
  const auto ds = generate_dataset(pc);
  auto cfg = RegressionConfig::defaults(pc.side);
  cfg.epochs = 0;
  const auto off = train_variant(ds, cfg, false);
  const auto on = train_variant(ds, cfg, true);
  EXPECT_EQ(off.best_test_mse, off.initial_test_mse);
  EXPECT_NEAR(on.initial_test_mse, off.initial_test_mse, 0.1 * off.initial_test_mse);
}

TEST(Regression, ShortTrainingReducesLoss) {
  PendulumConfig pc = small_config();
  pc.train_size = 20;
  pc.test_size = 10;
  const auto ds = generate_dataset(pc);
  auto cfg = RegressionConfig::defaults(pc.side);
  cfg.model.layers = 2;
  cfg.model.channels = 8;
  cfg.model.state_size = 8;
  cfg.adam.lr = 1e-2;
  cfg.batch = 5;
  cfg.epochs = 15;
  const auto r = run_regression(ds, cfg);
  EXPECT_EQ(r.smr_off.test_mse.size(), 15u);
  EXPECT_LT(r.smr_off.best_test_mse, r.smr_off.initial_test_mse);
  EXPECT_LT(r.smr_on.best_test_mse, r.smr_on.initial_test_mse);
  EXPECT_EQ(r.smr_improves, r.smr_on.best_test_mse < r.smr_off.best_test_mse);
  EXPECT_NEAR(r.relative_improvement, 1.0 - r.smr_on.best_test_mse / r.smr_off.best_test_mse, 1e-15);
}
