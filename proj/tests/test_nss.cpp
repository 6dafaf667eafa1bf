#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "nsslab/errors.hpp"
#include "nsslab/nss/evaluate.hpp"
#include "nsslab/nss/model.hpp"
#include "nsslab/nss/report.hpp"
#include "nsslab/nss/sine_task.hpp"
#include "nsslab/nss/train.hpp"
#include "nsslab/random.hpp"
#include "nsslab/ssm/scan.hpp"
#include "nsslab/ssm/spectral.hpp"

using namespace nsslab;
using namespace nsslab::nss;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd row(const VectorXd& v) { return v.transpose(); }

ModelConfig sine_config() { return ModelConfig{}; }

std::vector<double> flat_parameters(const SequenceModel& m) {
  std::vector<double> out;
  for (const grad::Tensor* p : m.parameters())
    out.insert(out.end(), p->flat().data(), p->flat().data() + p->size());
  return out;
}

ssm::DiscreteSSM<double> normal_model(Rng& rng, Eigen::Index n, Eigen::Index m, double max_abs_eig) {
  MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = rng.uniform(-1, 1);
  const MatrixXd q = Eigen::HouseholderQR<MatrixXd>(g).householderQ();
  VectorXd lambda(n);
  for (Eigen::Index i = 0; i < n; ++i) lambda[i] = rng.uniform(-max_abs_eig, max_abs_eig);
  ssm::DiscreteSSM<double> d;
  d.Abar = q * lambda.asDiagonal() * q.transpose();
  d.Bbar = MatrixXd::NullaryExpr(n, m, [&] { return rng.uniform(-1, 1); });
  d.Cbar = MatrixXd::NullaryExpr(m, n, [&] { return rng.uniform(-1, 1); });
  return d;
}

double op_norm(const MatrixXd& a) { return Eigen::JacobiSVD<MatrixXd>(a).singularValues()(0); }

ssm::DiscreteSSM<double> scalar(double a) {
  ssm::DiscreteSSM<double> d;
  d.Abar = MatrixXd::Constant(1, 1, a);
  d.Bbar = MatrixXd::Constant(1, 1, 1.0);
  d.Cbar = MatrixXd::Constant(1, 1, 1.0);
  return d;
}

}  // namespace

TEST(SineTask, Values) {
  const auto task = make_sine_task();
  ASSERT_EQ(task.values.size(), 100);
  EXPECT_EQ(task.values[0], 0.0);
  EXPECT_NEAR(task.times[10], 0.1, 1e-15);
  EXPECT_NEAR(task.values[10], 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(task.width, 0.01);
  EXPECT_NEAR(task.times[99], 0.99, 1e-15);
  EXPECT_THROW(make_sine_task(1), ContractError);
}

TEST(PerturbGrid, ZeroJitterIsIdentity) {
  const auto task = make_sine_task();
  const auto p = perturb_sine(task, 0.0, 7);
  EXPECT_TRUE(p.values == task.values);
  EXPECT_TRUE(p.times == task.times);
}

TEST(PerturbGrid, StrictlyIncreasingSweep) {
  const auto task = make_sine_task();
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto p = perturb_sine(task, 0.01, seed);
    for (Eigen::Index i = 1; i < p.times.size(); ++i) ASSERT_GT(p.times[i], p.times[i - 1]) << seed;
    ASSERT_GE(p.times[0], 0.0);
    ASSERT_LT(p.times[99], 1.0);
    ASSERT_LT(p.offsets.cwiseAbs().maxCoeff(), 0.005);
  }
}

TEST(PerturbGrid, LipschitzBound) {
  const auto task = make_sine_task();
  const auto p = perturb_sine(task, 0.01, 0);
  const double lipschitz = 5.0 * std::numbers::pi;
  EXPECT_LE((p.values - task.values).cwiseAbs().maxCoeff(), lipschitz * 0.01 / 2.0 + 1e-12);
  EXPECT_GT((p.values - task.values).cwiseAbs().maxCoeff(), 0.0);
}

TEST(PerturbGrid, RejectsOversizedJitter) {
  const auto task = make_sine_task();
  EXPECT_THROW(perturb_sine(task, 0.02, 0), ContractError);
  EXPECT_THROW(perturb_sine(task, -0.001, 0), ContractError);
}

TEST(Model, ParameterCountsByHand) {
  ModelConfig c = sine_config();
  // W_in 1, b_in 1, A 16*16, B 16, C 16, log_dt 1, W_out 1, b_out 1
  const Eigen::Index base = 1 + 1 + 256 + 16 + 16 + 1 + 1 + 1;
  EXPECT_EQ(SequenceModel::build(c, 0).parameter_count(), base);
  EXPECT_EQ(expected_parameter_count(c), base);
  c.smr.enabled = true;
  EXPECT_EQ(SequenceModel::build(c, 0).parameter_count(), base + 4 + 1);
  c.smr.use_linear = true;
  EXPECT_EQ(SequenceModel::build(c, 0).parameter_count(), base + 4 + 1 + 1 + 1);
  c = sine_config();
  c.form = ssm::ParamForm::kDiagonal;
  EXPECT_EQ(SequenceModel::build(c, 0).parameter_count(), base - 256 + 16);

  ModelConfig wide;
  wide.layers = 3;
  wide.state_size = 8;
  wide.channels = 4;
  wide.in_channels = 2;
  wide.out_channels = 3;
  wide.smr.enabled = true;
  wide.smr.tau = 5;
  const Eigen::Index per_layer = 64 + 8 * 4 + 4 * 8 + 1 + 4 * 4 * 5 + 4;
  const Eigen::Index projections = 4 * 2 + 4 + 3 * 4 + 3;
  EXPECT_EQ(SequenceModel::build(wide, 3).parameter_count(), 3 * per_layer + projections);
  EXPECT_EQ(expected_parameter_count(wide), 3 * per_layer + projections);
}

TEST(Model, ConfigValidation) {
  ModelConfig c;
  c.layers = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig{};
  c.state_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig{};
  c.dt_min = 0.2;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Model, SeededDeterminism) {
  ModelConfig c = sine_config();
  c.smr.enabled = true;
  EXPECT_EQ(flat_parameters(SequenceModel::build(c, 42)), flat_parameters(SequenceModel::build(c, 42)));
  EXPECT_NE(flat_parameters(SequenceModel::build(c, 42)), flat_parameters(SequenceModel::build(c, 43)));
}

TEST(Model, SmrToggleKeepsSsmInit) {
  ModelConfig off = sine_config();
  ModelConfig on = off;
  on.smr.enabled = true;
  const auto a = SequenceModel::build(off, 5);
  const auto b = SequenceModel::build(on, 5);
  EXPECT_TRUE(a.layers()[0].A.flat() == b.layers()[0].A.flat());
  EXPECT_TRUE(a.layers()[0].log_dt.flat() == b.layers()[0].log_dt.flat());
}

TEST(Model, ForwardMatchesReferenceScan) {
  ModelConfig c = sine_config();
  c.nonlinearity = Nonlinearity::kNone;
  auto model = SequenceModel::build(c, 9);
  const auto task = make_sine_task();
  const MatrixXd u = row(task.values);
  grad::Tape tape;
  const auto out = model.forward(tape, u);
  // reference: input affine, ssm_scan with residual, output affine
  const auto& p = model.parameters();
  const double w_in = p[0]->flat()[0];
  const double b_in = p[1]->flat()[0];
  const double w_out = p[p.size() - 2]->flat()[0];
  const double b_out = p[p.size() - 1]->flat()[0];
  const MatrixXd v = (w_in * u).array() + b_in;
  const auto scan = ssm::ssm_scan(model.discrete_layer(0), v);
  const MatrixXd y = (w_out * scan.y).array() + b_out;
  EXPECT_LT((out.y.value().to_matrix() - y).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((out.states[0].value().to_matrix() - scan.trace.states).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Model, NeutralSmrEqualsHalfInput) {
  ModelConfig off = sine_config();
  ModelConfig on = off;
  on.smr.enabled = true;
  auto a = SequenceModel::build(off, 11);
  auto b = SequenceModel::build(on, 11);
  b.layers()[0].smr_kernel.flat().setZero();
  b.layers()[0].smr_bias.flat().setZero();
  const MatrixXd u = row(make_sine_task().values);
  grad::Tape ta;
  grad::Tape tb;
  const MatrixXd ya = a.forward(ta, 0.5 * u).y.value().to_matrix();
  const MatrixXd yb = b.forward(tb, u).y.value().to_matrix();
  EXPECT_TRUE(ya == yb);
}

TEST(Model, CheckpointRoundTrip) {
  ModelConfig c = sine_config();
  c.layers = 2;
  c.smr.enabled = true;
  c.smr.use_linear = true;
  const auto a = SequenceModel::build(c, 12);
  const auto b = SequenceModel::from_checkpoint(c, a.to_checkpoint());
  const auto pa = flat_parameters(a);
  const auto pb = flat_parameters(b);
  ASSERT_EQ(pa.size(), pb.size());
  // log_dt round-trips through exp/log
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_NEAR(pa[i], pb[i], 1e-14);
}

TEST(Train, ZeroEpochsLeavesModelUnchanged) {
  auto model = SequenceModel::build(sine_config(), 3);
  const auto before = flat_parameters(model);
  TrainConfig t;
  t.epochs = 0;
  const auto r = train_model(model, make_pair(row(make_sine_task().values), Objective::kNextStep), t);
  EXPECT_TRUE(r.loss.empty());
  EXPECT_EQ(flat_parameters(model), before);
}

TEST(Train, PairShapes) {
  const MatrixXd v = row(make_sine_task().values);
  const auto next = make_pair(v, Objective::kNextStep);
  EXPECT_EQ(next.input.cols(), 99);
  EXPECT_EQ(next.target(0, 0), v(0, 1));
  const auto rec = make_pair(v, Objective::kReconstruction);
  EXPECT_TRUE(rec.input == rec.target);
}

TEST(Train, ReferenceRunGoldenAndSmoothedDecrease) {
  auto model = SequenceModel::build(sine_config(), 0);
  TrainConfig t;
  const auto pair = make_pair(row(make_sine_task().values), Objective::kNextStep);
  const auto r = train_model(model, pair, t);
  ASSERT_EQ(r.loss.size(), 2000u);
  EXPECT_FALSE(r.diverged_epoch.has_value());
  const double clean = evaluate_pair(model, pair).mse;
  EXPECT_LT(clean, 1e-5);
  const auto smooth = moving_average(r.loss, 50);
  ASSERT_EQ(smooth.size(), 1951u);
  for (std::size_t i = 1; i < smooth.size(); ++i) EXPECT_LE(smooth[i], smooth[i - 1]) << "window " << i;
}

TEST(Train, FullExperimentIsDeterministic) {
  auto run = [] {
    auto model = SequenceModel::build(sine_config(), 1);
    TrainConfig t;
    t.epochs = 200;
    const auto task = make_sine_task();
    const auto clean = make_pair(row(task.values), Objective::kNextStep);
    const auto pert = make_pair(row(perturb_sine(task, 0.01, 2).values), Objective::kNextStep);
    const auto r = train_model(model, clean, t);
    const auto rep = evaluate_perturbed(model, clean, pert);
    return std::make_tuple(r.loss, rep.clean_mse, rep.perturbed_mse, std::vector<double>(rep.states_perturbed.data(), rep.states_perturbed.data() + rep.states_perturbed.size()));
  };
  EXPECT_TRUE(run() == run());
}

TEST(Evaluate, IdenticalInputsGiveIdenticalReport) {
  auto model = SequenceModel::build(sine_config(), 2);
  const auto pair = make_pair(row(make_sine_task().values), Objective::kNextStep);
  const auto rep = evaluate_perturbed(model, pair, pair);
  EXPECT_EQ(rep.clean_mse, rep.perturbed_mse);
  EXPECT_TRUE(rep.states_clean == rep.states_perturbed);
  EXPECT_EQ(rep.states_clean.size(), 99);
  EXPECT_FALSE(rep.divergence);
  EXPECT_GE(rep.clean_mse, 0.0);
}

TEST(Evaluate, UntrainedContractiveModelsNeverDiverge) {
  ModelConfig c = sine_config();
  c.dt_min = 0.5;
  c.dt_max = 1.0;
  const auto task = make_sine_task();
  const auto clean = make_pair(row(task.values), Objective::kNextStep);
  Rng rng(99);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto model = SequenceModel::build(c, seed);
    ASSERT_LT(ssm::spectral_radius(model.discrete_layer(0)).value, 0.9) << seed;
    const double delta = rng.uniform(0.0, task.width);
    const auto pert = make_pair(row(perturb_sine(task, delta, seed).values), Objective::kNextStep);
    EXPECT_FALSE(evaluate_perturbed(model, clean, pert).divergence) << seed;
  }
}

TEST(Evaluate, DivergenceFlagOnHugeStates) {
  auto model = SequenceModel::build(sine_config(), 4);
  auto& A = model.layers()[0].A;
  A.flat().setZero();
  for (Eigen::Index i = 0; i < 16; ++i) A.flat()[i * 16 + i] = 150.0;
  model.layers()[0].log_dt.flat()[0] = std::log(0.02);
  const auto pair = make_pair(MatrixXd::Ones(1, 100), Objective::kReconstruction);
  const auto rep = evaluate_perturbed(model, pair, pair);
  EXPECT_TRUE(rep.divergence);
}

TEST(AccumulationBound, NoNoiseNoError) {
  Rng rng(1);
  const auto d = normal_model(rng, 4, 1, 0.9);
  const MatrixXd u = MatrixXd::NullaryExpr(1, 50, [&] { return rng.uniform(-1, 1); });
  const auto r = prop1_bound_check(d, u, MatrixXd::Zero(1, 50), {1.0, op_norm(d.Bbar), op_norm(d.Cbar)});
  EXPECT_EQ(r.error.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.bound.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(r.holds);
}

TEST(AccumulationBound, ScalarImpulseIsTight) {
  MatrixXd eps = MatrixXd::Zero(1, 10);
  eps(0, 0) = 0.3;
  const auto r = prop1_bound_check(scalar(0.5), MatrixXd::Zero(1, 10), eps, {1.0, 1.0, 1.0});
  for (Eigen::Index t = 0; t < 10; ++t) {
    EXPECT_NEAR(r.error[t], std::pow(0.5, static_cast<double>(t)) * 0.3, 1e-15);
    EXPECT_NEAR(r.bound[t], r.error[t], 1e-15);
  }
  EXPECT_TRUE(r.holds);
}

TEST(AccumulationBound, UnstableAccumulation) {
  const auto r = prop1_bound_check(scalar(1.05), MatrixXd::Zero(1, 200), MatrixXd::Constant(1, 200, 0.01),
                                   {1.0, 1.0, 1.0});
  EXPECT_GT(r.error[199], 10.0 * r.error[19]);
  for (Eigen::Index t = 1; t < 200; ++t) EXPECT_GT(r.error[t], r.error[t - 1]);
  EXPECT_TRUE(r.holds);
  EXPECT_NEAR(r.spectral_radius, 1.05, 1e-12);
}

TEST(AccumulationBound, BoundDominatesSeeded) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 1 + trial % 8;
    const Eigen::Index m = 1 + trial % 3;
    const auto d = normal_model(rng, n, m, trial % 5 == 0 ? 1.02 : 0.95);
    const Eigen::Index steps = 20 + trial;
    const MatrixXd u = MatrixXd::NullaryExpr(m, steps, [&] { return rng.uniform(-1, 1); });
    const MatrixXd eps = MatrixXd::NullaryExpr(m, steps, [&] { return rng.uniform(-0.05, 0.05); });
    const auto r = prop1_bound_check(d, u, eps, {1.0, op_norm(d.Bbar), op_norm(d.Cbar)});
    EXPECT_TRUE(r.holds) << "trial " << trial << " excess " << r.max_excess;
    EXPECT_LE(r.max_excess, 1e-9);
  }
}

TEST(AccumulationBound, RejectsNonBoundingInputs) {
  Rng rng(3);
  const auto d = normal_model(rng, 3, 1, 0.9);
  const MatrixXd u = MatrixXd::Constant(1, 10, 0.5);
  const MatrixXd eps = MatrixXd::Constant(1, 10, 0.01);
  const double b = op_norm(d.Bbar);
  const double c = op_norm(d.Cbar);
  EXPECT_THROW(prop1_bound_check(d, u, eps, {0.4, b, c}), ContractError);
  EXPECT_THROW(prop1_bound_check(d, u, eps, {1.0, 0.5 * b, c}), ContractError);
  EXPECT_THROW(prop1_bound_check(d, u, eps, {1.0, b, 0.5 * c}), ContractError);
  auto skew = d;
  skew.Abar = (MatrixXd(3, 3) << 0.5, 10, 0, 0, 0.5, 0, 0, 0, 0.1).finished();
  EXPECT_THROW(prop1_bound_check(skew, u, eps, {1.0, b, c}), ContractError);
}

TEST(MemoryDecay, FirstInputFades) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = normal_model(rng, 6, 1, 0.95);
    const double rho = ssm::spectral_radius(d.Abar).value;
    ASSERT_LT(rho, 1.0);
    const auto steps = static_cast<Eigen::Index>(std::ceil(std::log(1e-6) / std::log(rho))) + 2;
    MatrixXd u = MatrixXd::Zero(1, steps);
    u(0, 0) = 1.0;
    const auto r = ssm::ssm_scan(d, u);
    const double initial = r.trace.states.col(0).norm();
    EXPECT_LT(r.trace.states.col(steps - 1).norm(), 1e-6 * initial) << trial;
  }
}

TEST(Report, JsonKeysAndLossCsv) {
  NSSReport rep;
  rep.clean_mse = 1e-4;
  rep.perturbed_mse = 2e-3;
  rep.states_clean = VectorXd::Ones(3);
  rep.states_perturbed = VectorXd::Ones(3);
  rep.peak_state = std::numeric_limits<double>::infinity();
  const auto j = report_json(rep);
  for (const char* key : {"clean_mse", "perturbed_mse", "mse_ratio", "peak_state", "divergence_flag", "sequence_length"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_NEAR(j["mse_ratio"].get<double>(), 20.0, 1e-12);
  EXPECT_EQ(j["peak_state"].get<std::string>(), "inf");

  const auto path = std::filesystem::temp_directory_path() / "nsslab_loss.csv";
  write_loss_csv(path, {});
  std::ifstream is(path);
  std::string content((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  EXPECT_EQ(content, "epoch,loss\n");
  std::filesystem::remove(path);
}
