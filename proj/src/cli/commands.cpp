#include "nsslab/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "nsslab/errors.hpp"
#include "nsslab/etc/export.hpp"
#include "nsslab/io/csv.hpp"
#include "nsslab/nss/report.hpp"
#include "nsslab/nss/sine_task.hpp"
#include "nsslab/random.hpp"
#include "nsslab/ssm/spectral.hpp"

namespace nsslab::cli {

namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

json number(double v) {
  if (std::isfinite(v)) return v;
  return io::format_double(v);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

template <typename Enum>
Enum parse_choice(const std::string& where, const std::string& value,
                  std::initializer_list<std::pair<const char*, Enum>> choices) {
  for (const auto& [name, e] : choices)
    if (value == name) return e;
  std::string names;
  for (const auto& c : choices) names += std::string(names.empty() ? "" : ", ") + c.first;
  throw ConfigError("config: " + where + " must be one of {" + names + "}, got '" + value + "'");
}

const char* padding_name(smr::PaddingMode p) { return p == smr::PaddingMode::kZero ? "zero" : "replicate_first"; }

smr::PaddingMode parse_padding(const std::string& where, const std::string& v) {
  return parse_choice<smr::PaddingMode>(where, v, {{"zero", smr::PaddingMode::kZero},
                                                   {"replicate_first", smr::PaddingMode::kReplicateFirst}});
}

ssm::ParamForm parse_form(const std::string& where, const std::string& v) {
  return parse_choice<ssm::ParamForm>(where, v, {{"dense", ssm::ParamForm::kDense},
                                                 {"diagonal", ssm::ParamForm::kDiagonal}});
}

json model_json(const nss::ModelConfig& m) {
  return json{{"layers", m.layers},
              {"state_size", m.state_size},
              {"channels", m.channels},
              {"form", ssm::to_string(m.form)},
              {"smr",
               {{"enabled", m.smr.enabled},
                {"tau", m.smr.tau},
                {"padding", padding_name(m.smr.padding)},
                {"use_linear", m.smr.use_linear}}},
              {"residual", m.residual},
              {"nonlinearity", m.nonlinearity == nss::Nonlinearity::kGelu ? "gelu" : "none"},
              {"dt_min", m.dt_min},
              {"dt_max", m.dt_max}};
}

void read_model(ConfigReader r, nss::ModelConfig& m) {
  m.layers = r.get<Index>("layers", m.layers);
  m.state_size = r.get<Index>("state_size", m.state_size);
  m.channels = r.get<Index>("channels", m.channels);
  m.form = parse_form("model.form", r.get<std::string>("form", ssm::to_string(m.form)));
  if (r.has("smr")) {
    ConfigReader s = r.child("smr");
    m.smr.enabled = s.get<bool>("enabled", m.smr.enabled);
    m.smr.tau = s.get<Index>("tau", m.smr.tau);
    m.smr.padding = parse_padding("model.smr.padding", s.get<std::string>("padding", padding_name(m.smr.padding)));
    m.smr.use_linear = s.get<bool>("use_linear", m.smr.use_linear);
    s.finish();
  }
  m.residual = r.get<bool>("residual", m.residual);
  m.nonlinearity = parse_choice<nss::Nonlinearity>(
      "model.nonlinearity",
      r.get<std::string>("nonlinearity", m.nonlinearity == nss::Nonlinearity::kGelu ? "gelu" : "none"),
      {{"gelu", nss::Nonlinearity::kGelu}, {"none", nss::Nonlinearity::kNone}});
  m.dt_min = r.get<double>("dt_min", m.dt_min);
  m.dt_max = r.get<double>("dt_max", m.dt_max);
  r.finish();
  m.validate();
}

json adam_json(const grad::AdamConfig& a) {
  return json{{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}, {"weight_decay", a.weight_decay}};
}

void read_adam(ConfigReader& r, grad::AdamConfig& a) {
  a.lr = r.get<double>("lr", a.lr);
  a.beta1 = r.get<double>("beta1", a.beta1);
  a.beta2 = r.get<double>("beta2", a.beta2);
  a.eps = r.get<double>("eps", a.eps);
  a.weight_decay = r.get<double>("weight_decay", a.weight_decay);
  if (!(a.lr > 0.0)) throw ConfigError("config: lr must be positive");
}

json load_json_file(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
  try {
    return json::parse(io::read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
}

}  // namespace

ConfigReader::ConfigReader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
  if (!object_.is_object()) throw ConfigError("config: " + (path_.empty() ? std::string("root") : path_) + " must be an object");
}

ConfigReader ConfigReader::child(const std::string& key) {
  seen_.push_back(key);
  return ConfigReader(object_.at(key), path_ + key + ".");
}

void ConfigReader::finish() const {
  for (const auto& item : object_.items())
    if (std::find(seen_.begin(), seen_.end(), item.key()) == seen_.end())
      throw ConfigError("config: unknown key '" + path_ + item.key() + "'");
}

// --- etc ---------------------------------------------------------------

EtcSettings EtcSettings::from_json(const json& j) {
  EtcSettings s;
  ConfigReader r(j, "");
  s.seed = r.get<std::uint64_t>("seed", s.seed);
  s.plant = r.get<std::string>("plant", s.plant);
  s.kappa = r.get<double>("kappa", s.kappa);
  s.x0 = r.get<std::vector<double>>("x0", s.x0);
  s.t_start = r.get<double>("t_start", s.t_start);
  s.t_end = r.get<double>("t_end", s.t_end);
  s.dt = r.get<double>("dt", s.dt);
  s.integrator = r.get<std::string>("integrator", s.integrator);
  s.delta_max = r.get<double>("delta_max", s.delta_max);
  s.perturb_runs = r.get<int>("perturb_runs", s.perturb_runs);
  s.allow_uncertified = r.get<bool>("allow_uncertified", s.allow_uncertified);
  r.finish();
  return s;
}

json EtcSettings::to_json() const {
  return json{{"seed", seed},           {"plant", plant},   {"kappa", kappa},
              {"x0", x0},               {"t_start", t_start}, {"t_end", t_end},
              {"dt", dt},               {"integrator", integrator}, {"delta_max", delta_max},
              {"perturb_runs", perturb_runs}, {"allow_uncertified", allow_uncertified}};
}

etc::ETCPlant EtcSettings::make_plant() const {
  if (!(kappa > 0.0 && kappa < 1.0)) throw ConfigError("config: kappa must lie in (0, 1)");
  if (plant == "corrected") return etc::ETCPlant::example_corrected(kappa);
  if (plant == "printed") return etc::ETCPlant::example_printed(kappa);
  throw ConfigError("config: plant must be 'corrected' or 'printed'");
}

etc::SimGrid EtcSettings::make_grid() const {
  etc::SimGrid g;
  g.t_start = t_start;
  g.t_end = t_end;
  g.dt = dt;
  g.integrator = parse_choice<etc::Integrator>("integrator", integrator,
                                               {{"euler", etc::Integrator::kEuler}, {"rk4", etc::Integrator::kRk4}});
  try {
    g.steps();
  } catch (const ContractError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return g;
}

EtcExperiment run_etc_experiment(const EtcSettings& s) {
  const etc::ETCPlant plant = s.make_plant();
  const etc::SimGrid grid = s.make_grid();
  if (static_cast<Index>(s.x0.size()) != plant.state_size()) throw ConfigError("config: x0 must have 2 entries");
  if (s.perturb_runs < 1) throw ConfigError("config: perturb_runs must be >= 1");
  const VectorXd x0 = Eigen::Map<const VectorXd>(s.x0.data(), static_cast<Index>(s.x0.size()));
  const double delta = s.delta_max < 0.0 ? grid.dt : s.delta_max;
  if (delta > grid.dt) throw ConfigError("config: delta_max must not exceed dt");

  const etc::LyapunovCheck lyap = etc::verify_lyapunov_equation(plant);
  if (lyap.max_abs_residual >= 1e-9 && !s.allow_uncertified)
    throw ConfigError("Lyapunov residual " + io::format_double(lyap.max_abs_residual) +
                      " >= 1e-9 for plant '" + s.plant + "'; set allow_uncertified to simulate anyway");

  EtcExperiment e;
  e.nominal = etc::simulate_etc(plant, grid, x0, {s.allow_uncertified});
  e.nominal_schedule = etc::nominal_schedule(e.nominal, plant);
  e.nominal_replay = etc::simulate_open_loop(plant, e.nominal_schedule, grid, x0);

  const Index points = grid.steps() + 1;
  const MatrixXd u_nominal = e.nominal_schedule.per_grid_point(points);
  const double u_range = u_nominal.maxCoeff() - u_nominal.minCoeff();
  json norms = json::array();
  int exceed = 0;
  double worst_dev = 0.0;
  for (int r = 0; r < s.perturb_runs; ++r) {
    EtcPerturbedRun run;
    run.seed = Rng::derive_seed(s.seed, static_cast<std::uint64_t>(r));
    etc::HeldSchedule sched = etc::perturb_samples(e.nominal, plant, grid, delta, run.seed);
    etc::OpenLoopTrajectory rep = etc::simulate_open_loop(plant, sched, grid, x0);
    run.max_state_norm = rep.max_state_norm;
    run.diverged = rep.divergence.has_value();
    run.max_input_deviation = (sched.values - e.nominal_schedule.values).cwiseAbs().maxCoeff();
    worst_dev = std::max(worst_dev, run.max_input_deviation);
    if (run.max_state_norm > 1e3) ++exceed;
    norms.push_back(number(run.max_state_norm));
    if (r == 0) {
      e.perturbed_schedule = std::move(sched);
      e.perturbed_replay = std::move(rep);
    }
    e.runs.push_back(run);
  }

  const auto& lv = e.nominal.lyapunov;
  bool nonincreasing = true;
  for (std::size_t i = 1; i < e.nominal.trigger_indices.size(); ++i)
    nonincreasing = nonincreasing && lv[e.nominal.trigger_indices[i]] <= lv[e.nominal.trigger_indices[i - 1]];
  const etc::DecayFit fit = etc::fit_decay_rate(e.nominal, plant.kappa);
  double replay_dev = 0.0;
  if (!e.nominal.divergence && !e.nominal_replay.divergence)
    replay_dev = (e.nominal_replay.states - e.nominal.states).cwiseAbs().maxCoeff();
  else
    replay_dev = INFINITY;

  json m;
  m["plant"] = s.plant;
  m["lyapunov_residual_max_abs"] = lyap.max_abs_residual;
  m["closed_loop_spectral_abscissa"] = lyap.spectral_abscissa;
  m["trigger_count"] = e.nominal.trigger_times.size();
  m["first_trigger_after_start"] =
      e.nominal.trigger_times.size() > 1 ? json(e.nominal.trigger_times[1]) : json(nullptr);
  m["lv_initial"] = number(lv[0]);
  m["lv_final"] = number(lv[lv.size() - 1]);
  m["lv_ratio"] = number(lv[lv.size() - 1] / lv[0]);
  m["lv_nonincreasing_at_triggers"] = nonincreasing;
  m["iota"] = number(fit.iota);
  m["iota_fit_rms_residual"] = number(fit.rms_residual);
  m["nominal_diverged"] = e.nominal.divergence.has_value();
  m["nominal_replay_max_state_norm"] = number(e.nominal_replay.max_state_norm);
  m["nominal_replay_max_deviation"] = number(replay_dev);
  m["delta_max"] = delta;
  m["perturbed_max_state_norms"] = norms;
  m["perturbed_runs_exceeding_1e3"] = exceed;
  m["perturbed_runs"] = s.perturb_runs;
  m["input_range"] = number(u_range);
  m["max_input_deviation"] = number(worst_dev);
  m["max_input_deviation_fraction"] = number(u_range > 0.0 ? worst_dev / u_range : 0.0);
  e.metrics = std::move(m);
  return e;
}

void write_etc_outputs(const fs::path& out, const EtcSettings& s, const EtcExperiment& e) {
  fs::create_directories(out);
  io::write_text_file(out / "config.json", dump(s.to_json()));
  io::write_text_file(out / "trajectory.csv", etc::trajectory_csv(e.nominal));
  io::write_text_file(out / "replay_nominal.csv", etc::open_loop_csv(e.nominal_replay, e.nominal_schedule));
  io::write_text_file(out / "replay_perturbed.csv", etc::open_loop_csv(e.perturbed_replay, e.perturbed_schedule));
  {
    const Index points = e.nominal.times.size();
    const MatrixXd un = e.nominal_schedule.per_grid_point(points);
    const MatrixXd up = e.perturbed_schedule.per_grid_point(points);
    std::vector<std::string> header{"t"};
    for (Index i = 1; i <= un.rows(); ++i) header.push_back("u_nominal" + std::to_string(i));
    for (Index i = 1; i <= up.rows(); ++i) header.push_back("u_perturbed" + std::to_string(i));
    std::ostringstream os;
    io::CsvWriter w(os, header);
    for (Index k = 0; k < points; ++k) {
      VectorXd r(1 + un.rows() + up.rows());
      r << e.nominal.times[k], un.col(k), up.col(k);
      w.row(r);
    }
    io::write_text_file(out / "inputs.csv", os.str());
  }
  io::write_text_file(out / "triggers.json", etc::triggers_json(e.nominal));
  io::write_text_file(out / "metrics.json", dump(e.metrics));
}

// --- nss ---------------------------------------------------------------

NssSettings NssSettings::from_json(const json& j) {
  NssSettings s;
  ConfigReader r(j, "");
  s.seed = r.get<std::uint64_t>("seed", s.seed);
  if (r.has("model")) read_model(r.child("model"), s.model);
  if (r.has("train")) {
    ConfigReader t = r.child("train");
    s.train.epochs = t.get<Index>("epochs", s.train.epochs);
    read_adam(t, s.train.adam);
    s.train.objective = parse_choice<nss::Objective>(
        "train.objective",
        t.get<std::string>("objective", s.train.objective == nss::Objective::kNextStep ? "next_step" : "reconstruction"),
        {{"next_step", nss::Objective::kNextStep}, {"reconstruction", nss::Objective::kReconstruction}});
    t.finish();
    if (s.train.epochs < 0) throw ConfigError("config: train.epochs must be >= 0");
  }
  if (r.has("task")) {
    ConfigReader t = r.child("task");
    s.count = t.get<Index>("count", s.count);
    s.frequency = t.get<double>("frequency", s.frequency);
    t.finish();
  }
  if (r.has("perturbation")) {
    ConfigReader p = r.child("perturbation");
    s.delta_max = p.get<double>("delta_max", s.delta_max);
    p.finish();
  }
  r.finish();
  return s;
}

json NssSettings::to_json() const {
  return json{{"seed", seed},
              {"model", model_json(model)},
              {"train",
               [&] {
                 json t = adam_json(train.adam);
                 t["epochs"] = train.epochs;
                 t["objective"] = train.objective == nss::Objective::kNextStep ? "next_step" : "reconstruction";
                 return t;
               }()},
              {"task", {{"count", count}, {"frequency", frequency}}},
              {"perturbation", {{"delta_max", delta_max}}}};
}

NssExperiment run_nss_experiment(const NssSettings& s) {
  s.model.validate();
  if (s.model.in_channels != 1 || s.model.out_channels != 1)
    throw ConfigError("config: the sine task is single-channel");
  const nss::SineTask task = nss::make_sine_task(s.count, s.frequency);
  if (!(s.delta_max >= 0.0) || s.delta_max > task.width * (1.0 + 1e-9))
    throw ConfigError("config: perturbation.delta_max must lie in [0, grid width]");
  nss::TrainConfig train = s.train;
  train.seed = s.seed;
  NssExperiment e;
  e.model = nss::SequenceModel::build(s.model, s.seed);
  const nss::SequencePair clean = nss::make_pair(task.values.transpose(), train.objective);
  e.training = nss::train_model(*e.model, clean, train);
  const nss::PerturbedGrid pert = nss::perturb_sine(task, s.delta_max, Rng::derive_seed(s.seed, 1));
  const nss::SequencePair perturbed = nss::make_pair(pert.values.transpose(), train.objective);
  e.report = nss::evaluate_perturbed(*e.model, clean, perturbed);

  json j = nss::report_json(e.report);
  j["epochs_run"] = e.training.loss.size();
  j["final_loss"] = e.training.loss.empty() ? json(nullptr) : number(e.training.loss.back());
  j["training_diverged_epoch"] = e.training.diverged_epoch ? json(*e.training.diverged_epoch) : json(nullptr);
  j["layers"] = s.model.layers;
  j["smr"] = s.model.smr.enabled;
  j["parameter_count"] = e.model->parameter_count();
  try {
    j["first_layer_spectral_radius"] = number(ssm::spectral_radius(e.model->discrete_layer(0)).value);
  } catch (const DiscretizationError&) {
    j["first_layer_spectral_radius"] = nullptr;
  }
  j["max_perturbation_offset"] = number(pert.offsets.cwiseAbs().maxCoeff());
  e.report_json = std::move(j);
  return e;
}

void write_nss_outputs(const fs::path& out, const NssSettings& s, const NssExperiment& e) {
  fs::create_directories(out);
  io::write_text_file(out / "config.json", dump(s.to_json()));
  nss::write_loss_csv(out / "loss.csv", e.training.loss);
  io::write_text_file(out / "report.json", dump(e.report_json));
  nss::write_state_series(out / "states_clean.csv", e.report.states_clean);
  nss::write_state_series(out / "states_perturbed.csv", e.report.states_perturbed);
  ssm::write_checkpoint(out / "checkpoint.bin", e.model->to_checkpoint());
}

// --- pendulum ----------------------------------------------------------

PendulumSettings PendulumSettings::from_json(const json& j) {
  PendulumSettings s;
  ConfigReader r(j, "");
  s.data.seed = r.get<std::uint64_t>("seed", s.data.seed);
  if (r.has("dataset")) {
    ConfigReader d = r.child("dataset");
    s.data.length = d.get<int>("length", s.data.length);
    s.data.side = d.get<int>("side", s.data.side);
    s.data.t_min = d.get<double>("t_min", s.data.t_min);
    s.data.t_max = d.get<double>("t_max", s.data.t_max);
    s.data.g_over_l = d.get<double>("g_over_l", s.data.g_over_l);
    s.data.damping = d.get<double>("damping", s.data.damping);
    s.data.corruption = d.get<double>("corruption", s.data.corruption);
    s.data.train_size = d.get<int>("train_size", s.data.train_size);
    s.data.test_size = d.get<int>("test_size", s.data.test_size);
    d.finish();
  }
  s.data.validate();
  s.regression = pendulum::RegressionConfig::defaults(s.data.side);
  if (r.has("regression")) {
    ConfigReader g = r.child("regression");
    s.regression.epochs = g.get<int>("epochs", s.regression.epochs);
    s.regression.batch = g.get<int>("batch", s.regression.batch);
    read_adam(g, s.regression.adam);
    if (g.has("model")) read_model(g.child("model"), s.regression.model);
    g.finish();
  }
  s.regression.model.in_channels = static_cast<Index>(s.data.side) * s.data.side;
  s.regression.model.out_channels = 2;
  s.generate_only = r.get<bool>("generate_only", s.generate_only);
  s.dataset = r.get<std::string>("dataset_path", s.dataset);
  s.export_sample = r.get<int>("export_sample", s.export_sample);
  r.finish();
  return s;
}

json PendulumSettings::to_json() const {
  json model = model_json(regression.model);
  model.erase("smr");
  model["smr"] = {{"tau", regression.model.smr.tau},
                  {"padding", padding_name(regression.model.smr.padding)},
                  {"use_linear", regression.model.smr.use_linear}};
  json reg = adam_json(regression.adam);
  reg["epochs"] = regression.epochs;
  reg["batch"] = regression.batch;
  reg["model"] = model;
  return json{{"seed", data.seed},
              {"dataset",
               {{"length", data.length},
                {"side", data.side},
                {"t_min", data.t_min},
                {"t_max", data.t_max},
                {"g_over_l", data.g_over_l},
                {"damping", data.damping},
                {"corruption", data.corruption},
                {"train_size", data.train_size},
                {"test_size", data.test_size}}},
              {"regression", reg},
              {"generate_only", generate_only},
              {"dataset_path", dataset},
              {"export_sample", export_sample}};
}

json regression_json(const pendulum::RegressionResult& r) {
  auto variant = [](const pendulum::VariantResult& v) {
    json t = json::array();
    for (double x : v.test_mse) t.push_back(number(x));
    return json{{"initial_test_mse", number(v.initial_test_mse)},
                {"best_test_mse", number(v.best_test_mse)},
                {"best_epoch", v.best_epoch},
                {"diverged_epoch", v.diverged_epoch ? json(*v.diverged_epoch) : json(nullptr)},
                {"test_mse", t}};
  };
  return json{{"smr_off", variant(r.smr_off)},
              {"smr_on", variant(r.smr_on)},
              {"mean_predictor_mse", number(r.mean_predictor_mse)},
              {"smr_improves", r.smr_improves},
              {"relative_improvement", number(r.relative_improvement)}};
}

// --- gradcheck ---------------------------------------------------------

GradcheckSettings GradcheckSettings::from_json(const json& j) {
  GradcheckSettings s;
  ConfigReader r(j, "");
  s.options.seed = r.get<std::uint64_t>("seed", s.options.seed);
  s.options.instances = r.get<int>("instances", s.options.instances);
  s.options.h = r.get<double>("h", s.options.h);
  s.options.tolerance = r.get<double>("tolerance", s.options.tolerance);
  s.options.corrupt = r.get<std::string>("corrupt", s.options.corrupt);
  r.finish();
  if (s.options.instances < 1) throw ConfigError("config: instances must be >= 1");
  return s;
}

json GradcheckSettings::to_json() const {
  return json{{"seed", options.seed},
              {"instances", options.instances},
              {"h", options.h},
              {"tolerance", options.tolerance},
              {"corrupt", options.corrupt}};
}

std::string gradcheck_table(const std::vector<grad::PrimitiveCheck>& checks) {
  std::ostringstream os;
  os << "primitive,instances,max_rel_error,status\n";
  for (const auto& c : checks)
    os << c.name << ',' << c.instances << ',' << io::format_double(c.max_rel_error) << ','
       << (c.passed ? "pass" : "FAIL") << '\n';
  return os.str();
}

// --- entry point -------------------------------------------------------

int run(int argc, char** argv) {
  CLI::App app{"nsslab: state-space models under sampling perturbation"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int threads = 1;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "Global seed");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--threads", threads, "Worker threads for independent runs")->check(CLI::PositiveNumber);

  auto* etc_cmd = app.add_subcommand("etc", "Event-triggered control study");
  std::optional<std::string> plant;
  std::optional<double> kappa, delta_max;
  std::optional<int> runs;
  bool allow_uncertified = false;
  etc_cmd->add_option("--plant", plant, "corrected | printed");
  etc_cmd->add_option("--kappa", kappa);
  etc_cmd->add_option("--delta-max", delta_max);
  etc_cmd->add_option("--runs", runs, "Number of perturbed replays");
  etc_cmd->add_flag("--allow-uncertified", allow_uncertified);

  auto* nss_cmd = app.add_subcommand("nss", "Sine-task NSS experiment");
  std::optional<std::string> smr_flag, form;
  std::optional<Index> layers, epochs;
  nss_cmd->add_option("--smr", smr_flag, "on | off")->check(CLI::IsMember({"on", "off"}));
  nss_cmd->add_option("--layers", layers);
  nss_cmd->add_option("--epochs", epochs);
  nss_cmd->add_option("--form", form, "dense | diagonal");

  auto* pend_cmd = app.add_subcommand("pendulum", "Pendulum regression benchmark");
  bool generate_only = false;
  std::optional<std::string> dataset_path;
  std::optional<int> pend_epochs, export_sample;
  pend_cmd->add_flag("--generate-only", generate_only);
  pend_cmd->add_option("--dataset", dataset_path, "Existing dataset file");
  pend_cmd->add_option("--epochs", pend_epochs);
  pend_cmd->add_option("--export-sample", export_sample, "Write this test sample's frames as PGM");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every primitive");
  std::optional<std::string> corrupt;
  std::optional<int> instances;
  grad_cmd->add_option("--corrupt", corrupt, "Test hook: corrupt the named primitive's gradient");
  grad_cmd->add_option("--instances", instances);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const json config = config_path.empty() ? json::object() : load_json_file(config_path);
    if (etc_cmd->parsed()) {
      EtcSettings s = EtcSettings::from_json(config);
      if (seed) s.seed = *seed;
      if (plant) s.plant = *plant;
      if (kappa) s.kappa = *kappa;
      if (delta_max) s.delta_max = *delta_max;
      if (runs) s.perturb_runs = *runs;
      if (allow_uncertified) s.allow_uncertified = true;
      const EtcExperiment e = run_etc_experiment(s);
      const fs::path out = out_dir.empty() ? fs::path("out/etc") : fs::path(out_dir);
      write_etc_outputs(out, s, e);
      std::cout << dump(e.metrics);
      return 0;
    }
    if (nss_cmd->parsed()) {
      NssSettings s = NssSettings::from_json(config);
      if (seed) s.seed = *seed;
      if (smr_flag) s.model.smr.enabled = *smr_flag == "on";
      if (layers) s.model.layers = *layers;
      if (epochs) s.train.epochs = *epochs;
      if (form) s.model.form = parse_form("--form", *form);
      s.model.validate();
      if (s.train.epochs < 0) throw ConfigError("--epochs must be >= 0");
      const NssExperiment e = run_nss_experiment(s);
      const fs::path out = out_dir.empty() ? fs::path("out/nss") : fs::path(out_dir);
      write_nss_outputs(out, s, e);
      std::cout << dump(e.report_json);
      return 0;
    }
    if (pend_cmd->parsed()) {
      PendulumSettings s = PendulumSettings::from_json(config);
      if (seed) s.data.seed = *seed;
      if (generate_only) s.generate_only = true;
      if (dataset_path) s.dataset = *dataset_path;
      if (pend_epochs) s.regression.epochs = *pend_epochs;
      if (export_sample) s.export_sample = *export_sample;
      s.regression.seed = s.data.seed;
      const fs::path out = out_dir.empty() ? fs::path("out/pendulum") : fs::path(out_dir);
      pendulum::PendulumDataset data;
      if (!s.dataset.empty()) {
        if (!fs::exists(s.dataset)) throw ConfigError("dataset file not found: " + s.dataset);
        data = pendulum::read_dataset(fs::path(s.dataset));
        if (data.side != s.data.side) throw ConfigError("dataset image side does not match config");
      } else {
        data = pendulum::generate_dataset(s.data);
      }
      fs::create_directories(out);
      io::write_text_file(out / "config.json", dump(s.to_json()));
      if (s.dataset.empty()) pendulum::write_dataset(out / "dataset.bin", data);
      if (s.export_sample >= 0) {
        if (s.export_sample >= static_cast<int>(data.test.size())) throw ConfigError("export_sample out of range");
        pendulum::export_pgm(out / "frames", data.test[static_cast<std::size_t>(s.export_sample)], data.side);
      }
      if (s.generate_only) return 0;
      pendulum::RegressionResult result;
      if (threads >= 2) {
        std::exception_ptr err;
        std::thread worker([&] {
          try {
            result.smr_on = pendulum::train_variant(data, s.regression, true);
          } catch (...) {
            err = std::current_exception();
          }
        });
        result.smr_off = pendulum::train_variant(data, s.regression, false);
        worker.join();
        if (err) std::rethrow_exception(err);
        result.mean_predictor_mse = pendulum::mean_predictor_mse(data.test);
        result.smr_improves = result.smr_on.best_test_mse < result.smr_off.best_test_mse;
        result.relative_improvement = 1.0 - result.smr_on.best_test_mse / result.smr_off.best_test_mse;
      } else {
        result = pendulum::run_regression(data, s.regression);
      }
      const json j = regression_json(result);
      io::write_text_file(out / "results.json", dump(j));
      std::cout << dump(j);
      return 0;
    }
    if (grad_cmd->parsed()) {
      GradcheckSettings s = GradcheckSettings::from_json(config);
      if (seed) s.options.seed = *seed;
      if (corrupt) s.options.corrupt = *corrupt;
      if (instances) s.options.instances = *instances;
      const auto checks = grad::run_primitive_suite(s.options);
      const std::string table = gradcheck_table(checks);
      std::cout << table;
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        io::write_text_file(fs::path(out_dir) / "config.json", dump(s.to_json()));
        io::write_text_file(fs::path(out_dir) / "gradcheck.csv", table);
      }
      std::string failed;
      for (const auto& c : checks)
        if (!c.passed) failed += (failed.empty() ? "" : ", ") + c.name;
      if (!failed.empty()) {
        std::cerr << "gradcheck failed: " << failed << "\n";
        return 1;
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace nsslab::cli
