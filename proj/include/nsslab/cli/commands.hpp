#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nsslab/etc/simulate.hpp"
#include "nsslab/grad/gradcheck.hpp"
#include "nsslab/nss/evaluate.hpp"
#include "nsslab/nss/train.hpp"
#include "nsslab/pendulum/regression.hpp"

namespace nsslab::cli {

using nlohmann::json;

/// Reads keys from one JSON object and rejects any key never asked for.
class ConfigReader {
 public:
  ConfigReader(const json& object, std::string path);

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.push_back(key);
    if (!object_.contains(key)) return fallback;
    try {
      return object_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config: bad value for " + path_ + key + ": " + e.what());
    }
  }

  ConfigReader child(const std::string& key);
  bool has(const std::string& key) const { return object_.contains(key); }
  /// Throws ConfigError naming the first unknown key.
  void finish() const;

 private:
  json object_;
  std::string path_;
  std::vector<std::string> seen_;
};

struct EtcSettings {
  std::uint64_t seed = 0;
  std::string plant = "corrected";  // corrected | printed
  double kappa = 0.05;
  std::vector<double> x0{1.0, 0.0};
  double t_start = 0.0;
  double t_end = 10.0;
  double dt = 0.01;
  std::string integrator = "euler";  // euler | rk4
  /// Negative means "one grid width".
  double delta_max = -1.0;
  int perturb_runs = 20;
  bool allow_uncertified = false;

  static EtcSettings from_json(const json& j);
  json to_json() const;
  etc::ETCPlant make_plant() const;
  etc::SimGrid make_grid() const;
};

struct EtcPerturbedRun {
  std::uint64_t seed = 0;
  double max_state_norm = 0.0;
  bool diverged = false;
  double max_input_deviation = 0.0;
};

struct EtcExperiment {
  etc::ETCTrajectory nominal;
  etc::HeldSchedule nominal_schedule;
  etc::OpenLoopTrajectory nominal_replay;
  etc::HeldSchedule perturbed_schedule;  // first run
  etc::OpenLoopTrajectory perturbed_replay;
  std::vector<EtcPerturbedRun> runs;
  json metrics;
};

/// Lyapunov check, closed loop, and open-loop replays of the nominal and
/// perturb_runs jittered schedules (seeds derived from `seed`).
EtcExperiment run_etc_experiment(const EtcSettings& settings);

struct NssSettings {
  std::uint64_t seed = 0;
  nss::ModelConfig model;
  nss::TrainConfig train;
  Eigen::Index count = 100;
  double frequency = 5.0 * 3.141592653589793;
  double delta_max = 0.01;

  static NssSettings from_json(const json& j);
  json to_json() const;
};

struct NssExperiment {
  nss::TrainResult training;
  nss::NSSReport report;
  std::optional<nss::SequenceModel> model;
  json report_json;
};

NssExperiment run_nss_experiment(const NssSettings& settings);

struct PendulumSettings {
  pendulum::PendulumConfig data;
  pendulum::RegressionConfig regression = pendulum::RegressionConfig::defaults();
  bool generate_only = false;
  std::string dataset;  // load instead of generating when set
  int export_sample = -1;
  int threads = 1;

  static PendulumSettings from_json(const json& j);
  json to_json() const;
};

json regression_json(const pendulum::RegressionResult& result);

struct GradcheckSettings {
  grad::GradcheckOptions options;

  static GradcheckSettings from_json(const json& j);
  json to_json() const;
};

/// Machine-readable table: header primitive,instances,max_rel_error,status.
std::string gradcheck_table(const std::vector<grad::PrimitiveCheck>& checks);

/// Artifacts written by each command (names relative to the output dir).
void write_etc_outputs(const std::filesystem::path& out, const EtcSettings& s, const EtcExperiment& e);
void write_nss_outputs(const std::filesystem::path& out, const NssSettings& s, const NssExperiment& e);

/// Entry point: etc | nss | pendulum | gradcheck. Returns the exit code.
int run(int argc, char** argv);

}  // namespace nsslab::cli
