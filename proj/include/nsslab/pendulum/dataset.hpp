#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "nsslab/pendulum/simulate.hpp"

namespace nsslab::pendulum {

struct PendulumConfig {
  int length = 50;
  int side = 24;
  double t_min = 0.0;
  double t_max = 100.0;
  double g_over_l = 1.0;
  double damping = 0.1;
  double corruption = 0.2;
  int train_size = 500;
  int test_size = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PendulumSample {
  Eigen::VectorXd timestamps;  // L
  Eigen::MatrixXd frames;      // L x side^2
  Eigen::MatrixXd targets;     // L x 2: (sin theta, cos theta)
  std::vector<std::uint8_t> mask;
};

struct PendulumDataset {
  int length = 0;
  int side = 0;
  std::vector<PendulumSample> train;
  std::vector<PendulumSample> test;
};

struct Corruption {
  Eigen::MatrixXd frames;
  std::vector<std::uint8_t> mask;
};

/// Each row (frame) is independently replaced by U[0,1) noise with the
/// given probability.
Corruption corrupt_frames(const Eigen::MatrixXd& frames, double probability, std::uint64_t seed);

/// One sample drawn from its own stream.
PendulumSample generate_sample(const PendulumConfig& config, std::uint64_t stream_seed);

PendulumDataset generate_dataset(const PendulumConfig& config);

/// Layout (little-endian): "NSSLABPD" | u8 version=1 | u32 train | u32 test
///   | u32 L | u32 side | per sample: f64 timestamps[L] | f64 frames[L*side^2]
///   | f64 targets[L*2] | u8 mask[L]
void write_dataset(std::ostream& os, const PendulumDataset& dataset);
void write_dataset(const std::filesystem::path& path, const PendulumDataset& dataset);
PendulumDataset read_dataset(std::istream& is);
PendulumDataset read_dataset(const std::filesystem::path& path);

/// Writes every frame of a sample as frame_XX.pgm into `dir`.
void export_pgm(const std::filesystem::path& dir, const PendulumSample& sample, int side);

}  // namespace nsslab::pendulum
