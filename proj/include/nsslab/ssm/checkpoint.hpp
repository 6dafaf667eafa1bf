#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "nsslab/smr/gate.hpp"
#include "nsslab/ssm/model.hpp"

namespace nsslab::ssm {

/// One SSM layer as stored on disk, with its optional SMR gate.
struct CheckpointBlock {
  ContinuousSSM<double> model;
  std::optional<smr::SMRGate<double>> gate;
};

/// Input/output projections of a stacked model.
struct CheckpointProjections {
  Eigen::MatrixXd in_weight;
  Eigen::VectorXd in_bias;
  Eigen::MatrixXd out_weight;
  Eigen::VectorXd out_bias;
};

struct Checkpoint {
  std::vector<CheckpointBlock> blocks;
  std::optional<CheckpointProjections> projections;
};

/// Block record layout (little-endian):
///   "NSSLABCK" | u8 version=1 | u8 form (0 dense, 1 diagonal) | u32 n | u32 m
///   | f64 A (n*n row-major, or n) | f64 B (n*m) | f64 C (m*n) | f64 dt
///   | u8 has_smr [ | u32 tau | u8 use_linear | u8 padding
///                  | f64 kernel (C_out*C_in*tau, [out][in][tap]) | f64 bias
///                  [ | f64 linear W (C_in*C_out) | f64 linear b ] ]
/// Projection record: "NSSLABPJ" | u8 version=1 | u32 in_rows | u32 in_cols
///   | f64 W_in | f64 b_in | u32 out_rows | u32 out_cols | f64 W_out | f64 b_out
void write_block(std::ostream& os, const CheckpointBlock& block);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);
Checkpoint read_checkpoint(std::istream& is);

}  // namespace nsslab::ssm
