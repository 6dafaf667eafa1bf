#include "nsslab/ssm/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "nsslab/io/binary.hpp"

namespace nsslab::ssm {

namespace {

constexpr std::array<char, 8> kBlockMagic{'N', 'S', 'S', 'L', 'A', 'B', 'C', 'K'};
constexpr std::array<char, 8> kProjMagic{'N', 'S', 'S', 'L', 'A', 'B', 'P', 'J'};
constexpr std::uint8_t kVersion = 1;

using io::dim;
using io::get;
using io::get_matrix;
using io::put;
using io::put_matrix;

void write_projections(std::ostream& os, const CheckpointProjections& p) {
  os.write(kProjMagic.data(), kProjMagic.size());
  put<std::uint8_t>(os, kVersion);
  put<std::uint32_t>(os, dim(p.in_weight.rows()));
  put<std::uint32_t>(os, dim(p.in_weight.cols()));
  put_matrix(os, p.in_weight);
  put_matrix(os, p.in_bias);
  put<std::uint32_t>(os, dim(p.out_weight.rows()));
  put<std::uint32_t>(os, dim(p.out_weight.cols()));
  put_matrix(os, p.out_weight);
  put_matrix(os, p.out_bias);
}

CheckpointBlock read_block_body(std::istream& is) {
  CheckpointBlock block;
  auto& model = block.model;
  const auto form = get<std::uint8_t>(is);
  if (form > 1) throw ContractError("checkpoint: unknown param_form tag");
  model.form = static_cast<ParamForm>(form);
  const Index n = get<std::uint32_t>(is);
  const Index m = get<std::uint32_t>(is);
  model.A = model.form == ParamForm::kDense ? get_matrix(is, n, n) : get_matrix(is, n, 1);
  model.B = get_matrix(is, n, m);
  model.C = get_matrix(is, m, n);
  model.dt = get<double>(is);
  if (get<std::uint8_t>(is) != 0) {
    smr::SMRGate<double> gate;
    const Index tau = get<std::uint32_t>(is);
    gate.use_linear = get<std::uint8_t>(is) != 0;
    gate.padding = get<std::uint8_t>(is) != 0 ? smr::PaddingMode::kReplicateFirst : smr::PaddingMode::kZero;
    gate.taps.assign(static_cast<std::size_t>(tau), Eigen::MatrixXd(m, m));
    for (Index o = 0; o < m; ++o)
      for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < tau; ++j) gate.taps[j](o, i) = get<double>(is);
    gate.bias = get_matrix(is, m, 1);
    if (gate.use_linear) {
      gate.linear_weight = get_matrix(is, m, m);
      gate.linear_bias = get_matrix(is, m, 1);
    }
    block.gate = std::move(gate);
  }
  return block;
}

}  // namespace

void write_block(std::ostream& os, const CheckpointBlock& block) {
  const auto& model = block.model;
  model.validate();
  os.write(kBlockMagic.data(), kBlockMagic.size());
  put<std::uint8_t>(os, kVersion);
  put<std::uint8_t>(os, static_cast<std::uint8_t>(model.form));
  put<std::uint32_t>(os, dim(model.state_size()));
  put<std::uint32_t>(os, dim(model.channels()));
  put_matrix(os, model.A);
  put_matrix(os, model.B);
  put_matrix(os, model.C);
  put<double>(os, model.dt);
  put<std::uint8_t>(os, block.gate ? 1 : 0);
  if (!block.gate) return;
  const auto& g = *block.gate;
  g.validate();
  if (g.in_channels() != model.channels() || g.out_channels() != model.channels())
    throw ShapeError("checkpoint: SMR gate channels must match the SSM");
  put<std::uint32_t>(os, dim(g.tau()));
  put<std::uint8_t>(os, g.use_linear ? 1 : 0);
  put<std::uint8_t>(os, g.padding == smr::PaddingMode::kReplicateFirst ? 1 : 0);
  for (Index o = 0; o < g.out_channels(); ++o)
    for (Index i = 0; i < g.in_channels(); ++i)
      for (Index j = 0; j < g.tau(); ++j) put<double>(os, g.taps[j](o, i));
  put_matrix(os, g.bias);
  if (g.use_linear) {
    put_matrix(os, g.linear_weight);
    put_matrix(os, g.linear_bias);
  }
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ContractError("checkpoint: cannot open " + path.string());
  for (const auto& block : checkpoint.blocks) write_block(os, block);
  if (checkpoint.projections) write_projections(os, *checkpoint.projections);
}

Checkpoint read_checkpoint(std::istream& is) {
  Checkpoint ck;
  std::array<char, 8> magic;
  while (is.read(magic.data(), magic.size())) {
    if (magic != kBlockMagic && magic != kProjMagic) throw ContractError("checkpoint: bad magic");
    if (get<std::uint8_t>(is) != kVersion) throw ContractError("checkpoint: unsupported version");
    if (magic == kBlockMagic) {
      ck.blocks.push_back(read_block_body(is));
    } else if (magic == kProjMagic) {
      CheckpointProjections p;
      Index r = get<std::uint32_t>(is), c = get<std::uint32_t>(is);
      p.in_weight = get_matrix(is, r, c);
      p.in_bias = get_matrix(is, r, 1);
      r = get<std::uint32_t>(is);
      c = get<std::uint32_t>(is);
      p.out_weight = get_matrix(is, r, c);
      p.out_bias = get_matrix(is, r, 1);
      ck.projections = std::move(p);
    }
  }
  if (is.gcount() != 0) throw ContractError("checkpoint: trailing bytes");
  if (ck.blocks.empty()) throw ContractError("checkpoint: no SSM block");
  return ck;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ContractError("checkpoint: cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace nsslab::ssm
