#include "nsslab/pendulum/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nsslab/errors.hpp"
#include "nsslab/io/binary.hpp"
#include "nsslab/io/csv.hpp"
#include "nsslab/pendulum/render.hpp"
#include "nsslab/random.hpp"

namespace nsslab::pendulum {

using Eigen::Index;

namespace {

constexpr std::array<char, 8> kMagic{'N', 'S', 'S', 'L', 'A', 'B', 'P', 'D'};
constexpr std::uint8_t kVersion = 1;
constexpr double kPi = 3.141592653589793;
// Test samples draw from streams offset by this much.
constexpr std::uint64_t kTestStreamOffset = std::uint64_t{1} << 32;

}  // namespace

void PendulumConfig::validate() const {
  if (length < 1) throw ConfigError("pendulum: length must be >= 1");
  if (side < 4) throw ConfigError("pendulum: image side must be >= 4");
  if (!(corruption >= 0.0 && corruption <= 1.0)) throw ConfigError("pendulum: corruption must lie in [0, 1]");
  if (!(t_max > t_min)) throw ConfigError("pendulum: need t_max > t_min");
  if (t_min < 0.0) throw ConfigError("pendulum: t_min must be >= 0");
  if (train_size < 0 || test_size < 0) throw ConfigError("pendulum: dataset sizes must be >= 0");
  if (damping < 0.0 || !(g_over_l > 0.0)) throw ConfigError("pendulum: need damping >= 0, g/l > 0");
}

Corruption corrupt_frames(const Eigen::MatrixXd& frames, double probability, std::uint64_t seed) {
  if (!(probability >= 0.0 && probability <= 1.0))
    throw ContractError("corrupt_frames: probability must lie in [0, 1]");
  Rng rng(seed);
  Corruption out{frames, std::vector<std::uint8_t>(static_cast<std::size_t>(frames.rows()), 0)};
  for (Index r = 0; r < frames.rows(); ++r) {
    if (!rng.bernoulli(probability)) continue;
    out.mask[static_cast<std::size_t>(r)] = 1;
    for (Index c = 0; c < frames.cols(); ++c) out.frames(r, c) = rng.uniform();
  }
  return out;
}

PendulumSample generate_sample(const PendulumConfig& cfg, std::uint64_t stream_seed) {
  Rng rng(stream_seed);
  const double theta0 = rng.uniform_open(-kPi, kPi);
  const double omega0 = rng.uniform_open(-0.5, 0.5);
  PendulumSample s;
  const Index L = cfg.length;
  s.timestamps.resize(L);
  for (;;) {
    for (Index i = 0; i < L; ++i) s.timestamps[i] = rng.uniform(cfg.t_min, cfg.t_max);
    std::sort(s.timestamps.begin(), s.timestamps.end());
    bool strict = true;
    for (Index i = 1; i < L; ++i) strict = strict && s.timestamps[i] > s.timestamps[i - 1];
    if (strict) break;
  }
  Dynamics dyn{cfg.g_over_l, cfg.damping, 0.01};
  const Eigen::VectorXd theta = simulate_angles(theta0, omega0, dyn, s.timestamps);
  const Index pixels = static_cast<Index>(cfg.side) * cfg.side;
  Eigen::MatrixXd frames(L, pixels);
  s.targets.resize(L, 2);
  for (Index i = 0; i < L; ++i) {
    frames.row(i) = render_frame(theta[i], cfg.side).transpose();
    s.targets(i, 0) = std::sin(theta[i]);
    s.targets(i, 1) = std::cos(theta[i]);
  }
  Corruption c = corrupt_frames(frames, cfg.corruption, Rng::derive_seed(stream_seed, 1));
  s.frames = std::move(c.frames);
  s.mask = std::move(c.mask);
  return s;
}

PendulumDataset generate_dataset(const PendulumConfig& cfg) {
  cfg.validate();
  PendulumDataset ds;
  ds.length = cfg.length;
  ds.side = cfg.side;
  auto stream_seed = [&](std::uint64_t index) { return Rng::derive_seed(cfg.seed, index); };
  for (int i = 0; i < cfg.train_size; ++i) ds.train.push_back(generate_sample(cfg, stream_seed(static_cast<std::uint64_t>(i))));
  for (int i = 0; i < cfg.test_size; ++i)
    ds.test.push_back(generate_sample(cfg, stream_seed(kTestStreamOffset + static_cast<std::uint64_t>(i))));
  return ds;
}

void write_dataset(std::ostream& os, const PendulumDataset& ds) {
  os.write(kMagic.data(), kMagic.size());
  io::put<std::uint8_t>(os, kVersion);
  io::put<std::uint32_t>(os, io::dim(static_cast<Index>(ds.train.size())));
  io::put<std::uint32_t>(os, io::dim(static_cast<Index>(ds.test.size())));
  io::put<std::uint32_t>(os, io::dim(ds.length));
  io::put<std::uint32_t>(os, io::dim(ds.side));
  for (const auto* split : {&ds.train, &ds.test}) {
    for (const auto& s : *split) {
      io::put_matrix(os, s.timestamps);
      io::put_matrix(os, s.frames);
      io::put_matrix(os, s.targets);
      for (std::uint8_t m : s.mask) io::put<std::uint8_t>(os, m);
    }
  }
}

void write_dataset(const std::filesystem::path& path, const PendulumDataset& ds) {
  std::ostringstream os(std::ios::binary);
  write_dataset(os, ds);
  io::write_text_file(path, os.str());
}

PendulumDataset read_dataset(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw ContractError("dataset: bad magic");
  if (io::get<std::uint8_t>(is) != kVersion) throw ContractError("dataset: unsupported version");
  const auto train = io::get<std::uint32_t>(is);
  const auto test = io::get<std::uint32_t>(is);
  PendulumDataset ds;
  ds.length = static_cast<int>(io::get<std::uint32_t>(is));
  ds.side = static_cast<int>(io::get<std::uint32_t>(is));
  const Index L = ds.length;
  const Index pixels = static_cast<Index>(ds.side) * ds.side;
  auto read_split = [&](std::uint32_t count, std::vector<PendulumSample>& out) {
    for (std::uint32_t i = 0; i < count; ++i) {
      PendulumSample s;
      s.timestamps = io::get_matrix(is, L, 1);
      s.frames = io::get_matrix(is, L, pixels);
      s.targets = io::get_matrix(is, L, 2);
      s.mask.resize(static_cast<std::size_t>(L));
      for (auto& m : s.mask) m = io::get<std::uint8_t>(is);
      out.push_back(std::move(s));
    }
  };
  read_split(train, ds.train);
  read_split(test, ds.test);
  return ds;
}

PendulumDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ContractError("dataset: cannot open " + path.string());
  return read_dataset(f);
}

void export_pgm(const std::filesystem::path& dir, const PendulumSample& sample, int side) {
  std::filesystem::create_directories(dir);
  for (Index i = 0; i < sample.frames.rows(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%02ld.pgm", static_cast<long>(i));
    io::write_text_file(dir / name, to_pgm(sample.frames.row(i).transpose(), side));
  }
}

}  // namespace nsslab::pendulum
