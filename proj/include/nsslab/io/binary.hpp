#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include <Eigen/Core>

#include "nsslab/errors.hpp"

namespace nsslab::io {

/// Little-endian scalar write.
template <typename T>
void put(std::ostream& os, T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T)))
    throw ContractError("binary read: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

/// Row-major f64 payload.
inline void put_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(os, m(r, c));
}

inline Eigen::MatrixXd get_matrix(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = get<double>(is);
  return m;
}

inline std::uint32_t dim(Eigen::Index v) {
  if (v < 0 || v > static_cast<Eigen::Index>(UINT32_MAX)) throw ShapeError("binary write: dimension out of range");
  return static_cast<std::uint32_t>(v);
}

}  // namespace nsslab::io
