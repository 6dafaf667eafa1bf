#pragma once

#include <complex>
#include <type_traits>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "nsslab/ssm/model.hpp"

namespace nsslab::ssm {

/// Impulse response blocks K[i] = C-bar A-bar^i B-bar, i = 0..L-1 (each m x m).
template <typename Scalar = double>
struct Kernel {
  std::vector<Matrix<Scalar>> blocks;

  Index length() const { return static_cast<Index>(blocks.size()); }
  Index channels() const { return blocks.empty() ? 0 : blocks.front().rows(); }
};

/// Convolution kernel by iterated multiplication (no eigendecomposition).
template <typename Scalar>
Kernel<Scalar> ssm_kernel(const DiscreteSSM<Scalar>& model, Index length) {
  model.validate();
  if (length < 1) throw ContractError("ssm_kernel: length must be >= 1");
  Kernel<Scalar> k;
  k.blocks.reserve(static_cast<std::size_t>(length));
  Matrix<Scalar> propagated = model.Bbar;  // A-bar^i B-bar
  for (Index i = 0; i < length; ++i) {
    k.blocks.push_back(model.Cbar * propagated);
    if (i + 1 < length) propagated = (model.Abar * propagated).eval();
  }
  return k;
}

enum class ConvPath { kDirect, kFft };

/// Causal convolution y_k = sum_{i=0..k} K[i] u_{k-i} (zero initial state).
///
/// kDirect is the O(L^2) reference; kFft zero-pads to avoid wrap-around
/// and is only available for double.
template <typename Scalar, typename Derived>
Matrix<Scalar> ssm_conv(const Kernel<Scalar>& kernel, const Eigen::MatrixBase<Derived>& u,
                        ConvPath path = ConvPath::kDirect) {
  const Index steps = u.cols();
  const Index m = kernel.channels();
  if (kernel.length() < steps) throw ContractError("ssm_conv: kernel shorter than input");
  if (u.rows() != m) throw ShapeError("ssm_conv: input has wrong channel count");

  Matrix<Scalar> y = Matrix<Scalar>::Zero(m, steps);
  if (path == ConvPath::kDirect) {
    for (Index k = 0; k < steps; ++k)
      for (Index i = 0; i <= k; ++i) y.col(k).noalias() += kernel.blocks[i] * u.col(k - i);
    return y;
  }

  if constexpr (!std::is_same_v<Scalar, double>) {
    throw ContractError("ssm_conv: FFT path requires double precision");
  } else {
    Index size = 1;
    while (size < 2 * steps) size *= 2;
    Eigen::FFT<double> fft;
    std::vector<double> buf(static_cast<std::size_t>(size));
    std::vector<std::complex<double>> ku, uu, prod;
    for (Index out = 0; out < m; ++out) {
      for (Index in = 0; in < m; ++in) {
        std::fill(buf.begin(), buf.end(), 0.0);
        for (Index i = 0; i < steps; ++i) buf[i] = kernel.blocks[i](out, in);
        fft.fwd(ku, buf);
        std::fill(buf.begin(), buf.end(), 0.0);
        for (Index i = 0; i < steps; ++i) buf[i] = u(in, i);
        fft.fwd(uu, buf);
        prod.resize(ku.size());
        for (std::size_t j = 0; j < ku.size(); ++j) prod[j] = ku[j] * uu[j];
        fft.inv(buf, prod);
        for (Index k = 0; k < steps; ++k) y(out, k) += buf[k];
      }
    }
    return y;
  }
}

}  // namespace nsslab::ssm
