#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include <Eigen/Core>

#include "nsslab/errors.hpp"

namespace nsslab::ssm {

using Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class ParamForm : std::uint8_t { kDense = 0, kDiagonal = 1 };

inline const char* to_string(ParamForm form) {
  return form == ParamForm::kDense ? "dense" : "diagonal";
}

/// Continuous-time x' = A x + B u, y = C x (+ u when `residual`).
///
/// In diagonal form `A` is the n x 1 column of diagonal entries.
template <typename Scalar = double>
struct ContinuousSSM {
  ParamForm form = ParamForm::kDense;
  Matrix<Scalar> A;
  Matrix<Scalar> B;
  Matrix<Scalar> C;
  Scalar dt = Scalar(0.01);
  bool residual = false;

  Index state_size() const { return B.rows(); }
  Index channels() const { return B.cols(); }

  Matrix<Scalar> dense_A() const {
    if (form == ParamForm::kDense) return A;
    return A.col(0).asDiagonal();
  }

  void validate() const {
    const Index n = B.rows();
    const Index m = B.cols();
    if (n < 1 || m < 1) throw ShapeError("ssm: empty B");
    const bool a_ok = form == ParamForm::kDense ? (A.rows() == n && A.cols() == n)
                                                : (A.rows() == n && A.cols() == 1);
    if (!a_ok) throw ShapeError("ssm: A does not match state size");
    if (C.rows() != m || C.cols() != n) throw ShapeError("ssm: C must be m x n");
    if (!(dt > Scalar(0))) throw ContractError("ssm: step dt must be positive");
    if (!A.allFinite() || !B.allFinite() || !C.allFinite())
      throw ContractError("ssm: non-finite parameters");
  }
};

/// Discretized (A-bar, B-bar, C-bar); `source` links back to the
/// continuous model when produced by discretize_bilinear.
template <typename Scalar = double>
struct DiscreteSSM {
  ParamForm form = ParamForm::kDense;
  Matrix<Scalar> Abar;
  Matrix<Scalar> Bbar;
  Matrix<Scalar> Cbar;
  bool residual = false;
  std::shared_ptr<const ContinuousSSM<Scalar>> source;

  Index state_size() const { return Bbar.rows(); }
  Index channels() const { return Bbar.cols(); }

  void validate() const {
    const Index n = Bbar.rows();
    if (Abar.rows() != n || Abar.cols() != n) throw ShapeError("ssm: A-bar must be n x n");
    if (Cbar.cols() != n || Cbar.rows() != Bbar.cols()) throw ShapeError("ssm: C-bar must be m x n");
  }
};

}  // namespace nsslab::ssm
