#pragma once

#include <initializer_list>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace nsslab::grad {

using Index = Eigen::Index;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

/// Dense row-major real tensor with an optional gradient accumulator.
///
/// Rank 0 and rank 1 tensors view as column vectors; a rank-3 tensor
/// [a, b, c] views as an a x (b*c) matrix. Every primitive in gradkit
/// works on these matrix views.
class Tensor {
 public:
  Tensor() : Tensor(std::vector<Index>{}) {}
  explicit Tensor(std::vector<Index> shape, double fill = 0.0);
  Tensor(std::initializer_list<Index> shape, double fill = 0.0)
      : Tensor(std::vector<Index>(shape), fill) {}

  static Tensor scalar(double value);
  static Tensor from_vector(const Eigen::Ref<const Eigen::VectorXd>& v);
  static Tensor from_matrix(const Eigen::Ref<const Eigen::MatrixXd>& m);

  const std::vector<Index>& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  Index rows() const;
  Index cols() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_string() const;

  MatrixMap matrix() { return MatrixMap(data_.data(), rows(), cols()); }
  ConstMatrixMap matrix() const { return ConstMatrixMap(data_.data(), rows(), cols()); }
  Eigen::VectorXd& flat() { return data_; }
  const Eigen::VectorXd& flat() const { return data_; }
  double item() const;

  /// Dense copy in Eigen's default (column-major) layout.
  Eigen::MatrixXd to_matrix() const { return matrix(); }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool flag) { requires_grad_ = flag; }

  bool has_grad() const { return grad_.size() == data_.size() && has_grad_; }
  /// Gradient accumulator; allocated (zero) on first use.
  MatrixMap grad();
  ConstMatrixMap grad() const;
  Eigen::Map<Eigen::VectorXd> grad_flat();
  void zero_grad();

  bool all_finite() const { return data_.allFinite(); }

 private:
  std::vector<Index> shape_;
  Eigen::VectorXd data_;
  Eigen::VectorXd grad_;
  bool requires_grad_ = false;
  bool has_grad_ = false;
};

/// Resets the gradient accumulators of every tensor in `params`.
void zero_grads(const std::vector<Tensor*>& params);

}  // namespace nsslab::grad
