#include "nsslab/grad/tensor.hpp"

#include <sstream>

#include "nsslab/errors.hpp"

namespace nsslab::grad {

namespace {

Index product(const std::vector<Index>& shape) {
  Index n = 1;
  for (Index extent : shape) {
    if (extent < 0) throw ShapeError("negative tensor extent");
    n *= extent;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<Index> shape, double fill)
    : shape_(std::move(shape)), data_(Eigen::VectorXd::Constant(product(shape_), fill)) {}

Tensor Tensor::scalar(double value) { return Tensor({}, value); }

Tensor Tensor::from_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Tensor t({v.size()});
  t.data_ = v;
  return t;
}

Tensor Tensor::from_matrix(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  Tensor t({m.rows(), m.cols()});
  t.matrix() = m;
  return t;
}

Index Tensor::rows() const {
  if (shape_.empty()) return 1;
  return shape_[0];
}

Index Tensor::cols() const {
  if (shape_.size() <= 1) return 1;
  Index c = 1;
  for (std::size_t i = 1; i < shape_.size(); ++i) c *= shape_[i];
  return c;
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? " x " : "") << shape_[i];
  os << ']';
  return os.str();
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_string());
  return data_[0];
}

MatrixMap Tensor::grad() {
  if (!has_grad()) {
    grad_ = Eigen::VectorXd::Zero(data_.size());
    has_grad_ = true;
  }
  return MatrixMap(grad_.data(), rows(), cols());
}

ConstMatrixMap Tensor::grad() const {
  if (!has_grad()) throw ContractError("gradient requested before any backward pass");
  return ConstMatrixMap(grad_.data(), rows(), cols());
}

Eigen::Map<Eigen::VectorXd> Tensor::grad_flat() {
  grad();
  return Eigen::Map<Eigen::VectorXd>(grad_.data(), grad_.size());
}

void Tensor::zero_grad() {
  grad_ = Eigen::VectorXd::Zero(data_.size());
  has_grad_ = true;
}

void zero_grads(const std::vector<Tensor*>& params) {
  for (Tensor* p : params) p->zero_grad();
}

}  // namespace nsslab::grad
