#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nsslab {

/// Operand shapes do not agree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller-side precondition was violated.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid configuration value (unknown key, out-of-range option, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A non-finite value appeared where the computation cannot continue.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::string op)
      : std::runtime_error(what), op_(std::move(op)) {}

  /// Name of the primitive that produced the offending value.
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

/// (I - dt/2 A) is numerically singular.
class DiscretizationError : public std::runtime_error {
 public:
  DiscretizationError(const std::string& what, double dt, double eigen_re,
                      double eigen_im)
      : std::runtime_error(what), dt_(dt), eigen_re_(eigen_re), eigen_im_(eigen_im) {}

  double dt() const { return dt_; }
  double eigenvalue_real() const { return eigen_re_; }
  double eigenvalue_imag() const { return eigen_im_; }

 private:
  double dt_;
  double eigen_re_;
  double eigen_im_;
};

}  // namespace nsslab
