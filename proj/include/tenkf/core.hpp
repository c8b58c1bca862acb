#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace tenkf {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

/// Base error for every failure raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised when a linear system (covariance solve, innovation solve) cannot be factorized.
class SingularMatrixError : public Error {
public:
  SingularMatrixError(const std::string& what, double rcond) : Error(what), rcond_(rcond) {}
  double rcond() const { return rcond_; }

private:
  double rcond_;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace tenkf
