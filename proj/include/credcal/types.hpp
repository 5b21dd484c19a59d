#ifndef CREDCAL_TYPES_HPP
#define CREDCAL_TYPES_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace credcal {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Vector<double>;
using MatrixXd = Matrix<double>;

/// Unconstrained factor-model parameters laid out as
/// (zeta, lambda_2..lambda_m, omega_1..omega_m).
using ThetaVector = VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Cholesky of a covariance (or of a supposedly PD matrix) failed.
class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

}  // namespace credcal

#endif  // CREDCAL_TYPES_HPP
