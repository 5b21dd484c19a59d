#ifndef CREDCAL_FACTOR_MODEL_HPP
#define CREDCAL_FACTOR_MODEL_HPP

// One-factor covariance-structure model on a Wishart cross-product matrix.
//
//   Sigma(theta) = psi * lambda * lambda' + Diag(upsilon),
//   psi = exp(2 zeta),  upsilon_j = exp(2 omega_j),  lambda_1 = 1,
//   theta = (zeta, lambda_2..lambda_m, omega_1..omega_m),  q = 2m.
//
// The density-level functions are templates on the scalar type of theta so
// they can be evaluated in extended precision (tests use long double).

#include <cmath>
#include <string>

#include "credcal/random.hpp"
#include "credcal/types.hpp"

namespace credcal {

struct FactorModelConfig {
  Index m = 5;
  Index n = 100;

  Index q() const { return 2 * m; }
  Index dof() const { return n - 1; }
  /// Throws DimensionError unless m >= 3 and n - 1 >= m.
  void validate() const;
};

inline Index theta_size(Index m) { return 2 * m; }

/// Number of response variables implied by a parameter vector length.
inline Index response_count(Index q) {
  if (q < 6 || q % 2 != 0) throw DimensionError("theta length must be even and >= 6");
  return q / 2;
}

/// Sufficient statistic Y ~ Wish(Sigma(theta), dof).
struct CrossProductData {
  MatrixXd y;
  Index dof = 0;

  Index m() const { return y.rows(); }
  /// Throws Error when y is not square, not symmetric, or not PD, or when
  /// dof < m.
  void validate() const;
};

enum class LoadingPrior { Uniform, DiffuseNormal };

/// IG(shape, scale) on psi and each upsilon_j, density prop. to
/// v^(-shape-1) exp(-scale / v). Loadings are flat unless DiffuseNormal is
/// selected, in which case they get N(0, loading_variance).
struct PriorSpec {
  double ig_shape = 1.0;
  double ig_scale = 2.0;
  LoadingPrior loading = LoadingPrior::Uniform;
  double loading_variance = 1e10;
};

template <typename Scalar>
struct FactorParameters {
  Scalar psi;
  Vector<Scalar> loadings;          // length m, loadings[0] == 1
  Vector<Scalar> unique_variances;  // length m
};

template <typename Derived>
FactorParameters<typename Derived::Scalar> unpack_theta(
    const Eigen::MatrixBase<Derived>& theta) {
  using Scalar = typename Derived::Scalar;
  const Index m = response_count(theta.size());
  FactorParameters<Scalar> p;
  p.psi = std::exp(Scalar(2) * theta[0]);
  p.loadings.resize(m);
  p.loadings[0] = Scalar(1);
  p.loadings.tail(m - 1) = theta.segment(1, m - 1);
  p.unique_variances = (Scalar(2) * theta.tail(m).array()).exp().matrix();
  return p;
}

/// Inverse of unpack_theta; loadings[0] is ignored (fixed at one).
ThetaVector pack_theta(double psi, const VectorXd& loadings,
                       const VectorXd& unique_variances);

template <typename Derived>
Matrix<typename Derived::Scalar> sigma_of_theta(const Eigen::MatrixBase<Derived>& theta) {
  const auto p = unpack_theta(theta);
  Matrix<typename Derived::Scalar> sigma = p.psi * p.loadings * p.loadings.transpose();
  sigma.diagonal() += p.unique_variances;
  return sigma;
}

template <typename Derived>
Matrix<typename Derived::Scalar> sigma_of_theta(const Eigen::MatrixBase<Derived>& theta,
                                                const FactorModelConfig& config) {
  if (theta.size() != config.q())
    throw DimensionError("theta length " + std::to_string(theta.size()) +
                         " does not match q = " + std::to_string(config.q()));
  return sigma_of_theta(theta);
}

/// Wishart log-density of data.y given Sigma(theta), without theta-free terms:
///   -dof/2 log|Sigma| - tr(Sigma^-1 y) / 2.
template <typename Derived>
typename Derived::Scalar log_likelihood(const CrossProductData& data,
                                        const Eigen::MatrixBase<Derived>& theta) {
  using Scalar = typename Derived::Scalar;
  if (theta.size() != theta_size(data.m()))
    throw DimensionError("theta length does not match data dimension");
  const Matrix<Scalar> sigma = sigma_of_theta(theta);
  const Eigen::LLT<Matrix<Scalar>> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw SingularMatrixError("Sigma(theta) is numerically singular");
  const Scalar log_det = Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
  const Scalar trace = llt.solve(data.y.template cast<Scalar>()).trace();
  return -Scalar(0.5) * Scalar(data.dof) * log_det - Scalar(0.5) * trace;
}

/// log IG(shape, scale) density of v = exp(2 x), expressed as a density in x
/// (Jacobian 2 exp(2x) included). Normalized.
template <typename Scalar>
Scalar log_ig_density_log_sd(Scalar x, double shape, double scale) {
  using std::exp;
  using std::log;
  return Scalar(std::log(2.0) + shape * std::log(scale) - std::lgamma(shape)) -
         Scalar(2.0 * shape) * x - Scalar(scale) * exp(Scalar(-2) * x);
}

template <typename Derived>
typename Derived::Scalar log_prior(const Eigen::MatrixBase<Derived>& theta,
                                   const PriorSpec& prior = {}) {
  using Scalar = typename Derived::Scalar;
  const Index m = response_count(theta.size());
  Scalar lp = log_ig_density_log_sd<Scalar>(theta[0], prior.ig_shape, prior.ig_scale);
  for (Index j = 0; j < m; ++j)
    lp += log_ig_density_log_sd<Scalar>(theta[m + j], prior.ig_shape, prior.ig_scale);
  if (prior.loading == LoadingPrior::DiffuseNormal) {
    const Scalar var(prior.loading_variance);
    const Scalar norm = Scalar(-0.5) * std::log(2.0 * M_PI * prior.loading_variance);
    for (Index j = 1; j < m; ++j) lp += norm - theta[j] * theta[j] / (Scalar(2) * var);
  }
  return lp;
}

/// Unnormalized log posterior: log_likelihood + log_prior.
template <typename Derived>
typename Derived::Scalar log_posterior(const CrossProductData& data,
                                       const Eigen::MatrixBase<Derived>& theta,
                                       const PriorSpec& prior = {}) {
  return log_likelihood(data, theta) + log_prior(theta, prior);
}

/// Analytical gradient of log_posterior in theta.
VectorXd grad_log_posterior(const CrossProductData& data, const ThetaVector& theta,
                            const PriorSpec& prior = {});

/// log_posterior and its gradient from a single factorization of Sigma.
double log_posterior_and_gradient(const CrossProductData& data, const ThetaVector& theta,
                                  VectorXd& gradient, const PriorSpec& prior = {});

/// E_{Y|theta}[Hessian of log_posterior], using E[Y] = dof * Sigma(theta).
/// Negative definite for any theta under the IG prior.
MatrixXd expected_hessian_log_posterior(const CrossProductData& data,
                                        const ThetaVector& theta,
                                        const PriorSpec& prior = {});
/// Same quantity, only the dof and dimension of the data matter.
MatrixXd expected_hessian_log_posterior(Index dof, const ThetaVector& theta,
                                        const PriorSpec& prior = {});

/// Bartlett factor A (lower triangular) with A A' ~ Wish(I_m, dof).
MatrixXd sample_bartlett_factor(Index m, Index dof, Rng& rng);

/// One draw from Wish(I_m, dof). Throws DimensionError when dof < m.
MatrixXd sample_standard_wishart(Index m, Index dof, Rng& rng);

/// Y = Sigma(theta)^{1/2} u Sigma(theta)^{1/2} with the symmetric root.
/// u must be an SPD draw from Wish(I_m, dof); dof is carried through.
CrossProductData generate_data(const MatrixXd& u, const ThetaVector& theta, Index dof);

/// Symmetric PD square root through an eigendecomposition.
MatrixXd symmetric_sqrt(const MatrixXd& spd);

}  // namespace credcal

#endif  // CREDCAL_FACTOR_MODEL_HPP
