#ifndef CREDCAL_MAP_ESTIMATOR_HPP
#define CREDCAL_MAP_ESTIMATOR_HPP

#include "credcal/factor_model.hpp"

namespace credcal {

struct MapOptions {
  double grad_tol = 1e-6;
  int max_iterations = 500;
};

/// Maximum a posteriori fit together with the Wald covariance estimate.
struct MapFit {
  ThetaVector theta_hat;
  /// -E[Hessian of log posterior] at theta_hat, as computed (may be non-PD).
  MatrixXd neg_expected_hessian;
  /// Inverse of the (possibly ridge-repaired) negative expected Hessian.
  MatrixXd sigma_theta_hat;
  /// sigma_theta_hat^{-1}; equals neg_expected_hessian unless repaired.
  MatrixXd wald_precision;
  double log_posterior = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool hessian_repaired = false;
  double ridge = 0.0;
};

struct PdRepair {
  MatrixXd matrix;
  double ridge = 0.0;
  bool repaired = false;
};

/// Adds eps*I (eps = 1e-8, then x10) until the symmetric matrix is PD.
PdRepair repair_to_pd(const MatrixXd& symmetric);

/// BFGS ascent on log_posterior with backtracking line search. The initial
/// inverse-Hessian approximation is the inverse negative expected Hessian at
/// the starting point, which makes warm starts converge in a few steps.
/// Non-convergence is reported through MapFit::converged, not thrown.
MapFit find_map(const CrossProductData& data, const ThetaVector& init,
                const PriorSpec& prior = {}, const MapOptions& options = {});

/// Moment-based starting point: psi = y11 / dof / 2, all loadings 1, unique
/// variances from the residual diagonal floored at 1e-3.
ThetaVector default_init(const CrossProductData& data);

}  // namespace credcal

#endif  // CREDCAL_MAP_ESTIMATOR_HPP
