#include "credcal/map_estimator.hpp"

#include <cmath>
#include <limits>

namespace credcal {

PdRepair repair_to_pd(const MatrixXd& symmetric) {
  PdRepair out{symmetric, 0.0, false};
  if (Eigen::LLT<MatrixXd>(out.matrix).info() == Eigen::Success) return out;
  const Index q = symmetric.rows();
  for (double eps = 1e-8; eps < 1e300; eps *= 10.0) {
    MatrixXd candidate = symmetric + eps * MatrixXd::Identity(q, q);
    if (Eigen::LLT<MatrixXd>(candidate).info() == Eigen::Success) {
      out.matrix = std::move(candidate);
      out.ridge = eps;
      out.repaired = true;
      return out;
    }
  }
  throw SingularMatrixError("ridge repair failed to produce a PD matrix");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Negative log posterior and its gradient; +inf where Sigma is singular or
// values overflow.
double objective(const CrossProductData& data, const ThetaVector& theta,
                 const PriorSpec& prior, VectorXd& gradient) {
  if (!theta.allFinite()) return kInf;
  try {
    const double v = -log_posterior_and_gradient(data, theta, gradient, prior);
    gradient = -gradient;
    return std::isfinite(v) && gradient.allFinite() ? v : kInf;
  } catch (const SingularMatrixError&) {
    return kInf;
  }
}

MatrixXd inverse_curvature(const CrossProductData& data, const ThetaVector& theta,
                           const PriorSpec& prior) {
  const Index q = theta.size();
  try {
    const PdRepair neg_h = repair_to_pd(-expected_hessian_log_posterior(data, theta, prior));
    return Eigen::LLT<MatrixXd>(neg_h.matrix).solve(MatrixXd::Identity(q, q));
  } catch (const SingularMatrixError&) {
    return MatrixXd::Identity(q, q) * 1e-2;
  }
}

}  // namespace

MapFit find_map(const CrossProductData& data, const ThetaVector& init, const PriorSpec& prior,
                const MapOptions& options) {
  if (!init.allFinite()) throw Error("find_map: non-finite starting point");
  if (init.size() != theta_size(data.m())) throw DimensionError("find_map: theta length");

  constexpr double kArmijo = 1e-4;
  constexpr double kMaxStep = 2.0;  // infinity-norm cap on a trial step in theta
  const double eps = std::numeric_limits<double>::epsilon();

  ThetaVector theta = init;
  VectorXd g;
  double f = objective(data, theta, prior, g);
  if (!std::isfinite(f)) throw SingularMatrixError("find_map: log posterior not finite at init");
  MatrixXd h_inv = inverse_curvature(data, theta, prior);

  MapFit fit;
  int iter = 0;
  bool just_reset = true;
  while (g.norm() > options.grad_tol && iter < options.max_iterations) {
    ++iter;
    VectorXd p = -h_inv * g;
    if (!(g.dot(p) < 0.0)) {
      h_inv = inverse_curvature(data, theta, prior);
      p = -h_inv * g;
      just_reset = true;
    }
    const double p_max = p.cwiseAbs().maxCoeff();
    if (p_max > kMaxStep) p *= kMaxStep / p_max;

    const double slope = g.dot(p);
    double t = 1.0;
    bool accepted = false;
    ThetaVector trial;
    double f_trial = kInf;
    VectorXd g_trial;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      trial = theta + t * p;
      f_trial = objective(data, trial, prior, g_trial);
      if (!std::isfinite(f_trial)) continue;
      if (f_trial <= f + kArmijo * t * slope) {
        accepted = true;
        break;
      }
      // Near the optimum the decrease falls below rounding of f; accept a
      // step that does not raise f beyond rounding and shrinks the gradient.
      if (f_trial <= f + 4.0 * eps * std::abs(f) && g_trial.norm() < g.norm()) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (just_reset) break;
      h_inv = inverse_curvature(data, theta, prior);
      just_reset = true;
      continue;
    }
    just_reset = false;

    const VectorXd s = trial - theta;
    const VectorXd yv = g_trial - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      const VectorXd hy = h_inv * yv;
      // H+ = (I - rho s y') H (I - rho y s') + rho s s'
      h_inv += (rho * rho * yv.dot(hy) + rho) * (s * s.transpose()) -
               rho * (hy * s.transpose() + s * hy.transpose());
    }
    theta = std::move(trial);
    f = f_trial;
    g = std::move(g_trial);
  }

  fit.theta_hat = theta;
  fit.log_posterior = -f;
  fit.grad_norm = g.norm();
  fit.iterations = iter;
  fit.converged = fit.grad_norm <= options.grad_tol;
  fit.neg_expected_hessian = -expected_hessian_log_posterior(data, theta, prior);
  PdRepair repaired = repair_to_pd(fit.neg_expected_hessian);
  fit.hessian_repaired = repaired.repaired;
  fit.ridge = repaired.ridge;
  const Eigen::LLT<MatrixXd> llt(repaired.matrix);
  fit.sigma_theta_hat = llt.solve(MatrixXd::Identity(theta.size(), theta.size()));
  fit.sigma_theta_hat = 0.5 * (fit.sigma_theta_hat + fit.sigma_theta_hat.transpose()).eval();
  fit.wald_precision = std::move(repaired.matrix);
  return fit;
}

ThetaVector default_init(const CrossProductData& data) {
  const Index m = data.m();
  const double dof = static_cast<double>(data.dof);
  const double psi = 0.5 * data.y(0, 0) / dof;
  const VectorXd loadings = VectorXd::Ones(m);
  VectorXd uniques(m);
  for (Index j = 0; j < m; ++j) uniques[j] = std::max(data.y(j, j) / dof - psi, 1e-3);
  return pack_theta(std::max(psi, 1e-3), loadings, uniques);
}

}  // namespace credcal
