#include "credcal/factor_model.hpp"

#include <vector>

namespace credcal {

void FactorModelConfig::validate() const {
  if (m < 3) throw DimensionError("one-factor model needs m >= 3 for identification");
  if (n - 1 < m) throw DimensionError("need n - 1 >= m for a nondegenerate Wishart");
}

void CrossProductData::validate() const {
  if (y.rows() != y.cols()) throw DimensionError("cross-product matrix must be square");
  if (y.rows() < 3) throw DimensionError("cross-product matrix must be at least 3x3");
  if (dof < y.rows()) throw DimensionError("degrees of freedom must be >= m");
  if (!y.allFinite()) throw Error("cross-product matrix has non-finite entries");
  const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
  if ((y - y.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw Error("cross-product matrix is not symmetric");
  const Eigen::LLT<MatrixXd> llt(y);
  if (llt.info() != Eigen::Success) throw SingularMatrixError("cross-product matrix is not PD");
}

ThetaVector pack_theta(double psi, const VectorXd& loadings, const VectorXd& unique_variances) {
  const Index m = loadings.size();
  if (unique_variances.size() != m) throw DimensionError("loadings/unique variances mismatch");
  ThetaVector theta(theta_size(m));
  theta[0] = 0.5 * std::log(psi);
  theta.segment(1, m - 1) = loadings.tail(m - 1);
  theta.tail(m) = 0.5 * unique_variances.array().log();
  return theta;
}

namespace {

struct SigmaFactor {
  FactorParameters<double> params;
  MatrixXd sigma_inv;
  double log_det = 0.0;
};

SigmaFactor factor_sigma(const ThetaVector& theta) {
  SigmaFactor f{unpack_theta(theta), {}, 0.0};
  MatrixXd sigma = f.params.psi * f.params.loadings * f.params.loadings.transpose();
  sigma.diagonal() += f.params.unique_variances;
  const Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw SingularMatrixError("Sigma(theta) is numerically singular");
  f.sigma_inv = llt.solve(MatrixXd::Identity(sigma.rows(), sigma.cols()));
  f.log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return f;
}

}  // namespace

double log_posterior_and_gradient(const CrossProductData& data, const ThetaVector& theta,
                                  VectorXd& gradient, const PriorSpec& prior) {
  const Index m = data.m();
  if (theta.size() != theta_size(m)) throw DimensionError("theta length does not match data");
  const SigmaFactor f = factor_sigma(theta);
  const auto& lambda = f.params.loadings;
  const double psi = f.params.psi;

  // d logL / d Sigma = W / 2 with W = S y S - dof S (as a symmetric matrix).
  const MatrixXd& s = f.sigma_inv;
  const MatrixXd sy = s * data.y;
  const MatrixXd w = sy * s - static_cast<double>(data.dof) * s;
  const VectorXd w_lambda = w * lambda;

  VectorXd g(theta.size());
  g[0] = psi * lambda.dot(w_lambda);
  g.segment(1, m - 1) = psi * w_lambda.tail(m - 1);
  g.tail(m) = f.params.unique_variances.cwiseProduct(w.diagonal());

  const double a = prior.ig_shape;
  const double b = prior.ig_scale;
  g[0] += -2.0 * a + 2.0 * b * std::exp(-2.0 * theta[0]);
  for (Index j = 0; j < m; ++j) g[m + j] += -2.0 * a + 2.0 * b * std::exp(-2.0 * theta[m + j]);
  if (prior.loading == LoadingPrior::DiffuseNormal)
    g.segment(1, m - 1) -= theta.segment(1, m - 1) / prior.loading_variance;
  gradient = std::move(g);

  const double log_lik =
      -0.5 * static_cast<double>(data.dof) * f.log_det - 0.5 * sy.trace();
  return log_lik + log_prior(theta, prior);
}

VectorXd grad_log_posterior(const CrossProductData& data, const ThetaVector& theta,
                            const PriorSpec& prior) {
  VectorXd g;
  log_posterior_and_gradient(data, theta, g, prior);
  return g;
}

MatrixXd expected_hessian_log_posterior(Index dof, const ThetaVector& theta,
                                        const PriorSpec& prior) {
  const Index m = response_count(theta.size());
  const Index q = theta.size();
  const SigmaFactor f = factor_sigma(theta);
  const auto& lambda = f.params.loadings;
  const double psi = f.params.psi;
  const MatrixXd& s = f.sigma_inv;

  // A_t = S dSigma/dtheta_t; Fisher information (dof/2) tr(A_s A_t).
  std::vector<MatrixXd> a(static_cast<std::size_t>(q));
  const VectorXd s_lambda = s * lambda;
  a[0] = 2.0 * psi * s_lambda * lambda.transpose();
  for (Index j = 1; j < m; ++j) {
    // S psi (e_j lambda' + lambda e_j')
    MatrixXd aj = psi * s.col(j) * lambda.transpose();
    aj.col(j) += psi * s_lambda;
    a[static_cast<std::size_t>(j)] = std::move(aj);
  }
  for (Index j = 0; j < m; ++j) {
    MatrixXd aj = MatrixXd::Zero(m, m);
    aj.col(j) = 2.0 * f.params.unique_variances[j] * s.col(j);
    a[static_cast<std::size_t>(m + j)] = std::move(aj);
  }

  MatrixXd h(q, q);
  const double half_dof = 0.5 * static_cast<double>(dof);
  for (Index r = 0; r < q; ++r) {
    for (Index c = r; c < q; ++c) {
      // tr(A_r A_c) = sum_ij A_r(i,j) A_c(j,i)
      const double tr = a[static_cast<std::size_t>(r)]
                            .cwiseProduct(a[static_cast<std::size_t>(c)].transpose())
                            .sum();
      h(r, c) = h(c, r) = -half_dof * tr;
    }
  }

  const double b = prior.ig_scale;
  h(0, 0) += -4.0 * b * std::exp(-2.0 * theta[0]);
  for (Index j = 0; j < m; ++j) h(m + j, m + j) += -4.0 * b * std::exp(-2.0 * theta[m + j]);
  if (prior.loading == LoadingPrior::DiffuseNormal)
    for (Index j = 1; j < m; ++j) h(j, j) -= 1.0 / prior.loading_variance;
  return h;
}

MatrixXd expected_hessian_log_posterior(const CrossProductData& data, const ThetaVector& theta,
                                        const PriorSpec& prior) {
  if (theta.size() != theta_size(data.m()))
    throw DimensionError("theta length does not match data");
  return expected_hessian_log_posterior(data.dof, theta, prior);
}

MatrixXd sample_bartlett_factor(Index m, Index dof, Rng& rng) {
  if (m < 1) throw DimensionError("Wishart dimension must be positive");
  if (dof < m) throw DimensionError("Wishart degrees of freedom must be >= m");
  MatrixXd a = MatrixXd::Zero(m, m);
  for (Index i = 0; i < m; ++i) {
    a(i, i) = std::sqrt(rng.chi_squared(static_cast<double>(dof - i)));
    for (Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  return a;
}

MatrixXd sample_standard_wishart(Index m, Index dof, Rng& rng) {
  const MatrixXd a = sample_bartlett_factor(m, dof, rng);
  MatrixXd u = a * a.transpose();
  return 0.5 * (u + u.transpose());
}

MatrixXd symmetric_sqrt(const MatrixXd& spd) {
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(spd);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
    throw SingularMatrixError("matrix square root needs an SPD argument");
  return eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

CrossProductData generate_data(const MatrixXd& u, const ThetaVector& theta, Index dof) {
  const Index m = response_count(theta.size());
  if (u.rows() != m || u.cols() != m) throw DimensionError("Wishart draw has wrong dimension");
  if (Eigen::LLT<MatrixXd>(u).info() != Eigen::Success)
    throw SingularMatrixError("Wishart draw is not SPD");
  const MatrixXd root = symmetric_sqrt(sigma_of_theta(theta));
  MatrixXd y = root * u * root;
  y = 0.5 * (y + y.transpose()).eval();
  return {std::move(y), dof};
}

}  // namespace credcal
