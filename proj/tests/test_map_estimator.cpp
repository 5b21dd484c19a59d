#include <doctest.h>

#include "credcal/map_estimator.hpp"
#include "test_util.hpp"

using namespace credcal;
using credcal::testing::scene_truth;
using credcal::testing::simulate;

TEST_SUITE("map-estimator") {

TEST_CASE("default_init at y = dof * I") {
  const CrossProductData data{99.0 * MatrixXd::Identity(5, 5), 99};
  const auto p = unpack_theta(default_init(data));
  CHECK(p.psi == doctest::Approx(0.5));
  CHECK(p.loadings == VectorXd::Ones(5));
  for (Index j = 0; j < 5; ++j) CHECK(p.unique_variances[j] == doctest::Approx(0.5));
}

TEST_CASE("default_init floors residual variances and stays finite") {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const CrossProductData d = simulate(2.0 * rng.normal_vector(10), 10 + i % 90, rng);
    const ThetaVector init = default_init(d);
    CHECK(init.allFinite());
    CHECK(unpack_theta(init).unique_variances.minCoeff() >= 1e-3 * (1 - 1e-12));
  }
}

TEST_CASE("stationarity, idempotence and the Wald covariance") {
  Rng rng(2);
  for (Scene scene : {Scene::UniformCommunality, Scene::FixedLow, Scene::FixedHigh}) {
    const CrossProductData data = simulate(scene_truth(scene), 99, rng);
    const MapFit fit = find_map(data, default_init(data));
    REQUIRE(fit.converged);
    CHECK(grad_log_posterior(data, fit.theta_hat).norm() <= 1e-6);
    CHECK(fit.log_posterior == doctest::Approx(log_posterior(data, fit.theta_hat)).epsilon(1e-14));

    const MapFit again = find_map(data, fit.theta_hat);
    CHECK((again.theta_hat - fit.theta_hat).cwiseAbs().maxCoeff() <= 1e-8);

    const MatrixXd neg_h = -expected_hessian_log_posterior(data, fit.theta_hat);
    CHECK((fit.neg_expected_hessian - neg_h).norm() == 0.0);
    CHECK_FALSE(fit.hessian_repaired);
    CHECK((fit.sigma_theta_hat * neg_h - MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((fit.sigma_theta_hat - fit.sigma_theta_hat.transpose()).norm() == 0.0);
    CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(fit.sigma_theta_hat).eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("consistency at dof = 9999") {
  Rng rng(3);
  const ThetaVector truth = scene_truth(Scene::FixedHigh);
  const CrossProductData data = simulate(truth, 9999, rng);
  const MapFit fit = find_map(data, default_init(data));
  REQUIRE(fit.converged);
  CHECK((fit.theta_hat - truth).cwiseAbs().maxCoeff() <= 5e-2);
}

TEST_CASE("ascent: the log posterior never decreases between accepted iterates") {
  // Each truncated run's end point is an accepted iterate of the full run.
  Rng rng(4);
  const CrossProductData data = simulate(scene_truth(Scene::UniformCommunality), 99, rng);
  const ThetaVector init = default_init(data);
  double prev = log_posterior(data, init);
  for (int iters = 1; iters <= 30; ++iters) {
    MapOptions opt;
    opt.max_iterations = iters;
    const MapFit fit = find_map(data, init, {}, opt);
    CHECK(fit.log_posterior >= prev);
    prev = fit.log_posterior;
  }
}

TEST_CASE("multi-start agreement") {
  Rng rng(5);
  int agree = 0;
  const int datasets = 200;
  for (int d = 0; d < datasets; ++d) {
    const CrossProductData data = simulate(scene_truth(Scene::UniformCommunality), 99, rng);
    const ThetaVector init = default_init(data);
    const MapFit base = find_map(data, init);
    bool all = base.converged;
    for (int s = 0; s < 5 && all; ++s) {
      const MapFit other = find_map(data, init + 0.2 * rng.normal_vector(10));
      all = other.converged && std::abs(other.log_posterior - base.log_posterior) <= 1e-6;
    }
    agree += all;
  }
  CHECK(agree >= 0.95 * datasets);
}

TEST_CASE("non-convergence is flagged, not thrown") {
  Rng rng(6);
  const CrossProductData data = simulate(scene_truth(Scene::FixedLow), 99, rng);
  MapOptions opt;
  opt.max_iterations = 1;
  const MapFit fit = find_map(data, default_init(data) + VectorXd::Constant(10, 1.0), {}, opt);
  CHECK_FALSE(fit.converged);
  CHECK(fit.grad_norm > 1e-6);
  CHECK_THROWS_AS(find_map(data, VectorXd::Constant(10, NAN)), Error);
  CHECK_THROWS_AS(find_map(data, VectorXd::Zero(8)), DimensionError);
}

TEST_CASE("ridge repair") {
  MatrixXd a = MatrixXd::Identity(3, 3);
  a(2, 2) = -1e-6;
  const PdRepair r = repair_to_pd(a);
  CHECK(r.repaired);
  CHECK(r.ridge == doctest::Approx(1e-5));
  CHECK(Eigen::LLT<MatrixXd>(r.matrix).info() == Eigen::Success);
  const PdRepair ok = repair_to_pd(MatrixXd::Identity(3, 3));
  CHECK_FALSE(ok.repaired);
  CHECK(ok.ridge == 0.0);
}

}  // TEST_SUITE
