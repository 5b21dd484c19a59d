#ifndef CREDCAL_SPRSA_HPP
#define CREDCAL_SPRSA_HPP

// Calibration of credible-region thresholds to frequentist validity.
//
// For a threshold xi, the calibrated level is the supremum of the p-value
// function pi_y(theta) = P_{Y|theta}{T(Y, theta) >= T(y, theta)} over the
// region boundary {theta : T(y, theta) = xi}. It is found by stochastic
// gradient ascent on that level set: a simultaneous-perturbation finite
// difference estimate of grad pi, projected onto the tangent space, followed
// by a ray retraction anchored at the MAP. The calibrated level is the
// running average of the indicator pairs used by the gradient estimates.

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "credcal/mcmc.hpp"
#include "credcal/random.hpp"
#include "credcal/statistics.hpp"

namespace credcal {

/// a_k = alpha_rate / k^beta_rate,  c_k = gamma_rate / k^delta_rate.
struct TuningConstants {
  double alpha_rate = 0.1;
  double beta_rate = 0.65;
  double gamma_rate = 0.05;
  double delta_rate = 0.149;
  long iterations = 50000;

  /// Requires alpha_rate >= 0 (0 freezes the iterate), gamma_rate > 0,
  /// delta_rate in (0, 1/2), beta_rate in (delta_rate + 1/2, 1], iterations > 0.
  void validate() const;
  /// sum a_k^2 / c_k^2 < inf, i.e. 2 (beta - delta) > 1.
  bool step_ratio_summable() const { return 2.0 * (beta_rate - delta_rate) > 1.0; }
};

struct Rates {
  double a;
  double c;
};

Rates rates(long k, const TuningConstants& tuning);

/// A data model together with a test statistic, as seen by the calibrator.
class CalibrationProblem {
 public:
  virtual ~CalibrationProblem() = default;

  virtual Index dim() const = 0;
  /// Anchor of the retraction rays, theta_hat(y).
  virtual const VectorXd& center() const = 0;
  /// T(y, theta) on the observed data.
  virtual double observed_stat(const VectorXd& theta) const = 0;
  virtual VectorXd observed_stat_grad(const VectorXd& theta) const = 0;
  /// True when T(y, center + x d) = x^2 T(y, center + d).
  virtual bool quadratic_along_rays() const { return false; }
  /// One draw of the random input U of the data generator.
  virtual MatrixXd draw_noise(Rng& rng) const = 0;
  /// T(g(u, theta), theta); nullopt when the statistic cannot be computed on
  /// the simulated data (e.g. the inner MAP solve failed).
  virtual std::optional<double> simulated_stat(const MatrixXd& u,
                                               const VectorXd& theta) const = 0;
};

/// One-factor model with a Wald or PDR statistic. Simulated-data MAP solves
/// warm-start from the observed MAP.
class FactorCalibrationProblem final : public CalibrationProblem {
 public:
  FactorCalibrationProblem(CrossProductData data, MapFit fit, StatisticKind kind,
                           PriorSpec prior = {}, MapOptions map_options = {});

  Index dim() const override { return fit_.theta_hat.size(); }
  const VectorXd& center() const override { return fit_.theta_hat; }
  double observed_stat(const VectorXd& theta) const override;
  VectorXd observed_stat_grad(const VectorXd& theta) const override;
  bool quadratic_along_rays() const override { return kind_ == StatisticKind::Wald; }
  MatrixXd draw_noise(Rng& rng) const override;
  std::optional<double> simulated_stat(const MatrixXd& u, const VectorXd& theta) const override;

  const CrossProductData& data() const { return data_; }
  const MapFit& fit() const { return fit_; }
  StatisticKind kind() const { return kind_; }
  const PriorSpec& prior() const { return prior_; }

 private:
  CrossProductData data_;
  MapFit fit_;
  StatisticKind kind_;
  PriorSpec prior_;
  MapOptions map_options_;
  double log_posterior_at_map_;
};

/// Scalar Gaussian location model y ~ N(theta, sd^2) with flat prior and
/// statistic ((y - theta) / sd)^2, whose p-value function is the chi-square(1)
/// survival function. Used to check the calibrator against closed forms.
class GaussianLocationProblem final : public CalibrationProblem {
 public:
  explicit GaussianLocationProblem(double y, double sd = 1.0);

  Index dim() const override { return 1; }
  const VectorXd& center() const override { return center_; }
  double observed_stat(const VectorXd& theta) const override;
  VectorXd observed_stat_grad(const VectorXd& theta) const override;
  bool quadratic_along_rays() const override { return true; }
  MatrixXd draw_noise(Rng& rng) const override;
  std::optional<double> simulated_stat(const MatrixXd& u, const VectorXd& theta) const override;

 private:
  double sd_;
  VectorXd center_;
};

/// No root of T = xi along the retraction ray.
class RayEscapeError : public Error {
 public:
  using Error::Error;
};

/// Projection of v onto the orthogonal complement of normal.
VectorXd project_tangent(const VectorXd& v, const VectorXd& normal);

/// chi with T(center + chi (point - center)) = xi. Uses the closed form for
/// ray-quadratic statistics unless force_root_finder is set; otherwise
/// brackets by doubling from chi = 1 and bisects until the bracket collapses;
/// the result must satisfy |T - xi| <= 1e-8.
double retraction_scale(const CalibrationProblem& problem, const VectorXd& point, double xi,
                        bool force_root_finder = false);

/// retr_theta(h) = center + chi (theta + h - center).
VectorXd retract(const CalibrationProblem& problem, const VectorXd& theta, const VectorXd& h,
                 double xi);

struct GradientEstimate {
  VectorXd ambient;
  VectorXd riemannian;
  bool plus = false;   // indicator at theta + c Delta
  bool minus = false;  // indicator at theta - c Delta
  bool ok = false;     // false when a simulated statistic was unavailable
  double delta_sum = 0.0;
};

/// One simultaneous-perturbation estimate of the Riemannian gradient of the
/// p-value function at theta. Draws u, then the Rademacher vector, from rng.
GradientEstimate riem_grad_fd(const CalibrationProblem& problem, const VectorXd& theta, double c,
                              Rng& rng);

struct SprsaOptions {
  bool store_trace = false;
  /// Leading iterations left out of the average (0 = plain average).
  long average_discard = 0;
  /// Halvings of a step whose retraction ray escapes before giving up on it.
  int max_step_halvings = 30;
  /// Fraction of skipped iterations above which a result is unreliable.
  double skip_budget = 0.05;
};

struct TraceEntry {
  double a = 0.0;
  double c = 0.0;
  bool plus = false;
  bool minus = false;
  bool skipped = false;
  double step_norm = 0.0;
  /// |T(y, theta^(k+1)) - xi| after the update.
  double residual = 0.0;
  double delta_sum = 0.0;
};

struct CalibrationResult {
  double xi = 0.0;
  double alpha_hat_star = 0.0;
  /// Batch-means Monte Carlo standard error of alpha_hat_star.
  double mc_se = 0.0;
  ThetaVector theta_final;
  long iterations = 0;
  long used = 0;
  long skipped = 0;
  bool reliable = true;
  std::vector<TraceEntry> trace;
};

CalibrationResult sprsa(const CalibrationProblem& problem, double xi, const VectorXd& theta_init,
                        const TuningConstants& tuning, Rng& rng, const SprsaOptions& options = {});

CalibrationResult sprsa(const CrossProductData& data, const MapFit& fit, StatisticKind kind,
                        double xi, const ThetaVector& theta_init, const TuningConstants& tuning,
                        Rng& rng, const SprsaOptions& options = {}, const PriorSpec& prior = {});

/// Candidate whose statistic is closest to xi, retracted onto the boundary.
VectorXd initial_boundary_point(const CalibrationProblem& problem,
                                const std::vector<VectorXd>& candidates, double xi);

ThetaVector initial_boundary_point(const CrossProductData& data, const MapFit& fit,
                                   StatisticKind kind, double xi, const PosteriorDraws& draws,
                                   const PriorSpec& prior = {});

struct CalibrationCurve {
  std::vector<double> nominal_alphas;
  std::vector<double> thresholds;
  std::vector<double> calibrated_alphas;
  std::vector<double> mc_se;

  std::size_t size() const { return nominal_alphas.size(); }
};

/// Stream seed of the i-th threshold of a curve.
inline std::uint64_t threshold_seed(std::uint64_t seed, std::size_t index) {
  return derive_seed(seed, {0x43555256ULL, static_cast<std::uint64_t>(index)});
}

/// One sprsa run per nominal level, at the (1 - alpha) posterior quantile of
/// the statistic. Runs use disjoint streams, so results do not depend on
/// `threads`.
CalibrationCurve calibrate_curve(const FactorCalibrationProblem& problem,
                                 const PosteriorDraws& draws,
                                 const std::vector<double>& nominal_alphas,
                                 const TuningConstants& tuning, std::uint64_t seed,
                                 unsigned threads = 1, const SprsaOptions& options = {},
                                 std::vector<CalibrationResult>* results = nullptr);

/// Calibrated contour alpha*(T(y, theta)) read off a curve: piecewise-linear
/// in the statistic after an isotonic (nonincreasing) fit, clamped to the
/// extreme grid values outside the grid. Returns 1 at the MAP.
double calibrated_possibility(const ThetaVector& theta, const CalibrationCurve& curve,
                              const CalibrationProblem& problem);

/// Exact mode: runs sprsa at xi = T(y, theta) starting from theta itself.
CalibrationResult calibrated_possibility_exact(const ThetaVector& theta,
                                               const CalibrationProblem& problem,
                                               const TuningConstants& tuning, Rng& rng,
                                               const SprsaOptions& options = {});

/// Nonincreasing least-squares fit (pool adjacent violators), equal weights.
std::vector<double> isotonic_nonincreasing(const std::vector<double>& values);

}  // namespace credcal

#endif  // CREDCAL_SPRSA_HPP
