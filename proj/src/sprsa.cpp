#include "credcal/sprsa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "credcal/parallel.hpp"

namespace credcal {

void TuningConstants::validate() const {
  if (!(alpha_rate >= 0.0)) throw Error("tuning: alpha must be >= 0");
  if (!(gamma_rate > 0.0)) throw Error("tuning: gamma must be > 0");
  if (!(delta_rate > 0.0 && delta_rate < 0.5)) throw Error("tuning: delta must lie in (0, 1/2)");
  if (!(beta_rate > delta_rate + 0.5 && beta_rate <= 1.0))
    throw Error("tuning: beta must lie in (delta + 1/2, 1]");
  if (iterations <= 0) throw Error("tuning: iteration count must be positive");
}

Rates rates(long k, const TuningConstants& tuning) {
  if (k < 1) throw Error("rates: k must be >= 1");
  const double kd = static_cast<double>(k);
  return {tuning.alpha_rate / std::pow(kd, tuning.beta_rate),
          tuning.gamma_rate / std::pow(kd, tuning.delta_rate)};
}

// ---------------------------------------------------------------------------

FactorCalibrationProblem::FactorCalibrationProblem(CrossProductData data, MapFit fit,
                                                   StatisticKind kind, PriorSpec prior,
                                                   MapOptions map_options)
    : data_(std::move(data)),
      fit_(std::move(fit)),
      kind_(kind),
      prior_(prior),
      map_options_(map_options),
      log_posterior_at_map_(log_posterior(data_, fit_.theta_hat, prior_)) {}

double FactorCalibrationProblem::observed_stat(const VectorXd& theta) const {
  if (kind_ == StatisticKind::Wald) return wald_stat(fit_, theta);
  return -2.0 * (log_posterior(data_, theta, prior_) - log_posterior_at_map_);
}

VectorXd FactorCalibrationProblem::observed_stat_grad(const VectorXd& theta) const {
  return grad_stat(kind_, data_, fit_, theta, prior_);
}

MatrixXd FactorCalibrationProblem::draw_noise(Rng& rng) const {
  return sample_standard_wishart(data_.m(), data_.dof, rng);
}

std::optional<double> FactorCalibrationProblem::simulated_stat(const MatrixXd& u,
                                                               const VectorXd& theta) const {
  try {
    const CrossProductData sim = generate_data(u, theta, data_.dof);
    const MapFit sim_fit = find_map(sim, fit_.theta_hat, prior_, map_options_);
    if (!sim_fit.converged) return std::nullopt;
    if (kind_ == StatisticKind::Wald) return wald_stat(sim_fit, theta);
    return -2.0 * (log_posterior(sim, theta, prior_) - sim_fit.log_posterior);
  } catch (const Error&) {
    return std::nullopt;
  }
}

GaussianLocationProblem::GaussianLocationProblem(double y, double sd)
    : sd_(sd), center_(VectorXd::Constant(1, y)) {
  if (!(sd > 0.0)) throw Error("GaussianLocationProblem: sd must be positive");
}

double GaussianLocationProblem::observed_stat(const VectorXd& theta) const {
  const double z = (center_[0] - theta[0]) / sd_;
  return z * z;
}

VectorXd GaussianLocationProblem::observed_stat_grad(const VectorXd& theta) const {
  VectorXd g = VectorXd::Constant(1, -2.0 * (center_[0] - theta[0]) / (sd_ * sd_));
  if (g.norm() < kZeroGradientTol) throw ZeroGradientError("zero gradient at the center");
  return g;
}

MatrixXd GaussianLocationProblem::draw_noise(Rng& rng) const {
  return MatrixXd::Constant(1, 1, rng.normal());
}

std::optional<double> GaussianLocationProblem::simulated_stat(const MatrixXd& u,
                                                              const VectorXd&) const {
  // Y = theta + sd u, theta_hat(Y) = Y, so T(Y, theta) = u^2.
  return u(0, 0) * u(0, 0);
}

// ---------------------------------------------------------------------------

VectorXd project_tangent(const VectorXd& v, const VectorXd& normal) {
  const double nn = normal.squaredNorm();
  if (!(nn > 0.0)) throw ZeroGradientError("projection onto a degenerate tangent space");
  return v - normal * (normal.dot(v) / nn);
}

namespace {

double safe_stat(const CalibrationProblem& problem, const VectorXd& theta) {
  try {
    const double t = problem.observed_stat(theta);
    return std::isnan(t) ? std::numeric_limits<double>::infinity() : t;
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

double retraction_scale(const CalibrationProblem& problem, const VectorXd& point, double xi,
                        bool force_root_finder) {
  const VectorXd& center = problem.center();
  const VectorXd d = point - center;
  if (!(d.norm() > 0.0)) throw RayEscapeError("retraction ray is degenerate (point at the MAP)");

  if (problem.quadratic_along_rays() && !force_root_finder) {
    const double t1 = problem.observed_stat(point);
    if (!(t1 > 0.0)) throw RayEscapeError("statistic is zero along the retraction ray");
    return std::sqrt(xi / t1);
  }

  auto f = [&](double x) { return safe_stat(problem, center + x * d) - xi; };
  double lo = 0.0;
  double hi = 1.0;
  double f_hi = f(hi);
  int doublings = 0;
  while (f_hi < 0.0) {
    if (++doublings > 64) throw RayEscapeError("statistic never reaches xi along the ray");
    lo = hi;
    hi *= 2.0;
    f_hi = f(hi);
  }
  // Bisect until the bracket collapses so chi itself is accurate, not just T.
  double x = hi;
  double fx = f_hi;
  for (int it = 0; it < 200 && fx != 0.0; ++it) {
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
    x = 0.5 * (lo + hi);
    fx = f(x);
    if (fx < 0.0)
      lo = x;
    else
      hi = x;
  }
  if (!(std::abs(fx) <= 1e-8)) {
    x = hi;
    fx = f(hi);
  }
  if (std::abs(fx) <= 1e-8) return x;
  throw RayEscapeError("retraction bisection did not reach |T - xi| <= 1e-8");
}

VectorXd retract(const CalibrationProblem& problem, const VectorXd& theta, const VectorXd& h,
                 double xi) {
  const VectorXd point = theta + h;
  const double chi = retraction_scale(problem, point, xi);
  return problem.center() + chi * (point - problem.center());
}

GradientEstimate riem_grad_fd(const CalibrationProblem& problem, const VectorXd& theta, double c,
                              Rng& rng) {
  const MatrixXd u = problem.draw_noise(rng);
  const VectorXd delta = rng.rademacher_vector(problem.dim());

  GradientEstimate est;
  est.delta_sum = delta.sum();
  const VectorXd theta_plus = theta + c * delta;
  const VectorXd theta_minus = theta - c * delta;
  const auto sim_plus = problem.simulated_stat(u, theta_plus);
  const auto sim_minus = problem.simulated_stat(u, theta_minus);
  if (!sim_plus || !sim_minus) {
    est.ok = false;
    est.ambient = VectorXd::Zero(problem.dim());
    est.riemannian = est.ambient;
    return est;
  }
  est.ok = true;
  est.plus = *sim_plus >= problem.observed_stat(theta_plus);
  est.minus = *sim_minus >= problem.observed_stat(theta_minus);
  // (2 c Delta)^{-1} taken elementwise; 1 / Delta_i = Delta_i.
  const double diff = (est.plus ? 1.0 : 0.0) - (est.minus ? 1.0 : 0.0);
  est.ambient = (diff / (2.0 * c)) * delta;
  est.riemannian = project_tangent(est.ambient, problem.observed_stat_grad(theta));
  return est;
}

namespace {

double batch_means_se(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t batches = std::min<std::size_t>(20, n);
  const std::size_t len = n / batches;
  std::vector<double> means(batches, 0.0);
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) means[b] += values[i];
    means[b] /= static_cast<double>(len);
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / batches;
  double ss = 0.0;
  for (double m : means) ss += (m - grand) * (m - grand);
  return std::sqrt(ss / (batches - 1.0) / batches);
}

}  // namespace

CalibrationResult sprsa(const CalibrationProblem& problem, double xi, const VectorXd& theta_init,
                        const TuningConstants& tuning, Rng& rng, const SprsaOptions& options) {
  tuning.validate();
  if (!(xi > 0.0)) throw Error("sprsa: xi must be > 0");
  if (!theta_init.allFinite() || theta_init.size() != problem.dim())
    throw Error("sprsa: invalid starting value");

  VectorXd theta = retract(problem, theta_init, VectorXd::Zero(problem.dim()), xi);
  problem.observed_stat_grad(theta);  // refuse to start at a non-regular point

  CalibrationResult result;
  result.xi = xi;
  result.iterations = tuning.iterations;
  if (options.store_trace) result.trace.reserve(static_cast<std::size_t>(tuning.iterations));
  std::vector<double> pair_means;
  pair_means.reserve(static_cast<std::size_t>(tuning.iterations));

  for (long k = 1; k <= tuning.iterations; ++k) {
    const Rates r = rates(k, tuning);
    TraceEntry entry{r.a, r.c, false, false, false, 0.0, 0.0, 0.0};
    GradientEstimate est;
    try {
      est = riem_grad_fd(problem, theta, r.c, rng);
    } catch (const ZeroGradientError&) {
      est.ok = false;
    }
    entry.delta_sum = est.delta_sum;
    if (!est.ok) {
      ++result.skipped;
      entry.skipped = true;
    } else {
      entry.plus = est.plus;
      entry.minus = est.minus;
      if (k > options.average_discard)
        pair_means.push_back(0.5 * ((est.plus ? 1.0 : 0.0) + (est.minus ? 1.0 : 0.0)));
      VectorXd h = r.a * est.riemannian;
      if (h.squaredNorm() > 0.0) {
        for (int halving = 0; halving <= options.max_step_halvings; ++halving) {
          try {
            theta = retract(problem, theta, h, xi);
            entry.step_norm = h.norm();
            break;
          } catch (const RayEscapeError&) {
            h *= 0.5;
          }
        }
      }
    }
    if (options.store_trace) {
      entry.residual = std::abs(problem.observed_stat(theta) - xi);
      result.trace.push_back(entry);
    }
  }

  result.used = static_cast<long>(pair_means.size());
  result.alpha_hat_star =
      pair_means.empty()
          ? 0.0
          : std::accumulate(pair_means.begin(), pair_means.end(), 0.0) / pair_means.size();
  result.mc_se = batch_means_se(pair_means);
  result.reliable = !pair_means.empty() &&
                    static_cast<double>(result.skipped) <=
                        options.skip_budget * static_cast<double>(tuning.iterations);
  result.theta_final = theta;
  return result;
}

CalibrationResult sprsa(const CrossProductData& data, const MapFit& fit, StatisticKind kind,
                        double xi, const ThetaVector& theta_init, const TuningConstants& tuning,
                        Rng& rng, const SprsaOptions& options, const PriorSpec& prior) {
  const FactorCalibrationProblem problem(data, fit, kind, prior);
  return sprsa(problem, xi, theta_init, tuning, rng, options);
}

VectorXd initial_boundary_point(const CalibrationProblem& problem,
                                const std::vector<VectorXd>& candidates, double xi) {
  if (candidates.empty()) throw Error("initial_boundary_point: no candidate draws");
  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!((candidates[i] - problem.center()).norm() > 0.0)) continue;
    order.emplace_back(std::abs(safe_stat(problem, candidates[i]) - xi), i);
  }
  if (order.empty()) throw Error("initial_boundary_point: every draw sits at the MAP");
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  const VectorXd zero = VectorXd::Zero(problem.dim());
  for (const auto& [gap, i] : order) {
    try {
      return retract(problem, candidates[i], zero, xi);
    } catch (const RayEscapeError&) {
      continue;
    }
  }
  throw RayEscapeError("initial_boundary_point: no draw's ray reaches the boundary");
}

ThetaVector initial_boundary_point(const CrossProductData& data, const MapFit& fit,
                                   StatisticKind kind, double xi, const PosteriorDraws& draws,
                                   const PriorSpec& prior) {
  const FactorCalibrationProblem problem(data, fit, kind, prior);
  return initial_boundary_point(problem, draws.draws, xi);
}

CalibrationCurve calibrate_curve(const FactorCalibrationProblem& problem,
                                 const PosteriorDraws& draws,
                                 const std::vector<double>& nominal_alphas,
                                 const TuningConstants& tuning, std::uint64_t seed,
                                 unsigned threads, const SprsaOptions& options,
                                 std::vector<CalibrationResult>* results) {
  tuning.validate();
  const auto thresholds = posterior_quantile_thresholds(
      draws, problem.kind(), problem.data(), problem.fit(), nominal_alphas, problem.prior());
  std::vector<CalibrationResult> runs(thresholds.size());
  parallel_for(thresholds.size(), threads, [&](std::size_t i) {
    const double xi = thresholds[i].xi();
    const VectorXd init = initial_boundary_point(problem, draws.draws, xi);
    Rng rng(threshold_seed(seed, i));
    runs[i] = sprsa(problem, xi, init, tuning, rng, options);
  });

  CalibrationCurve curve;
  curve.nominal_alphas = nominal_alphas;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    curve.thresholds.push_back(thresholds[i].xi());
    curve.calibrated_alphas.push_back(runs[i].alpha_hat_star);
    curve.mc_se.push_back(runs[i].mc_se);
  }
  if (results) *results = std::move(runs);
  return curve;
}

std::vector<double> isotonic_nonincreasing(const std::vector<double>& values) {
  // PAVA on blocks (mean, weight).
  std::vector<double> mean;
  std::vector<double> weight;
  for (double v : values) {
    mean.push_back(v);
    weight.push_back(1.0);
    while (mean.size() > 1 && mean[mean.size() - 2] < mean.back()) {
      const double w = weight[weight.size() - 2] + weight.back();
      const double m =
          (mean[mean.size() - 2] * weight[weight.size() - 2] + mean.back() * weight.back()) / w;
      mean.pop_back();
      weight.pop_back();
      mean.back() = m;
      weight.back() = w;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (std::size_t b = 0; b < mean.size(); ++b)
    out.insert(out.end(), static_cast<std::size_t>(weight[b]), mean[b]);
  return out;
}

double calibrated_possibility(const ThetaVector& theta, const CalibrationCurve& curve,
                              const CalibrationProblem& problem) {
  if (curve.size() == 0) throw Error("calibrated_possibility: empty curve");
  const double t = problem.observed_stat(theta);
  if (t <= 0.0) return 1.0;

  std::vector<std::size_t> idx(curve.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return curve.thresholds[a] < curve.thresholds[b];
  });
  // Merge tied thresholds, then smooth.
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> counts;
  for (std::size_t i : idx) {
    if (!xs.empty() && curve.thresholds[i] == xs.back()) {
      ys.back() += curve.calibrated_alphas[i];
      counts.back() += 1.0;
    } else {
      xs.push_back(curve.thresholds[i]);
      ys.push_back(curve.calibrated_alphas[i]);
      counts.push_back(1.0);
    }
  }
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] /= counts[i];
  ys = isotonic_nonincreasing(ys);

  if (t <= xs.front()) return ys.front();
  if (t >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + w * (ys[hi] - ys[lo]);
}

CalibrationResult calibrated_possibility_exact(const ThetaVector& theta,
                                               const CalibrationProblem& problem,
                                               const TuningConstants& tuning, Rng& rng,
                                               const SprsaOptions& options) {
  const double t = problem.observed_stat(theta);
  if (t <= 0.0) {
    CalibrationResult at_map;
    at_map.alpha_hat_star = 1.0;
    at_map.theta_final = theta;
    return at_map;
  }
  return sprsa(problem, t, theta, tuning, rng, options);
}

}  // namespace credcal
