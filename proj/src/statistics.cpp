#include "credcal/statistics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace credcal {

std::string to_string(StatisticKind kind) {
  switch (kind) {
    case StatisticKind::Wald:
      return "wald";
    case StatisticKind::Pdr:
      return "pdr";
  }
  return "unknown";
}

StatisticKind parse_statistic_kind(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "wald") return StatisticKind::Wald;
  if (lower == "pdr" || lower == "hpd") return StatisticKind::Pdr;
  throw Error("unknown statistic '" + name + "' (expected wald or pdr)");
}

RegionThreshold::RegionThreshold(double xi) : xi_(xi) {
  if (!(xi >= 0.0) || !std::isfinite(xi)) throw Error("region threshold must be finite and >= 0");
}

double wald_stat(const MapFit& fit, const ThetaVector& theta) {
  if (theta.size() != fit.theta_hat.size()) throw DimensionError("wald_stat: theta length");
  const VectorXd d = fit.theta_hat - theta;
  return d.dot(fit.wald_precision * d);
}

double pdr_stat(const CrossProductData& data, const MapFit& fit, const ThetaVector& theta,
                const PriorSpec& prior) {
  return -2.0 * (log_posterior(data, theta, prior) - log_posterior(data, fit.theta_hat, prior));
}

double statistic(StatisticKind kind, const CrossProductData& data, const MapFit& fit,
                 const ThetaVector& theta, const PriorSpec& prior) {
  return kind == StatisticKind::Wald ? wald_stat(fit, theta) : pdr_stat(data, fit, theta, prior);
}

VectorXd grad_stat(StatisticKind kind, const CrossProductData& data, const MapFit& fit,
                   const ThetaVector& theta, const PriorSpec& prior) {
  VectorXd g = kind == StatisticKind::Wald
                   ? VectorXd(-2.0 * fit.wald_precision * (fit.theta_hat - theta))
                   : VectorXd(-2.0 * grad_log_posterior(data, theta, prior));
  if (g.norm() < kZeroGradientTol)
    throw ZeroGradientError("statistic gradient vanishes: theta is not a regular point");
  return g;
}

bool region_contains(StatisticKind kind, const CrossProductData& data, const MapFit& fit,
                     const ThetaVector& theta, RegionThreshold threshold,
                     const PriorSpec& prior) {
  return statistic(kind, data, fit, theta, prior) <= threshold.xi();
}

double empirical_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw Error("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw Error("quantile probability outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<double> statistic_values(const PosteriorDraws& draws, StatisticKind kind,
                                     const CrossProductData& data, const MapFit& fit,
                                     const PriorSpec& prior) {
  std::vector<double> out;
  out.reserve(draws.size());
  for (const auto& d : draws.draws) out.push_back(statistic(kind, data, fit, d, prior));
  return out;
}

std::vector<RegionThreshold> quantile_thresholds(const std::vector<double>& values,
                                                 const std::vector<double>& alphas) {
  if (values.empty()) throw Error("no posterior draws to take quantiles from");
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  std::vector<RegionThreshold> out;
  out.reserve(alphas.size());
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw Error("nominal alpha must lie in (0, 1)");
    // Statistics are >= 0 in exact arithmetic; clamp rounding noise at the MAP.
    out.emplace_back(std::max(0.0, empirical_quantile(sorted, 1.0 - a)));
  }
  return out;
}

std::vector<RegionThreshold> posterior_quantile_thresholds(
    const PosteriorDraws& draws, StatisticKind kind, const CrossProductData& data,
    const MapFit& fit, const std::vector<double>& alphas, const PriorSpec& prior) {
  if (draws.empty()) throw Error("no posterior draws to take quantiles from");
  return quantile_thresholds(statistic_values(draws, kind, data, fit, prior), alphas);
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 19; ++i) grid.push_back(0.05 * i);
  return grid;
}

}  // namespace credcal
