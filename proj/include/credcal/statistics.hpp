#ifndef CREDCAL_STATISTICS_HPP
#define CREDCAL_STATISTICS_HPP

// Wald and posterior-density-ratio (PDR) statistics. Thresholding either one
// at xi gives a nested family of credible regions D_xi = {theta : T <= xi}:
// ellipsoids for Wald, highest-posterior-density sets for PDR.

#include <string>
#include <vector>

#include "credcal/map_estimator.hpp"
#include "credcal/mcmc.hpp"

namespace credcal {

enum class StatisticKind { Wald, Pdr };

std::string to_string(StatisticKind kind);
/// Accepts "wald" or "pdr" (case-insensitive).
StatisticKind parse_statistic_kind(const std::string& name);

/// Threshold xi >= 0 indexing the region family.
class RegionThreshold {
 public:
  RegionThreshold() = default;
  explicit RegionThreshold(double xi);
  double xi() const { return xi_; }

 private:
  double xi_ = 0.0;
};

/// The gradient of the statistic vanished (norm < 1e-10): not a regular point.
class ZeroGradientError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kZeroGradientTol = 1e-10;

/// (theta_hat - theta)' Sigma_hat^{-1} (theta_hat - theta).
double wald_stat(const MapFit& fit, const ThetaVector& theta);

/// -2 [log p(theta | y) - log p(theta_hat | y)].
double pdr_stat(const CrossProductData& data, const MapFit& fit, const ThetaVector& theta,
                const PriorSpec& prior = {});

double statistic(StatisticKind kind, const CrossProductData& data, const MapFit& fit,
                 const ThetaVector& theta, const PriorSpec& prior = {});

/// Gradient in theta. Throws ZeroGradientError at non-regular points.
VectorXd grad_stat(StatisticKind kind, const CrossProductData& data, const MapFit& fit,
                   const ThetaVector& theta, const PriorSpec& prior = {});

bool region_contains(StatisticKind kind, const CrossProductData& data, const MapFit& fit,
                     const ThetaVector& theta, RegionThreshold threshold,
                     const PriorSpec& prior = {});

/// Type-7 (linear interpolation of order statistics) quantile at probability p.
double empirical_quantile(std::vector<double> values, double p);

/// Statistic evaluated at every draw, in draw order.
std::vector<double> statistic_values(const PosteriorDraws& draws, StatisticKind kind,
                                     const CrossProductData& data, const MapFit& fit,
                                     const PriorSpec& prior = {});

/// xi(alpha) = (1 - alpha) posterior quantile of the statistic, per alpha.
std::vector<RegionThreshold> posterior_quantile_thresholds(
    const PosteriorDraws& draws, StatisticKind kind, const CrossProductData& data,
    const MapFit& fit, const std::vector<double>& alphas, const PriorSpec& prior = {});

/// Same, from precomputed statistic values.
std::vector<RegionThreshold> quantile_thresholds(const std::vector<double>& values,
                                                 const std::vector<double>& alphas);

/// The nominal grid .05, .10, ..., .95.
std::vector<double> default_alpha_grid();

}  // namespace credcal

#endif  // CREDCAL_STATISTICS_HPP
