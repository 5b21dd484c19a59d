#ifndef CREDCAL_MCMC_HPP
#define CREDCAL_MCMC_HPP

// Adaptive random-walk Metropolis with multi-chain diagnostics.

#include <cstdint>
#include <functional>
#include <vector>

#include "credcal/factor_model.hpp"

namespace credcal {

class McmcError : public Error {
 public:
  using Error::Error;
};

struct McmcConfig {
  int chains = 5;
  int adapt_iters = 1000;
  int burnin_iters = 10000;
  int retain_iters = 10000;
  int thin = 10;
  std::uint64_t seed = 1;
  /// Run chains on separate threads. Output does not depend on this.
  bool parallel_chains = true;
  /// Standard deviation of the per-coordinate jitter of chain starts.
  double init_jitter = 0.1;

  void validate() const;
  int draws_per_chain() const { return retain_iters / thin; }
};

struct PosteriorDraws {
  /// Retained draws, chain-major: all of chain 0, then chain 1, ...
  std::vector<ThetaVector> draws;
  std::vector<int> chain;
  int chains = 0;
  std::vector<double> psrf;
  std::vector<double> ess;
  /// Acceptance rate of each chain over burn-in plus retention.
  std::vector<double> acceptance;
  bool converged = false;

  bool empty() const { return draws.empty(); }
  std::size_t size() const { return draws.size(); }
  /// Per-chain traces of one coordinate.
  std::vector<std::vector<double>> traces(Index coordinate) const;
};

/// Convergence screen: every PSRF <= 1.1 and every ESS >= 100.
bool diagnostics_converged(const std::vector<double>& psrf, const std::vector<double>& ess);

using LogDensity = std::function<double(const VectorXd&)>;

/// Runs config.chains independent adaptive RWM chains on an arbitrary
/// log density. initial_proposal_cov sets the proposal shape before adaptation.
PosteriorDraws run_rwm(const LogDensity& log_density, const VectorXd& init,
                       const MatrixXd& initial_proposal_cov, const McmcConfig& config);

/// Factor-model posterior sampling. The initial proposal shape is the inverse
/// negative expected Hessian at init.
PosteriorDraws run_mcmc(const CrossProductData& data, const McmcConfig& config,
                        const ThetaVector& init, const PriorSpec& prior = {});

/// Split-chain potential scale reduction factor. Needs >= 2 chains of equal
/// length >= 4. Returns +inf when the within-chain variance is zero.
double psrf(const std::vector<std::vector<double>>& chains);

/// Effective sample size with Geyer's initial positive sequence truncation.
/// Throws McmcError for constant traces.
double ess(const std::vector<double>& trace);

/// Sum of per-chain ESS values.
double ess_multi(const std::vector<std::vector<double>>& chains);

}  // namespace credcal

#endif  // CREDCAL_MCMC_HPP
