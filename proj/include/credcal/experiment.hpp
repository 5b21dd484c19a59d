#ifndef CREDCAL_EXPERIMENT_HPP
#define CREDCAL_EXPERIMENT_HPP

// Monte Carlo validity experiment: draw true parameters from a scene,
// simulate a cross-product matrix, fit, sample the posterior, then compare the
// original and calibrated possibility contours at the truth across
// replications through their empirical distribution functions.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "credcal/mcmc.hpp"
#include "credcal/sprsa.hpp"
#include "credcal/statistics.hpp"

namespace credcal {

enum class Scene {
  UniformCommunality = 1,  // h_j^2 ~ U[.2, .8] per replication
  FixedLow = 2,            // h_j^2 = .3
  FixedHigh = 3,           // h_j^2 = .7
};

std::string to_string(Scene scene);
/// Accepts 1/2/3 or uniform/low/high.
Scene parse_scene(const std::string& name);

struct SceneSpec {
  Scene scene = Scene::UniformCommunality;
  Index m = 5;
  Index n = 100;
  int replications = 512;
  std::uint64_t seed = 1;

  void validate() const;
};

/// True parameters with unit marginal variances: psi = h_1^2,
/// lambda_j = sqrt(h_j^2 / psi), upsilon_j = 1 - h_j^2.
ThetaVector generate_scene_theta(const SceneSpec& spec, Rng& rng);

/// Fraction of draws whose statistic is >= the statistic at theta_true.
double original_contour(const std::vector<double>& draw_stats, double stat_true);
double original_contour(const PosteriorDraws& draws, const CrossProductData& data,
                        const MapFit& fit, StatisticKind kind, const ThetaVector& theta_true,
                        const PriorSpec& prior = {});

struct ContourPair {
  StatisticKind kind = StatisticKind::Wald;
  double stat_true = 0.0;
  double original = 0.0;
  double calibrated = 0.0;
  double calibrated_mc_se = 0.0;
  bool calibration_reliable = true;
};

struct ReplicationRecord {
  int rep_id = 0;
  ThetaVector theta_true;
  std::vector<ContourPair> contours;
  bool map_converged = false;
  bool mcmc_converged = false;
  double max_psrf = 0.0;
  double min_ess = 0.0;
  std::vector<std::string> flags;

  /// Excluded from EDFs by default: failed MCMC screen or MAP.
  bool screened_out() const { return !mcmc_converged || !map_converged; }
  const ContourPair* find(StatisticKind kind) const;
};

/// Stream seeds derived from (spec.seed, rep_id, purpose).
enum class StreamPurpose : std::uint64_t { Theta = 1, Data = 2, Mcmc = 3, Calibration = 4 };
std::uint64_t replication_seed(std::uint64_t seed, int rep_id, StreamPurpose purpose,
                               std::uint64_t sub = 0);

struct ExperimentConfig {
  SceneSpec scene;
  std::vector<StatisticKind> kinds{StatisticKind::Wald, StatisticKind::Pdr};
  TuningConstants tuning;
  McmcConfig mcmc;
  PriorSpec prior;
  unsigned threads = 1;
};

/// Full pipeline for one replication. Deterministic in (config, rep_id).
ReplicationRecord run_replication(const ExperimentConfig& config, int rep_id);

ReplicationRecord run_replication(const SceneSpec& spec, int rep_id,
                                  const std::vector<StatisticKind>& kinds,
                                  const TuningConstants& tuning, const McmcConfig& mcmc_config,
                                  const PriorSpec& prior = {});

/// Replications 0..R-1 on config.threads workers; records come back in
/// rep_id order whatever the completion order.
std::vector<ReplicationRecord> run_experiment(
    const ExperimentConfig& config,
    const std::function<void(const ReplicationRecord&)>& on_done = {});

struct EdfSummary {
  StatisticKind kind = StatisticKind::Wald;
  std::vector<double> alphas;
  std::vector<double> edf_original;
  std::vector<double> edf_calibrated;
  std::vector<double> band_lo;
  std::vector<double> band_hi;
  int records_used = 0;
};

/// Empirical distribution function of a sample at each alpha.
std::vector<double> edf(const std::vector<double>& values, const std::vector<double>& alphas);

/// alpha +- 1.96 sqrt(alpha (1 - alpha) / R).
double band_half_width(double alpha, int records);

EdfSummary edf_summary(const std::vector<ReplicationRecord>& records, StatisticKind kind,
                       const std::vector<double>& alphas, bool include_screened_out = false);

/// The grid .1, .2, ..., .9 used for validity checks.
std::vector<double> validity_alpha_grid();

/// Alphas at which the EDF exceeds the upper MC band.
std::vector<double> band_violations(const EdfSummary& summary, bool calibrated);

}  // namespace credcal

#endif  // CREDCAL_EXPERIMENT_HPP
