#include "credcal/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <mutex>

#include "credcal/parallel.hpp"

namespace credcal {

std::string to_string(Scene scene) {
  switch (scene) {
    case Scene::UniformCommunality:
      return "uniform";
    case Scene::FixedLow:
      return "low";
    case Scene::FixedHigh:
      return "high";
  }
  return "unknown";
}

Scene parse_scene(const std::string& name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "1" || s == "uniform") return Scene::UniformCommunality;
  if (s == "2" || s == "low") return Scene::FixedLow;
  if (s == "3" || s == "high") return Scene::FixedHigh;
  throw Error("unknown scene '" + name + "' (expected 1|2|3 or uniform|low|high)");
}

void SceneSpec::validate() const {
  FactorModelConfig{m, n}.validate();
  if (replications <= 0) throw Error("replications must be positive");
}

ThetaVector generate_scene_theta(const SceneSpec& spec, Rng& rng) {
  spec.validate();
  VectorXd h2 = VectorXd::Zero(spec.m);
  switch (spec.scene) {
    case Scene::UniformCommunality:
      for (Index j = 0; j < spec.m; ++j) h2[j] = rng.uniform(0.2, 0.8);
      break;
    case Scene::FixedLow:
      h2.setConstant(0.3);
      break;
    case Scene::FixedHigh:
      h2.setConstant(0.7);
      break;
  }
  const double psi = h2[0];
  const VectorXd loadings = (h2.array() / psi).sqrt().matrix();
  const VectorXd uniques = (1.0 - h2.array()).matrix();
  return pack_theta(psi, loadings, uniques);
}

double original_contour(const std::vector<double>& draw_stats, double stat_true) {
  if (draw_stats.empty()) throw Error("original_contour: no draws");
  const auto hits = std::count_if(draw_stats.begin(), draw_stats.end(),
                                  [&](double t) { return t >= stat_true; });
  return static_cast<double>(hits) / static_cast<double>(draw_stats.size());
}

double original_contour(const PosteriorDraws& draws, const CrossProductData& data,
                        const MapFit& fit, StatisticKind kind, const ThetaVector& theta_true,
                        const PriorSpec& prior) {
  return original_contour(statistic_values(draws, kind, data, fit, prior),
                          statistic(kind, data, fit, theta_true, prior));
}

const ContourPair* ReplicationRecord::find(StatisticKind kind) const {
  for (const auto& c : contours)
    if (c.kind == kind) return &c;
  return nullptr;
}

std::uint64_t replication_seed(std::uint64_t seed, int rep_id, StreamPurpose purpose,
                               std::uint64_t sub) {
  return derive_seed(seed, {static_cast<std::uint64_t>(rep_id),
                            static_cast<std::uint64_t>(purpose), sub});
}

ReplicationRecord run_replication(const ExperimentConfig& config, int rep_id) {
  const SceneSpec& spec = config.scene;
  ReplicationRecord rec;
  rec.rep_id = rep_id;

  Rng theta_rng(replication_seed(spec.seed, rep_id, StreamPurpose::Theta));
  rec.theta_true = generate_scene_theta(spec, theta_rng);

  Rng data_rng(replication_seed(spec.seed, rep_id, StreamPurpose::Data));
  const Index dof = spec.n - 1;
  const CrossProductData data =
      generate_data(sample_standard_wishart(spec.m, dof, data_rng), rec.theta_true, dof);

  const MapFit fit = find_map(data, default_init(data), config.prior);
  rec.map_converged = fit.converged;
  if (!fit.converged) rec.flags.emplace_back("map_not_converged");
  if (fit.hessian_repaired) rec.flags.emplace_back("hessian_repaired");

  McmcConfig mcmc = config.mcmc;
  mcmc.seed = replication_seed(spec.seed, rep_id, StreamPurpose::Mcmc);
  PosteriorDraws draws;
  try {
    draws = run_mcmc(data, mcmc, default_init(data), config.prior);
  } catch (const McmcError&) {
    rec.flags.emplace_back("mcmc_error");
    rec.mcmc_converged = false;
    for (StatisticKind kind : config.kinds) {
      ContourPair c;
      c.kind = kind;
      c.original = c.calibrated = std::numeric_limits<double>::quiet_NaN();
      rec.contours.push_back(c);
    }
    return rec;
  }
  rec.mcmc_converged = draws.converged;
  rec.max_psrf = *std::max_element(draws.psrf.begin(), draws.psrf.end());
  rec.min_ess = *std::min_element(draws.ess.begin(), draws.ess.end());
  if (!draws.converged) rec.flags.emplace_back("mcmc_not_converged");

  for (StatisticKind kind : config.kinds) {
    const FactorCalibrationProblem problem(data, fit, kind, config.prior);
    ContourPair c;
    c.kind = kind;
    c.stat_true = problem.observed_stat(rec.theta_true);
    c.original = original_contour(statistic_values(draws, kind, data, fit, config.prior),
                                  c.stat_true);
    if (!(c.stat_true > 0.0)) {
      c.calibrated = 1.0;
    } else {
      Rng rng(replication_seed(spec.seed, rep_id, StreamPurpose::Calibration,
                               static_cast<std::uint64_t>(kind)));
      try {
        const VectorXd init = initial_boundary_point(problem, draws.draws, c.stat_true);
        const CalibrationResult res = sprsa(problem, c.stat_true, init, config.tuning, rng);
        c.calibrated = std::clamp(res.alpha_hat_star, 0.0, 1.0);
        c.calibrated_mc_se = res.mc_se;
        c.calibration_reliable = res.reliable;
      } catch (const Error&) {
        c.calibrated = std::numeric_limits<double>::quiet_NaN();
        c.calibration_reliable = false;
      }
      if (!c.calibration_reliable) rec.flags.push_back("calibration_unreliable_" + to_string(kind));
    }
    rec.contours.push_back(c);
  }
  return rec;
}

ReplicationRecord run_replication(const SceneSpec& spec, int rep_id,
                                  const std::vector<StatisticKind>& kinds,
                                  const TuningConstants& tuning, const McmcConfig& mcmc_config,
                                  const PriorSpec& prior) {
  ExperimentConfig config;
  config.scene = spec;
  config.kinds = kinds;
  config.tuning = tuning;
  config.mcmc = mcmc_config;
  config.prior = prior;
  return run_replication(config, rep_id);
}

std::vector<ReplicationRecord> run_experiment(
    const ExperimentConfig& config,
    const std::function<void(const ReplicationRecord&)>& on_done) {
  config.scene.validate();
  config.tuning.validate();
  config.mcmc.validate();
  ExperimentConfig per_rep = config;
  // Parallelism lives at the replication level when more than one worker runs.
  if (config.threads > 1) per_rep.mcmc.parallel_chains = false;

  std::vector<ReplicationRecord> records(static_cast<std::size_t>(config.scene.replications));
  std::mutex done_mutex;
  parallel_for(records.size(), config.threads, [&](std::size_t i) {
    records[i] = run_replication(per_rep, static_cast<int>(i));
    if (on_done) {
      std::lock_guard<std::mutex> lock(done_mutex);
      on_done(records[i]);
    }
  });
  return records;
}

std::vector<double> edf(const std::vector<double>& values, const std::vector<double>& alphas) {
  if (values.empty()) throw Error("edf of an empty sample");
  std::vector<double> out;
  out.reserve(alphas.size());
  for (double a : alphas) {
    const auto below =
        std::count_if(values.begin(), values.end(), [&](double v) { return v <= a; });
    out.push_back(static_cast<double>(below) / static_cast<double>(values.size()));
  }
  return out;
}

double band_half_width(double alpha, int records) {
  if (records <= 0) throw Error("band needs at least one record");
  return 1.96 * std::sqrt(alpha * (1.0 - alpha) / static_cast<double>(records));
}

EdfSummary edf_summary(const std::vector<ReplicationRecord>& records, StatisticKind kind,
                       const std::vector<double>& alphas, bool include_screened_out) {
  std::vector<double> original;
  std::vector<double> calibrated;
  for (const auto& r : records) {
    if (!include_screened_out && r.screened_out()) continue;
    const ContourPair* c = r.find(kind);
    if (c == nullptr || std::isnan(c->original) || std::isnan(c->calibrated)) continue;
    original.push_back(c->original);
    calibrated.push_back(c->calibrated);
  }
  if (original.empty()) throw Error("edf_summary: no usable records");

  EdfSummary s;
  s.kind = kind;
  s.alphas = alphas;
  s.records_used = static_cast<int>(original.size());
  s.edf_original = edf(original, alphas);
  s.edf_calibrated = edf(calibrated, alphas);
  for (double a : alphas) {
    const double hw = band_half_width(a, s.records_used);
    s.band_lo.push_back(a - hw);
    s.band_hi.push_back(a + hw);
  }
  return s;
}

std::vector<double> validity_alpha_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 9; ++i) grid.push_back(0.1 * i);
  return grid;
}

std::vector<double> band_violations(const EdfSummary& summary, bool calibrated) {
  const auto& values = calibrated ? summary.edf_calibrated : summary.edf_original;
  std::vector<double> out;
  for (std::size_t i = 0; i < summary.alphas.size(); ++i)
    if (values[i] > summary.band_hi[i]) out.push_back(summary.alphas[i]);
  return out;
}

}  // namespace credcal
