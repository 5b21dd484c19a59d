// credcal command-line front end.
//
// Each command turns its flags into a JSON config, runs from that config and
// writes manifest.json next to its outputs. `replay` re-runs a manifest.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "credcal/experiment.hpp"
#include "credcal/io.hpp"

#ifndef CREDCAL_VERSION
#define CREDCAL_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace credcal;

namespace {

struct RunContext {
  fs::path out;
  unsigned threads = 1;
};

std::string rep_name(const std::string& stem, int i, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04d.%s", stem.c_str(), i, ext.c_str());
  return buf;
}

std::vector<StatisticKind> kinds_from_json(const json& j) {
  std::vector<StatisticKind> kinds;
  for (const auto& k : j) kinds.push_back(parse_statistic_kind(k.get<std::string>()));
  return kinds;
}

SceneSpec scene_from_json(const json& c) {
  SceneSpec spec;
  spec.scene = parse_scene(c.at("scene").get<std::string>());
  spec.m = c.value("m", spec.m);
  spec.n = c.value("n", spec.n);
  spec.replications = c.value("reps", spec.replications);
  spec.seed = c.at("seed").get<std::uint64_t>();
  return spec;
}

void run_simulate(const json& c, const RunContext& ctx) {
  const SceneSpec spec = scene_from_json(c);
  spec.validate();
  const std::string format = c.value("format", std::string("csv"));
  if (format != "csv" && format != "json") throw Error("--format must be csv or json");
  const Index dof = spec.n - 1;

  std::vector<ThetaVector> thetas;
  for (int r = 0; r < spec.replications; ++r) {
    Rng theta_rng(replication_seed(spec.seed, r, StreamPurpose::Theta));
    ThetaVector theta = generate_scene_theta(spec, theta_rng);
    Rng data_rng(replication_seed(spec.seed, r, StreamPurpose::Data));
    const CrossProductData data =
        generate_data(sample_standard_wishart(spec.m, dof, data_rng), theta, dof);
    io::write_data(ctx.out / rep_name("data", r, format), data);
    thetas.push_back(std::move(theta));
  }
  io::write_text_file(ctx.out / "thetas.csv", io::thetas_to_csv(thetas));
  std::cout << "wrote " << spec.replications << " datasets to " << ctx.out.string() << "\n";
}

void run_map(const json& c, const RunContext& ctx) {
  const CrossProductData data = io::read_data(c.at("data").get<std::string>());
  const PriorSpec prior = io::prior_from_json(c.at("prior"));
  const MapFit fit = find_map(data, default_init(data), prior);
  io::write_text_file(ctx.out / "map.json", io::map_fit_to_json(fit).dump(2) + "\n");
  if (!fit.converged)
    std::cerr << "warning: MAP did not converge (grad norm " << fit.grad_norm << ")\n";
  if (fit.hessian_repaired)
    std::cerr << "warning: expected Hessian ridge-repaired (eps " << fit.ridge << ")\n";
  std::cout << "log posterior at MAP " << fit.log_posterior << " after " << fit.iterations
            << " iterations\n";
}

void run_mcmc_command(const json& c, const RunContext& ctx) {
  const CrossProductData data = io::read_data(c.at("data").get<std::string>());
  const PriorSpec prior = io::prior_from_json(c.at("prior"));
  McmcConfig mcmc = io::mcmc_from_json(c.at("mcmc"));
  mcmc.parallel_chains = ctx.threads > 1;
  const PosteriorDraws draws = run_mcmc(data, mcmc, default_init(data), prior);
  io::write_text_file(ctx.out / "draws.csv", io::draws_to_csv(draws));
  io::write_text_file(ctx.out / "diagnostics.json", io::diagnostics_to_json(draws).dump(2) + "\n");
  if (!draws.converged) std::cerr << "warning: MCMC failed the PSRF/ESS screen\n";
  std::cout << "retained " << draws.size() << " draws from " << draws.chains << " chains\n";
}

void run_calibrate(const json& c, const RunContext& ctx) {
  const CrossProductData data = io::read_data(c.at("data").get<std::string>());
  const PriorSpec prior = io::prior_from_json(c.at("prior"));
  const StatisticKind kind = parse_statistic_kind(c.at("statistic").get<std::string>());
  const TuningConstants tuning = io::tuning_from_json(c.at("tuning"));
  tuning.validate();
  const auto alphas = c.at("alphas").get<std::vector<double>>();
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0)) throw Error("nominal alphas must lie in (0, 1)");
  const std::uint64_t seed = c.at("seed").get<std::uint64_t>();

  const MapFit fit = find_map(data, default_init(data), prior);
  if (!fit.converged) std::cerr << "warning: MAP did not converge\n";
  McmcConfig mcmc = io::mcmc_from_json(c.at("mcmc"));
  mcmc.seed = derive_seed(seed, {1});
  mcmc.parallel_chains = ctx.threads > 1;
  const PosteriorDraws draws = run_mcmc(data, mcmc, default_init(data), prior);
  if (!draws.converged) std::cerr << "warning: MCMC failed the PSRF/ESS screen\n";

  SprsaOptions options;
  options.store_trace = c.value("trace", false);
  const FactorCalibrationProblem problem(data, fit, kind, prior);
  std::vector<CalibrationResult> results;
  const CalibrationCurve curve = calibrate_curve(problem, draws, alphas, tuning,
                                                 derive_seed(seed, {2}), ctx.threads, options,
                                                 &results);
  io::write_text_file(ctx.out / "curve.csv", io::curve_to_csv(curve));
  io::write_text_file(ctx.out / "curve.json", io::curve_to_json(curve, kind).dump(2) + "\n");
  if (options.store_trace)
    for (std::size_t i = 0; i < results.size(); ++i)
      io::write_text_file(ctx.out / "traces" / rep_name("trace", static_cast<int>(i), "csv"),
                          io::trace_to_csv(results[i]));
  for (std::size_t i = 0; i < results.size(); ++i)
    if (!results[i].reliable)
      std::cerr << "warning: calibration at alpha " << alphas[i] << " skipped "
                << results[i].skipped << " of " << results[i].iterations << " iterations\n";
  for (std::size_t i = 0; i < curve.size(); ++i)
    std::cout << "alpha " << curve.nominal_alphas[i] << "  xi " << curve.thresholds[i]
              << "  calibrated " << curve.calibrated_alphas[i] << "\n";
}

void run_experiment_command(const json& c, const RunContext& ctx) {
  ExperimentConfig config;
  config.scene = scene_from_json(c);
  config.kinds = kinds_from_json(c.at("statistics"));
  config.tuning = io::tuning_from_json(c.at("tuning"));
  config.mcmc = io::mcmc_from_json(c.at("mcmc"));
  config.mcmc.parallel_chains = false;
  config.prior = io::prior_from_json(c.at("prior"));
  config.threads = ctx.threads;
  const bool include_screened = c.value("include_screened", false);
  const auto alphas = c.at("edf_alphas").get<std::vector<double>>();

  int done = 0;
  const auto records = run_experiment(config, [&](const ReplicationRecord& r) {
    ++done;
    std::cout << "[" << done << "/" << config.scene.replications << "] rep " << r.rep_id
              << (r.flags.empty() ? "" : " flagged") << std::endl;
  });
  io::write_text_file(ctx.out / "records.csv", io::records_to_csv(records, config.kinds));

  for (StatisticKind kind : config.kinds) {
    EdfSummary s;
    try {
      s = edf_summary(records, kind, alphas, include_screened);
    } catch (const Error& e) {
      std::cerr << "warning: no EDF for " << to_string(kind) << ": " << e.what() << "\n";
      continue;
    }
    io::write_text_file(ctx.out / ("edf_" + to_string(kind) + ".csv"), io::edf_to_csv(s));
    std::cout << to_string(kind) << ": " << s.records_used << " records, band violations"
              << " original " << band_violations(s, false).size() << ", calibrated "
              << band_violations(s, true).size() << "\n";
  }
}

void dispatch(const std::string& command, const json& config, const RunContext& ctx) {
  if (command == "simulate") return run_simulate(config, ctx);
  if (command == "map") return run_map(config, ctx);
  if (command == "mcmc") return run_mcmc_command(config, ctx);
  if (command == "calibrate") return run_calibrate(config, ctx);
  if (command == "experiment") return run_experiment_command(config, ctx);
  throw Error("unknown command '" + command + "' in manifest");
}

void execute(const std::string& command, const json& config, const RunContext& ctx) {
  fs::create_directories(ctx.out);
  const auto start = std::chrono::steady_clock::now();
  dispatch(command, config, ctx);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json manifest;
  manifest["command"] = command;
  manifest["config"] = config;
  manifest["seed"] = config.value("seed", std::uint64_t{0});
  manifest["version"] = CREDCAL_VERSION;
  // Everything that may differ between reproducing runs lives here.
  manifest["execution"] = {{"wall_clock_seconds", seconds},
                           {"threads", ctx.threads},
                           {"out", ctx.out.string()}};
  io::write_text_file(ctx.out / "manifest.json", manifest.dump(2) + "\n");
}

struct TuningFlags {
  TuningConstants t;
  void add(CLI::App* app) {
    app->add_option("--iterations", t.iterations, "SPRSA iterations K")->capture_default_str();
    app->add_option("--alpha-rate", t.alpha_rate, "learning-rate scale")->capture_default_str();
    app->add_option("--beta-rate", t.beta_rate, "learning-rate decay")->capture_default_str();
    app->add_option("--gamma-rate", t.gamma_rate, "perturbation scale")->capture_default_str();
    app->add_option("--delta-rate", t.delta_rate, "perturbation decay")->capture_default_str();
  }
};

struct McmcFlags {
  McmcConfig c;
  void add(CLI::App* app) {
    app->add_option("--chains", c.chains)->capture_default_str();
    app->add_option("--adapt", c.adapt_iters, "adaptation iterations")->capture_default_str();
    app->add_option("--burnin", c.burnin_iters)->capture_default_str();
    app->add_option("--retain", c.retain_iters, "post-burn-in iterations")->capture_default_str();
    app->add_option("--thin", c.thin)->capture_default_str();
  }
};

struct PriorFlags {
  PriorSpec p;
  bool normal_loadings = false;
  void add(CLI::App* app) {
    app->add_flag("--normal-loadings", normal_loadings,
                  "N(0, 1e10) loading prior instead of the flat one");
  }
  json to_json() {
    if (normal_loadings) p.loading = LoadingPrior::DiffuseNormal;
    return io::prior_to_json(p);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibrated Bayesian credible regions for a one-factor model"};
  app.set_version_flag("--version", CREDCAL_VERSION);
  app.require_subcommand(1);

  std::string out = "out";
  unsigned threads = 1;
  std::uint64_t seed = 1;
  std::string scene = "1";
  Index m = 5;
  Index n = 100;
  int reps = 512;
  std::string format = "csv";
  std::string data_path;
  std::string statistic = "wald";
  std::vector<std::string> statistics{"wald", "pdr"};
  std::vector<double> alphas = default_alpha_grid();
  std::vector<double> edf_alphas = default_alpha_grid();
  bool trace = false;
  bool include_screened = false;
  std::string manifest_path;
  TuningFlags tuning;
  McmcFlags mcmc;
  PriorFlags prior;

  auto common = [&](CLI::App* sub, bool with_seed) {
    sub->add_option("--out", out, "output directory")->capture_default_str();
    sub->add_option("--threads", threads, "worker threads")->capture_default_str()
        ->check(CLI::PositiveNumber);
    if (with_seed) sub->add_option("--seed", seed)->capture_default_str();
  };
  auto scene_flags = [&](CLI::App* sub) {
    sub->add_option("--scene", scene, "1|2|3 or uniform|low|high")->capture_default_str();
    sub->add_option("--m", m, "response variables")->capture_default_str();
    sub->add_option("--n", n, "sample size")->capture_default_str();
    sub->add_option("--reps", reps, "replications")->capture_default_str();
  };

  auto* simulate = app.add_subcommand("simulate", "simulate datasets from a scene");
  common(simulate, true);
  scene_flags(simulate);
  simulate->add_option("--format", format, "json|csv")->capture_default_str();

  auto* map = app.add_subcommand("map", "fit the MAP and its Wald covariance");
  common(map, false);
  map->add_option("--data", data_path, "cross-product data (.csv or .json)")->required();
  prior.add(map);

  auto* mcmc_cmd = app.add_subcommand("mcmc", "sample the posterior");
  common(mcmc_cmd, true);
  mcmc_cmd->add_option("--data", data_path)->required();
  mcmc.add(mcmc_cmd);
  prior.add(mcmc_cmd);

  auto* calibrate = app.add_subcommand("calibrate", "calibrated-versus-nominal curve");
  common(calibrate, true);
  calibrate->add_option("--data", data_path)->required();
  calibrate->add_option("--statistic", statistic, "wald|pdr")->capture_default_str();
  calibrate->add_option("--alphas", alphas, "nominal levels (default .05,...,.95)");
  calibrate->add_flag("--trace", trace, "write per-iteration traces");
  tuning.add(calibrate);
  mcmc.add(calibrate);
  prior.add(calibrate);

  auto* experiment = app.add_subcommand("experiment", "Monte Carlo validity experiment");
  common(experiment, true);
  scene_flags(experiment);
  experiment->add_option("--statistic", statistics, "wald and/or pdr")->capture_default_str();
  experiment->add_option("--edf-alphas", edf_alphas, "EDF grid (default .05,...,.95)");
  experiment->add_flag("--include-screened", include_screened,
                       "keep replications failing the convergence screen in the EDFs");
  tuning.add(experiment);
  mcmc.add(experiment);
  prior.add(experiment);

  auto* replay = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  replay->add_option("--manifest", manifest_path)->required();
  replay->add_option("--out", out)->capture_default_str();
  replay->add_option("--threads", threads)->capture_default_str()->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    const RunContext ctx{out, threads};
    json c;
    std::string command;
    if (*simulate) {
      command = "simulate";
      c = {{"scene", to_string(parse_scene(scene))}, {"m", m}, {"n", n}, {"reps", reps}, {"seed", seed},
           {"format", format}};
    } else if (*map) {
      command = "map";
      c = {{"data", data_path}, {"prior", prior.to_json()}};
    } else if (*mcmc_cmd) {
      command = "mcmc";
      mcmc.c.seed = seed;
      c = {{"data", data_path}, {"seed", seed}, {"mcmc", io::mcmc_to_json(mcmc.c)},
           {"prior", prior.to_json()}};
    } else if (*calibrate) {
      command = "calibrate";
      c = {{"data", data_path},
           {"statistic", to_string(parse_statistic_kind(statistic))},
           {"alphas", alphas},
           {"seed", seed},
           {"trace", trace},
           {"tuning", io::tuning_to_json(tuning.t)},
           {"mcmc", io::mcmc_to_json(mcmc.c)},
           {"prior", prior.to_json()}};
    } else if (*experiment) {
      command = "experiment";
      json kinds = json::array();
      for (const auto& s : statistics) kinds.push_back(to_string(parse_statistic_kind(s)));
      c = {{"scene", to_string(parse_scene(scene))},
           {"m", m},
           {"n", n},
           {"reps", reps},
           {"seed", seed},
           {"statistics", kinds},
           {"edf_alphas", edf_alphas},
           {"include_screened", include_screened},
           {"tuning", io::tuning_to_json(tuning.t)},
           {"mcmc", io::mcmc_to_json(mcmc.c)},
           {"prior", prior.to_json()}};
    } else {
      const json manifest = json::parse(io::read_text_file(manifest_path));
      command = manifest.at("command").get<std::string>();
      c = manifest.at("config");
    }
    execute(command, c, ctx);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
