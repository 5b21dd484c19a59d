#include "credcal/mcmc.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "credcal/map_estimator.hpp"

namespace credcal {

void McmcConfig::validate() const {
  if (chains <= 0 || adapt_iters <= 0 || burnin_iters <= 0 || retain_iters <= 0 || thin <= 0)
    throw McmcError("MCMC counts must all be positive");
  if (retain_iters < thin) throw McmcError("retain_iters must be >= thin");
}

std::vector<std::vector<double>> PosteriorDraws::traces(Index coordinate) const {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(chains));
  for (std::size_t i = 0; i < draws.size(); ++i)
    out[static_cast<std::size_t>(chain[i])].push_back(draws[i][coordinate]);
  return out;
}

bool diagnostics_converged(const std::vector<double>& psrf_values,
                           const std::vector<double>& ess_values) {
  for (double r : psrf_values)
    if (!(r <= 1.1)) return false;
  for (double e : ess_values)
    if (!(e >= 100.0)) return false;
  return true;
}

namespace {

constexpr double kTargetAcceptance = 0.234;
constexpr int kWindow = 50;

struct ChainOutput {
  std::vector<VectorXd> draws;
  double acceptance = 0.0;
};

double safe_log_density(const LogDensity& f, const VectorXd& x) {
  if (!x.allFinite()) return -std::numeric_limits<double>::infinity();
  try {
    const double v = f(x);
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  } catch (const SingularMatrixError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

MatrixXd proposal_factor(const MatrixXd& cov) {
  const Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw McmcError("proposal covariance is not PD");
  return llt.matrixL();
}

ChainOutput run_chain(const LogDensity& log_density, const VectorXd& init,
                      const MatrixXd& initial_cov, const McmcConfig& config, int chain_id) {
  Rng rng(derive_seed(config.seed, {static_cast<std::uint64_t>(chain_id)}));
  const Index d = init.size();

  VectorXd x = init + config.init_jitter * rng.normal_vector(d);
  double lp = safe_log_density(log_density, x);
  if (!std::isfinite(lp)) {
    x = init;
    lp = safe_log_density(log_density, x);
    if (!std::isfinite(lp)) throw McmcError("log density is not finite at the initial value");
  }

  MatrixXd chol = proposal_factor(initial_cov);
  double scale = 2.38 / std::sqrt(static_cast<double>(d));
  // Shape swaps preserve scale * |chol|_F, so this measures the step size.
  auto effective_step = [&]() { return scale * std::sqrt(chol.squaredNorm()); };
  const double initial_step = effective_step();

  auto step = [&]() {
    const VectorXd proposal = x + scale * (chol * rng.normal_vector(d));
    const double lp_new = safe_log_density(log_density, proposal);
    const double log_u = std::log(rng.uniform());
    if (std::isfinite(lp_new) && log_u < lp_new - lp) {
      x = proposal;
      lp = lp_new;
      return true;
    }
    return false;
  };

  // Adaptation: Robbins-Monro on the log scale per window, proposal shape from
  // the empirical covariance of the later part of the adaptation phase.
  const int shape_start = config.adapt_iters / 4;
  VectorXd sum = VectorXd::Zero(d);
  MatrixXd sum_sq = MatrixXd::Zero(d, d);
  long shape_count = 0;
  int window_accepts = 0;
  int window_index = 0;
  for (int it = 0; it < config.adapt_iters; ++it) {
    window_accepts += step() ? 1 : 0;
    if (it >= shape_start) {
      sum += x;
      sum_sq.noalias() += x * x.transpose();
      ++shape_count;
    }
    const bool window_end = (it + 1) % kWindow == 0 || it + 1 == config.adapt_iters;
    if (!window_end) continue;
    const int window_len = (it % kWindow) + 1;
    ++window_index;
    if (window_accepts == 0) {
      scale *= 0.1;
      if (effective_step() < 1e-10 * initial_step)
        throw McmcError("proposal step size underflow during adaptation");
    } else {
      const double rate = static_cast<double>(window_accepts) / window_len;
      scale *= std::exp((rate - kTargetAcceptance) * 2.0 / std::sqrt(window_index));
    }
    window_accepts = 0;
    if (shape_count >= 10 * d + 20) {
      const double n = static_cast<double>(shape_count);
      const VectorXd mean = sum / n;
      MatrixXd cov = (sum_sq - n * mean * mean.transpose()) / (n - 1.0);
      cov = 0.5 * (cov + cov.transpose()).eval();
      cov.diagonal().array() += 1e-10 * std::max(cov.trace() / d, 1e-12);
      if (Eigen::LLT<MatrixXd>(cov).info() == Eigen::Success) {
        // Keep the overall step size comparable when the shape is swapped.
        const double ratio = std::sqrt(chol.squaredNorm() / std::max(cov.trace(), 1e-300));
        chol = proposal_factor(cov);
        scale *= ratio;
      }
    }
  }

  // Kernel is frozen from here on.
  ChainOutput out;
  long accepts = 0;
  for (int it = 0; it < config.burnin_iters; ++it) accepts += step() ? 1 : 0;
  out.draws.reserve(static_cast<std::size_t>(config.draws_per_chain()));
  for (int it = 0; it < config.retain_iters; ++it) {
    accepts += step() ? 1 : 0;
    if ((it + 1) % config.thin == 0) out.draws.push_back(x);
  }
  out.acceptance =
      static_cast<double>(accepts) / static_cast<double>(config.burnin_iters + config.retain_iters);
  return out;
}

}  // namespace

PosteriorDraws run_rwm(const LogDensity& log_density, const VectorXd& init,
                       const MatrixXd& initial_proposal_cov, const McmcConfig& config) {
  config.validate();
  if (!init.allFinite()) throw McmcError("initial value must be finite");
  const std::size_t n_chains = static_cast<std::size_t>(config.chains);
  std::vector<ChainOutput> outputs(n_chains);
  std::vector<std::exception_ptr> errors(n_chains);

  auto work = [&](std::size_t c) {
    try {
      outputs[c] = run_chain(log_density, init, initial_proposal_cov, config, static_cast<int>(c));
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (config.parallel_chains && n_chains > 1) {
    std::vector<std::thread> threads;
    threads.reserve(n_chains);
    for (std::size_t c = 0; c < n_chains; ++c) threads.emplace_back(work, c);
    for (auto& t : threads) t.join();
  } else {
    for (std::size_t c = 0; c < n_chains; ++c) work(c);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  PosteriorDraws result;
  result.chains = config.chains;
  for (std::size_t c = 0; c < n_chains; ++c) {
    for (auto& draw : outputs[c].draws) {
      result.draws.push_back(std::move(draw));
      result.chain.push_back(static_cast<int>(c));
    }
    result.acceptance.push_back(outputs[c].acceptance);
  }

  const Index d = init.size();
  for (Index k = 0; k < d; ++k) {
    const auto traces = result.traces(k);
    result.psrf.push_back(config.chains >= 2 ? psrf(traces)
                                             : std::numeric_limits<double>::quiet_NaN());
    double e = 0.0;
    try {
      e = ess_multi(traces);
    } catch (const McmcError&) {
      e = 0.0;  // a stuck coordinate counts as no information
    }
    result.ess.push_back(e);
  }
  result.converged = config.chains >= 2 && diagnostics_converged(result.psrf, result.ess);
  return result;
}

PosteriorDraws run_mcmc(const CrossProductData& data, const McmcConfig& config,
                        const ThetaVector& init, const PriorSpec& prior) {
  if (!init.allFinite()) throw McmcError("initial value must be finite");
  if (init.size() != theta_size(data.m())) throw DimensionError("run_mcmc: theta length");
  const PdRepair neg_h = repair_to_pd(-expected_hessian_log_posterior(data, init, prior));
  const Index q = init.size();
  const MatrixXd cov = Eigen::LLT<MatrixXd>(neg_h.matrix).solve(MatrixXd::Identity(q, q));
  const LogDensity target = [&data, &prior](const VectorXd& theta) {
    return log_posterior(data, theta, prior);
  };
  return run_rwm(target, init, 0.5 * (cov + cov.transpose()), config);
}

double psrf(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw McmcError("psrf needs at least two chains");
  const std::size_t n = chains.front().size();
  for (const auto& c : chains)
    if (c.size() != n) throw McmcError("psrf needs chains of equal length");
  if (n < 4) throw McmcError("psrf needs chains of length >= 4");

  const std::size_t half = n / 2;
  std::vector<double> means;
  std::vector<double> vars;
  for (const auto& c : chains) {
    for (int part = 0; part < 2; ++part) {
      const std::size_t begin = part == 0 ? 0 : n - half;
      double mean = 0.0;
      for (std::size_t i = 0; i < half; ++i) mean += c[begin + i];
      mean /= static_cast<double>(half);
      double ss = 0.0;
      for (std::size_t i = 0; i < half; ++i) ss += (c[begin + i] - mean) * (c[begin + i] - mean);
      means.push_back(mean);
      vars.push_back(ss / static_cast<double>(half - 1));
    }
  }
  const double count = static_cast<double>(means.size());
  const double len = static_cast<double>(half);
  double w = 0.0;
  double grand = 0.0;
  for (std::size_t j = 0; j < means.size(); ++j) {
    w += vars[j];
    grand += means[j];
  }
  w /= count;
  grand /= count;
  double b = 0.0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= len / (count - 1.0);
  if (w <= 0.0) return std::numeric_limits<double>::infinity();
  const double var_plus = (len - 1.0) / len * w + b / len;
  return std::sqrt(var_plus / w);
}

double ess(const std::vector<double>& trace) {
  const std::size_t n = trace.size();
  if (n < 4) throw McmcError("ess needs at least 4 values");
  double mean = 0.0;
  for (double v : trace) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = trace[i] - mean;

  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += centered[i] * centered[i + lag];
    return s / static_cast<double>(n);
  };
  const double gamma0 = autocov(0);
  if (!(gamma0 > 0.0)) throw McmcError("ess is undefined for a constant trace");

  // tau = -1 + 2 * sum_k (rho_2k + rho_2k+1) over the initial positive run.
  double tau = -1.0;
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double pair = (2 * k == 0 ? 1.0 : autocov(2 * k) / gamma0) + autocov(2 * k + 1) / gamma0;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(std::max<std::size_t>(n, 10))));
  return static_cast<double>(n) / tau;
}

double ess_multi(const std::vector<std::vector<double>>& chains) {
  double total = 0.0;
  for (const auto& c : chains) total += ess(c);
  return total;
}

}  // namespace credcal
