#include "credcal/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace credcal::io {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> theta_column_names(Index m) {
  std::vector<std::string> names{"zeta"};
  for (Index j = 2; j <= m; ++j) names.push_back("lambda_" + std::to_string(j));
  for (Index j = 1; j <= m; ++j) names.push_back("omega_" + std::to_string(j));
  return names;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  return cells;
}

double parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw Error("");
    return v;
  } catch (const std::exception&) {
    throw Error("malformed number '" + s + "'");
  }
}

std::string join_header(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) out += (i ? "," : "") + names[i];
  return out;
}

}  // namespace

std::string data_to_csv(const CrossProductData& data) {
  std::ostringstream out;
  out << "m,dof\n" << data.m() << ',' << data.dof << '\n';
  for (Index i = 0; i < data.m(); ++i) {
    for (Index j = 0; j < data.m(); ++j) out << (j ? "," : "") << format_double(data.y(i, j));
    out << '\n';
  }
  return out.str();
}

CrossProductData data_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"m", "dof"})
    throw Error("data CSV must start with the header 'm,dof'");
  if (!std::getline(in, line)) throw Error("data CSV is missing the m,dof values");
  const auto dims = split_csv_line(line);
  if (dims.size() != 2) throw Error("data CSV: expected two values after the header");
  const double m_raw = parse_double(dims[0]);
  const double dof_raw = parse_double(dims[1]);
  if (m_raw < 1 || m_raw != std::floor(m_raw) || dof_raw != std::floor(dof_raw))
    throw Error("data CSV: m and dof must be positive integers");
  const auto m = static_cast<Index>(m_raw);
  CrossProductData data{MatrixXd(m, m), static_cast<Index>(dof_raw)};
  for (Index i = 0; i < m; ++i) {
    if (!std::getline(in, line)) throw Error("data CSV: too few matrix rows");
    const auto cells = split_csv_line(line);
    if (static_cast<Index>(cells.size()) != m) throw Error("data CSV: wrong row length");
    for (Index j = 0; j < m; ++j) data.y(i, j) = parse_double(cells[static_cast<std::size_t>(j)]);
  }
  return data;
}

json data_to_json(const CrossProductData& data) {
  json rows = json::array();
  for (Index i = 0; i < data.m(); ++i) {
    json row = json::array();
    for (Index j = 0; j < data.m(); ++j) row.push_back(data.y(i, j));
    rows.push_back(row);
  }
  return {{"m", data.m()}, {"dof", data.dof}, {"y", rows}};
}

CrossProductData data_from_json(const json& j) {
  try {
    const auto m = j.at("m").get<Index>();
    CrossProductData data{MatrixXd(m, m), j.at("dof").get<Index>()};
    const auto& rows = j.at("y");
    if (static_cast<Index>(rows.size()) != m) throw Error("data JSON: wrong number of rows");
    for (Index r = 0; r < m; ++r) {
      const auto& row = rows.at(static_cast<std::size_t>(r));
      if (static_cast<Index>(row.size()) != m) throw Error("data JSON: wrong row length");
      for (Index c = 0; c < m; ++c) data.y(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return data;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed data JSON: ") + e.what());
  }
}

CrossProductData read_data(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  CrossProductData data;
  if (path.extension() == ".json") {
    try {
      data = data_from_json(json::parse(text));
    } catch (const json::exception& e) {
      throw Error(std::string("malformed data JSON: ") + e.what());
    }
  } else {
    data = data_from_csv(text);
  }
  data.validate();
  return data;
}

void write_data(const std::filesystem::path& path, const CrossProductData& data) {
  if (path.extension() == ".json")
    write_text_file(path, data_to_json(data).dump(2) + "\n");
  else
    write_text_file(path, data_to_csv(data));
}

namespace {

json vector_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json matrix_json(const MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    const VectorXd row = m.row(i).transpose();
    rows.push_back(vector_json(row));
  }
  return rows;
}

}  // namespace

json map_fit_to_json(const MapFit& fit) {
  const Index m = response_count(fit.theta_hat.size());
  json named = json::object();
  const auto names = theta_column_names(m);
  for (std::size_t i = 0; i < names.size(); ++i)
    named[names[i]] = fit.theta_hat[static_cast<Index>(i)];
  return {{"theta_hat", vector_json(fit.theta_hat)},
          {"theta_names", names},
          {"theta_named", named},
          {"log_posterior", fit.log_posterior},
          {"grad_norm", fit.grad_norm},
          {"iterations", fit.iterations},
          {"converged", fit.converged},
          {"hessian_repaired", fit.hessian_repaired},
          {"ridge", fit.ridge},
          {"neg_expected_hessian", matrix_json(fit.neg_expected_hessian)},
          {"sigma_theta_hat", matrix_json(fit.sigma_theta_hat)}};
}

std::string draws_to_csv(const PosteriorDraws& draws) {
  std::ostringstream out;
  if (draws.empty()) return "chain\n";
  auto names = theta_column_names(response_count(draws.draws.front().size()));
  names.emplace_back("chain");
  out << join_header(names) << '\n';
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const auto& d = draws.draws[i];
    for (Index k = 0; k < d.size(); ++k) out << format_double(d[k]) << ',';
    out << draws.chain[i] << '\n';
  }
  return out.str();
}

json diagnostics_to_json(const PosteriorDraws& draws) {
  return {{"psrf", draws.psrf},
          {"ess", draws.ess},
          {"acceptance", draws.acceptance},
          {"draws", draws.size()},
          {"chains", draws.chains},
          {"converged", draws.converged}};
}

std::string curve_to_csv(const CalibrationCurve& curve) {
  std::ostringstream out;
  out << "nominal_alpha,xi,calibrated_alpha\n";
  for (std::size_t i = 0; i < curve.size(); ++i)
    out << format_double(curve.nominal_alphas[i]) << ',' << format_double(curve.thresholds[i])
        << ',' << format_double(curve.calibrated_alphas[i]) << '\n';
  return out.str();
}

json curve_to_json(const CalibrationCurve& curve, StatisticKind kind) {
  return {{"statistic", to_string(kind)},
          {"nominal_alpha", curve.nominal_alphas},
          {"xi", curve.thresholds},
          {"calibrated_alpha", curve.calibrated_alphas},
          {"mc_se", curve.mc_se}};
}

std::string trace_to_csv(const CalibrationResult& result) {
  std::ostringstream out;
  out << "k,a_k,c_k,indicator_plus,indicator_minus,skipped,step_norm,residual,delta_sum\n";
  for (std::size_t i = 0; i < result.trace.size(); ++i) {
    const auto& e = result.trace[i];
    out << i + 1 << ',' << format_double(e.a) << ',' << format_double(e.c) << ',' << e.plus << ','
        << e.minus << ',' << e.skipped << ',' << format_double(e.step_norm) << ','
        << format_double(e.residual) << ',' << format_double(e.delta_sum) << '\n';
  }
  return out.str();
}

std::string records_to_csv(const std::vector<ReplicationRecord>& records,
                           const std::vector<StatisticKind>& kinds) {
  std::ostringstream out;
  if (records.empty()) return "rep_id\n";
  std::vector<std::string> header{"rep_id"};
  for (const auto& n : theta_column_names(response_count(records.front().theta_true.size())))
    header.push_back("true_" + n);
  for (StatisticKind k : kinds) {
    const std::string s = to_string(k);
    header.insert(header.end(), {"stat_" + s, "original_" + s, "calibrated_" + s,
                                 "calibrated_se_" + s, "reliable_" + s});
  }
  header.insert(header.end(),
                {"map_converged", "mcmc_converged", "max_psrf", "min_ess", "flags"});
  out << join_header(header) << '\n';
  for (const auto& r : records) {
    out << r.rep_id;
    for (Index i = 0; i < r.theta_true.size(); ++i) out << ',' << format_double(r.theta_true[i]);
    for (StatisticKind k : kinds) {
      const ContourPair* c = r.find(k);
      if (c == nullptr) {
        out << ",,,,,";
        continue;
      }
      out << ',' << format_double(c->stat_true) << ',' << format_double(c->original) << ','
          << format_double(c->calibrated) << ',' << format_double(c->calibrated_mc_se) << ','
          << c->calibration_reliable;
    }
    std::string flags;
    for (std::size_t i = 0; i < r.flags.size(); ++i) flags += (i ? ";" : "") + r.flags[i];
    out << ',' << r.map_converged << ',' << r.mcmc_converged << ',' << format_double(r.max_psrf)
        << ',' << format_double(r.min_ess) << ',' << flags << '\n';
  }
  return out.str();
}

std::string edf_to_csv(const EdfSummary& s) {
  std::ostringstream out;
  out << "alpha,edf_original,edf_calibrated,band_lo,band_hi,records\n";
  for (std::size_t i = 0; i < s.alphas.size(); ++i)
    out << format_double(s.alphas[i]) << ',' << format_double(s.edf_original[i]) << ','
        << format_double(s.edf_calibrated[i]) << ',' << format_double(s.band_lo[i]) << ','
        << format_double(s.band_hi[i]) << ',' << s.records_used << '\n';
  return out.str();
}

std::string thetas_to_csv(const std::vector<ThetaVector>& thetas) {
  std::ostringstream out;
  if (thetas.empty()) return "rep_id\n";
  std::vector<std::string> header{"rep_id"};
  for (const auto& n : theta_column_names(response_count(thetas.front().size())))
    header.push_back(n);
  out << join_header(header) << '\n';
  for (std::size_t r = 0; r < thetas.size(); ++r) {
    out << r;
    for (Index i = 0; i < thetas[r].size(); ++i) out << ',' << format_double(thetas[r][i]);
    out << '\n';
  }
  return out.str();
}

json tuning_to_json(const TuningConstants& t) {
  return {{"alpha", t.alpha_rate},
          {"beta", t.beta_rate},
          {"gamma", t.gamma_rate},
          {"delta", t.delta_rate},
          {"iterations", t.iterations}};
}

TuningConstants tuning_from_json(const json& j) {
  TuningConstants t;
  t.alpha_rate = j.value("alpha", t.alpha_rate);
  t.beta_rate = j.value("beta", t.beta_rate);
  t.gamma_rate = j.value("gamma", t.gamma_rate);
  t.delta_rate = j.value("delta", t.delta_rate);
  t.iterations = j.value("iterations", t.iterations);
  return t;
}

json mcmc_to_json(const McmcConfig& c) {
  return {{"chains", c.chains},         {"adapt_iters", c.adapt_iters},
          {"burnin_iters", c.burnin_iters}, {"retain_iters", c.retain_iters},
          {"thin", c.thin},             {"seed", c.seed},
          {"init_jitter", c.init_jitter}};
}

McmcConfig mcmc_from_json(const json& j) {
  McmcConfig c;
  c.chains = j.value("chains", c.chains);
  c.adapt_iters = j.value("adapt_iters", c.adapt_iters);
  c.burnin_iters = j.value("burnin_iters", c.burnin_iters);
  c.retain_iters = j.value("retain_iters", c.retain_iters);
  c.thin = j.value("thin", c.thin);
  c.seed = j.value("seed", c.seed);
  c.init_jitter = j.value("init_jitter", c.init_jitter);
  return c;
}

json prior_to_json(const PriorSpec& p) {
  return {{"ig_shape", p.ig_shape},
          {"ig_scale", p.ig_scale},
          {"loading_prior", p.loading == LoadingPrior::Uniform ? "uniform" : "normal"},
          {"loading_variance", p.loading_variance}};
}

PriorSpec prior_from_json(const json& j) {
  PriorSpec p;
  p.ig_shape = j.value("ig_shape", p.ig_shape);
  p.ig_scale = j.value("ig_scale", p.ig_scale);
  p.loading = j.value("loading_prior", std::string("uniform")) == "normal"
                  ? LoadingPrior::DiffuseNormal
                  : LoadingPrior::Uniform;
  p.loading_variance = j.value("loading_variance", p.loading_variance);
  return p;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace credcal::io
