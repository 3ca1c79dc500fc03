#include "planex/diagnostics.hpp"

#include "planex/json_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace planex {

double optimism_floor() { return normal_cdf(-1.0); }

// ---------------------------------------------------------------------------
// Optimism and good events

namespace {

void accumulate_optimism(const RunRecord& rec, double tolerance_se, long& hits, long& n,
                         long& hits_good, long& n_good) {
  const double threshold = rec.v_star - tolerance_se * rec.v_star_se;
  for (const auto& row : rec.rows) {
    if (!std::isfinite(row.value_est)) throw SchemaError("optimism_rate: non-finite value_est");
    const bool opt = row.value_est >= threshold;
    ++n;
    hits += opt;
    if (row.wgood_flag) {
      ++n_good;
      hits_good += opt;
    }
  }
}

OptimismRates finish_rates(long hits, long n, long hits_good, long n_good) {
  OptimismRates r;
  r.n = n;
  r.n_wgood = n_good;
  r.rate = n > 0 ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
  r.rate_given_wgood = n_good > 0 ? static_cast<double>(hits_good) / static_cast<double>(n_good) : 0.0;
  return r;
}

}  // namespace

OptimismRates optimism_rate(const RunRecord& record, double tolerance_se) {
  long hits = 0, n = 0, hg = 0, ng = 0;
  accumulate_optimism(record, tolerance_se, hits, n, hg, ng);
  return finish_rates(hits, n, hg, ng);
}

OptimismRates optimism_rate(const std::vector<RunRecord>& records, double tolerance_se) {
  long hits = 0, n = 0, hg = 0, ng = 0;
  for (const auto& r : records) accumulate_optimism(r, tolerance_se, hits, n, hg, ng);
  return finish_rates(hits, n, hg, ng);
}

GoodEventRates good_event_frequency(const RunRecord& record, long k_min) {
  long n = 0, w = 0, x = 0;
  for (const auto& row : record.rows) {
    if (row.k < k_min) continue;
    ++n;
    // Recomputed from the stored quantities; an infinite radius is always met.
    w += std::isinf(row.beta_k) || row.maha_err <= row.beta_k;
    x += std::isinf(row.beta_xi) || row.xi_norm_sq_max <= row.beta_xi;
  }
  GoodEventRates out;
  out.n = n;
  if (n > 0) {
    out.wgood_rate = static_cast<double>(w) / static_cast<double>(n);
    out.xigood_rate = static_cast<double>(x) / static_cast<double>(n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elliptical potential

double potential_margin(const RunRecord& record) {
  if (record.rows.empty()) return 0.0;
  double lhs = 0.0;
  for (const auto& row : record.rows) lhs += row.pot_sum;
  const double rhs = 2.0 * (record.rows.back().logdet_next - record.rows.front().logdet);
  return rhs - lhs;
}

double potential_check(const RunRecord& record) {
  const double m = potential_margin(record);
  if (!(m >= -kPotentialTolerance)) {
    std::ostringstream os;
    os << "elliptical potential bound violated: margin " << m;
    throw InvariantViolation(os.str());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Regret slopes

SlopeFit loglog_slope(const std::vector<double>& cum_regret, double window_start) {
  const auto K = static_cast<long>(cum_regret.size());
  if (K < 2) throw DomainError("loglog_slope: need at least two points");
  if (!(window_start > 0.0 && window_start < 1.0))
    throw DomainError("loglog_slope: window start must be in (0, 1)");
  const long k0 = std::max(1L, static_cast<long>(std::ceil(window_start * static_cast<double>(K))));
  SlopeFit fit;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (long k = k0; k <= K; ++k) {
    double r = cum_regret[static_cast<std::size_t>(k - 1)];
    if (!(r >= kRegretFloor)) {
      fit.floored = true;
      r = kRegretFloor;
    }
    const double x = std::log(static_cast<double>(k)), y = std::log(r);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++fit.n_points;
  }
  if (fit.n_points < 2) throw DomainError("loglog_slope: window holds fewer than two points");
  const double n = static_cast<double>(fit.n_points);
  const double mx = sx / n, my = sy / n;
  const double vxx = sxx / n - mx * mx;
  fit.slope = (sxy / n - mx * my) / vxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

RegretSlope regret_slope(const std::vector<RunRecord>& records, const RegretSlopeOptions& opts) {
  if (records.size() < opts.min_seeds)
    throw DomainError("regret_slope: need at least " + std::to_string(opts.min_seeds) + " seeds");
  RegretSlope out;
  for (const auto& rec : records) {
    if (static_cast<long>(rec.rows.size()) < opts.min_K)
      throw DomainError("regret_slope: need K >= " + std::to_string(opts.min_K));
    std::vector<double> r;
    r.reserve(rec.rows.size());
    for (const auto& row : rec.rows) r.push_back(row.cum_regret);
    const SlopeFit f = loglog_slope(r, opts.window_start);
    out.per_seed.push_back(f.slope);
    out.floored = out.floored || f.floored;
  }
  const auto n = out.per_seed.size();
  out.slope = std::accumulate(out.per_seed.begin(), out.per_seed.end(), 0.0) / static_cast<double>(n);

  RngStream rng(opts.bootstrap_seed, "bootstrap");
  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(opts.n_bootstrap));
  for (int b = 0; b < opts.n_bootstrap; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += out.per_seed[rng.index(n)];
    means.push_back(s / static_cast<double>(n));
  }
  if (means.empty()) {
    out.ci_low = out.ci_high = out.slope;
  } else {
    std::sort(means.begin(), means.end());
    auto quantile = [&means](double q) {
      const double pos = q * static_cast<double>(means.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const auto hi = std::min(lo + 1, means.size() - 1);
      return means[lo] + (pos - static_cast<double>(lo)) * (means[hi] - means[lo]);
    };
    out.ci_low = quantile(0.025);
    out.ci_high = quantile(0.975);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report

DiagnosticsReport diagnose(const std::vector<RunRecord>& records, const DiagnosticsOptions& opts) {
  DiagnosticsReport rep;
  if (records.empty()) return rep;
  const OptimismRates opt = optimism_rate(records, opts.tolerance_se);
  rep.optimism_rate = opt.rate;
  rep.optimism_rate_given_wgood = opt.rate_given_wgood;

  long n = 0;
  double w = 0.0, x = 0.0;
  rep.potential_bound_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const GoodEventRates g = good_event_frequency(records[i]);
    w += g.wgood_rate * static_cast<double>(g.n);
    x += g.xigood_rate * static_cast<double>(g.n);
    n += g.n;
    const double m = potential_margin(records[i]);
    rep.potential_bound_margin = std::min(rep.potential_bound_margin, m);
    if (!(m >= -kPotentialTolerance))
      rep.hard_failures.push_back("potential bound, record " + std::to_string(i));
    double sum = 0.0;
    for (std::size_t r = 0; r < records[i].rows.size(); ++r) {
      sum += records[i].rows[r].episode_return;
      const double expect = static_cast<double>(r + 1) * records[i].v_star - sum;
      if (std::abs(records[i].rows[r].cum_regret - expect) > 1e-9 * std::max(1.0, std::abs(expect))) {
        rep.hard_failures.push_back("regret identity, record " + std::to_string(i));
        break;
      }
    }
  }
  if (n > 0) {
    rep.wgood_frequency = w / static_cast<double>(n);
    rep.xigood_frequency = x / static_cast<double>(n);
  }

  rep.flags["potential_bound"] = rep.potential_bound_margin >= -kPotentialTolerance;
  rep.flags["partial_optimism"] =
      rep.optimism_rate_given_wgood >= optimism_floor() - opts.optimism_margin;
  const bool slope_ok = records.size() >= opts.slope.min_seeds &&
                        std::all_of(records.begin(), records.end(), [&](const RunRecord& r) {
                          return static_cast<long>(r.rows.size()) >= opts.slope.min_K;
                        });
  if (slope_ok) rep.regret_slope = regret_slope(records, opts.slope);
  return rep;
}

nlohmann::json DiagnosticsReport::to_json() const {
  nlohmann::json j{{"optimism_rate", optimism_rate},
                   {"optimism_rate_given_wgood", optimism_rate_given_wgood},
                   {"optimism_floor", optimism_floor()},
                   {"wgood_frequency", wgood_frequency},
                   {"xigood_frequency", xigood_frequency},
                   {"potential_bound_margin", potential_bound_margin},
                   {"flags", flags},
                   {"hard_failures", hard_failures},
                   {"ok", ok()}};
  if (regret_slope) {
    j["regret_slope"] = {{"slope", regret_slope->slope},
                         {"ci", {regret_slope->ci_low, regret_slope->ci_high}},
                         {"per_seed", regret_slope->per_seed},
                         {"floored", regret_slope->floored}};
  } else {
    j["regret_slope"] = nullptr;
  }
  return j;
}

std::string DiagnosticsReport::to_table() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  auto line = [&os](const std::string& name, double v) {
    os << std::left << std::setw(28) << name << v << '\n';
  };
  line("optimism rate", optimism_rate);
  line("optimism rate | W good", optimism_rate_given_wgood);
  line("Phi(-1)", optimism_floor());
  line("W good frequency", wgood_frequency);
  line("xi good frequency", xigood_frequency);
  line("potential margin (min)", potential_bound_margin);
  if (regret_slope) {
    line("regret slope", regret_slope->slope);
    line("  ci low", regret_slope->ci_low);
    line("  ci high", regret_slope->ci_high);
  }
  for (const auto& [k, v] : flags) os << std::left << std::setw(28) << k << (v ? "pass" : "FAIL") << '\n';
  for (const auto& f : hard_failures) os << "HARD FAILURE: " << f << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// CSV

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "k",           "return",     "value_est",      "beta_k",  "logdet",
      "opt_flag",    "wgood_flag", "pot_sum",        "cum_regret",
      "logdet_next", "maha_err",   "xi_norm_sq_max", "beta_xi", "xigood_flag",
      "sigma_k_sq",  "iota_sq_sum"};
  return cols;
}

namespace {

constexpr std::size_t kRequiredColumns = 9;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_csv(const RunRecord& record) {
  std::ostringstream os;
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : record.rows) {
    os << r.k << ',' << fmt(r.episode_return) << ',' << fmt(r.value_est) << ',' << fmt(r.beta_k)
       << ',' << fmt(r.logdet) << ',' << int(r.opt_flag) << ',' << int(r.wgood_flag) << ','
       << fmt(r.pot_sum) << ',' << fmt(r.cum_regret) << ',' << fmt(r.logdet_next) << ','
       << fmt(r.maha_err) << ',' << fmt(r.xi_norm_sq_max) << ',' << fmt(r.beta_xi) << ','
       << int(r.xigood_flag) << ',' << fmt(r.sigma_k_sq) << ',' << fmt(r.iota_sq_sum) << '\n';
  }
  return os.str();
}

void write_csv(const std::string& path, const RunRecord& record) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  f << to_csv(record);
}

RunRecord parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("csv: empty input");
  auto split = [](const std::string& l) {
    std::vector<std::string> out;
    std::stringstream ss(l);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      out.push_back(cell);
    }
    return out;
  };
  const auto header = split(line);
  const auto& cols = csv_columns();
  std::vector<int> where(cols.size(), -1);
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (std::size_t h = 0; h < header.size(); ++h)
      if (header[h] == cols[c]) where[c] = static_cast<int>(h);
  for (std::size_t c = 0; c < kRequiredColumns; ++c)
    if (where[c] < 0) throw SchemaError("csv: missing column '" + cols[c] + "'");

  RunRecord rec;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    auto get = [&](std::size_t c, double fallback) -> double {
      if (where[c] < 0) return fallback;
      const auto idx = static_cast<std::size_t>(where[c]);
      if (idx >= cells.size()) throw SchemaError("csv: short row at line " + std::to_string(line_no));
      try {
        return std::stod(cells[idx]);
      } catch (const std::exception&) {
        throw SchemaError("csv: bad number '" + cells[idx] + "' at line " + std::to_string(line_no));
      }
    };
    IterationRow r;
    r.k = static_cast<long>(get(0, 0));
    r.episode_return = get(1, 0);
    r.value_est = get(2, 0);
    r.beta_k = get(3, 0);
    r.logdet = get(4, 0);
    r.opt_flag = get(5, 0) != 0.0;
    r.wgood_flag = get(6, 0) != 0.0;
    r.pot_sum = get(7, 0);
    r.cum_regret = get(8, 0);
    r.logdet_next = get(9, 0);
    r.maha_err = get(10, 0);
    r.xi_norm_sq_max = get(11, 0);
    r.beta_xi = get(12, std::numeric_limits<double>::infinity());
    r.xigood_flag = get(13, 1) != 0.0;
    r.sigma_k_sq = get(14, 0);
    r.iota_sq_sum = get(15, 0);
    rec.rows.push_back(r);
  }
  // The potential check needs logdet at k+1; without the extra column take it
  // from the next row.
  if (where[9] < 0)
    for (std::size_t i = 0; i + 1 < rec.rows.size(); ++i) rec.rows[i].logdet_next = rec.rows[i + 1].logdet;
  rec.K = static_cast<long>(rec.rows.size());
  return rec;
}

RunRecord read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_csv(ss.str());
}

nlohmann::json run_summary(const RunRecord& record) {
  nlohmann::json j{{"agent", record.agent},
                   {"world", record.world},
                   {"K", record.K},
                   {"horizon", record.horizon},
                   {"feature_dim", record.feature_dim},
                   {"lambda_reg", record.lambda_reg},
                   {"v_star", record.v_star},
                   {"v_star_se", record.v_star_se}};
  if (!record.rows.empty()) {
    j["final_regret"] = record.rows.back().cum_regret;
    const OptimismRates o = optimism_rate(record);
    j["optimism_rate"] = o.rate;
    j["optimism_rate_given_wgood"] = o.rate_given_wgood;
    const GoodEventRates g = good_event_frequency(record);
    j["wgood_frequency"] = g.wgood_rate;
    j["xigood_frequency"] = g.xigood_rate;
    j["potential_bound_margin"] = potential_margin(record);
    std::vector<double> r;
    for (const auto& row : record.rows) r.push_back(row.cum_regret);
    if (r.size() >= 2) {
      const SlopeFit f = loglog_slope(r);
      j["regret_slope"] = f.slope;
      j["regret_slope_floored"] = f.floored;
    }
  }
  return j;
}

}  // namespace planex
