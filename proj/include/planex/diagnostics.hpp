#pragma once

#include "planex/driver.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace planex {

/// Phi(-1), the partial-optimism probability.
double optimism_floor();

struct OptimismRates {
  double rate = 0.0;
  double rate_given_wgood = 0.0;
  long n = 0;
  long n_wgood = 0;
};

/// Fraction of rounds whose planned value on the fitted model under the
/// perturbed rewards reaches v_star - tolerance_se * se(v_star), overall and
/// restricted to rounds where the model good event held. Recomputed from the
/// row values; the stored opt_flag is not trusted.
OptimismRates optimism_rate(const RunRecord& record, double tolerance_se = 2.0);
/// Pooled over records (each against its own v_star).
OptimismRates optimism_rate(const std::vector<RunRecord>& records, double tolerance_se = 2.0);

struct GoodEventRates {
  double wgood_rate = 0.0;
  double xigood_rate = 0.0;
  long n = 0;
};
/// Empirical frequencies of the model and noise good events over rounds k >= k_min.
/// An infinite beta_k counts as good.
GoodEventRates good_event_frequency(const RunRecord& record, long k_min = 1);

/// 2 (log det Lambda_{K+1} - log det Lambda_1) - sum_k pot_sum_k. Zero for an
/// empty record. Throws InvariantViolation when below -1e-6.
double potential_check(const RunRecord& record);
/// Same margin without the throw.
double potential_margin(const RunRecord& record);

inline constexpr double kPotentialTolerance = 1e-6;
inline constexpr double kRegretFloor = 1e-6;

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t n_points = 0;
  bool floored = false;  // some R(k) <= 0 was raised to kRegretFloor
};

/// Least-squares slope of log R(k) against log k for k in
/// [ceil(window_start * K), K], where R(k) = cum_regret[k - 1].
SlopeFit loglog_slope(const std::vector<double>& cum_regret, double window_start = 0.25);

struct RegretSlopeOptions {
  double window_start = 0.25;
  int n_bootstrap = 1000;
  std::uint64_t bootstrap_seed = 0;
  std::size_t min_seeds = 5;
  long min_K = 500;
};

struct RegretSlope {
  double slope = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<double> per_seed;
  bool floored = false;
};

/// Mean of per-seed log-log slopes with a percentile bootstrap CI over seeds.
RegretSlope regret_slope(const std::vector<RunRecord>& records,
                         const RegretSlopeOptions& opts = {});

struct DiagnosticsReport {
  double optimism_rate = 0.0;
  double optimism_rate_given_wgood = 0.0;
  double wgood_frequency = 0.0;
  double xigood_frequency = 0.0;
  double potential_bound_margin = 0.0;  // minimum over records
  std::optional<RegretSlope> regret_slope;
  std::map<std::string, bool> flags;
  /// Deterministic invariants that failed; nonempty means a hard failure.
  std::vector<std::string> hard_failures;

  bool ok() const { return hard_failures.empty(); }
  nlohmann::json to_json() const;
  std::string to_table() const;
};

struct DiagnosticsOptions {
  double tolerance_se = 2.0;
  double optimism_margin = 0.03;
  RegretSlopeOptions slope;
};

/// Runs every check over a set of records of one configuration.
DiagnosticsReport diagnose(const std::vector<RunRecord>& records,
                           const DiagnosticsOptions& opts = {});

// ---------------------------------------------------------------------------
// CSV

/// Header of the per-run CSV: the nine required columns then the extras.
const std::vector<std::string>& csv_columns();
void write_csv(const std::string& path, const RunRecord& record);
std::string to_csv(const RunRecord& record);
/// Reads rows back; throws SchemaError if a required column is missing.
/// Metadata (agent, v_star, ...) is not part of the CSV and is left default.
RunRecord read_csv(const std::string& path);
RunRecord parse_csv(const std::string& text);

/// Summary document written next to a run CSV.
nlohmann::json run_summary(const RunRecord& record);

}  // namespace planex
