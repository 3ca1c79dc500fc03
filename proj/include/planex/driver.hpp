#pragma once

#include "planex/common.hpp"
#include "planex/planning.hpp"
#include "planex/randomization.hpp"
#include "planex/world.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace planex {

enum class AgentKind { PlanexKnr, PlanexGeneral, Greedy, UcbBonus, UniformRandom };

const char* to_string(AgentKind kind);
AgentKind agent_from_string(const std::string& name);

struct Seeds {
  std::uint64_t env = 0;
  std::uint64_t reward = 0;
  std::uint64_t planner = 0;
};

struct ExperimentConfig {
  nlohmann::json world = nlohmann::json::object();
  AgentKind agent = AgentKind::PlanexKnr;
  long K = 100;
  double lambda_reg = 1.0;

  SchemeKind scheme = SchemeKind::KnrGaussian;
  /// Multiplies beta_k inside sigma_k^2 (planex-knr) or ||phi||_{Lambda^-1}
  /// inside iota_k (planex-general). Good-event checks never see it.
  double beta_scale = 1.0;
  double sigma_min = 1e-3;
  std::optional<double> beta_delta;  // general schemes; default log K
  double bonus = 1.0;                // ucb-bonus coefficient b
  std::optional<double> w_norm_bound;  // default: true ||W*||_2
  std::optional<double> delta;         // good-event confidence; default 1/K

  PlannerConfig planner;
  Seeds seeds;

  int v_star_rollouts = 2000;
  std::optional<PlannerConfig> v_star_planner;
  /// Extra rollouts to re-evaluate each pi^k for the regret column (0 = use
  /// the realized return).
  int high_precision_rollouts = 0;
  double optimism_tolerance_se = 2.0;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

struct IterationRow {
  long k = 0;
  double episode_return = 0.0;
  double value_est = 0.0;
  double beta_k = 0.0;
  double logdet = 0.0;       // log det Lambda_k
  bool opt_flag = false;
  bool wgood_flag = false;
  double pot_sum = 0.0;      // sum_h ||phi_h||^2_{Lambda_k^{-1}}
  double cum_regret = 0.0;
  double logdet_next = 0.0;  // log det Lambda_{k+1}
  double maha_err = 0.0;     // ||(W* - W^k) Lambda_k^{1/2}||^2
  double xi_norm_sq_max = 0.0;
  double beta_xi = 0.0;
  bool xigood_flag = true;
  double sigma_k_sq = 0.0;
  double iota_sq_sum = 0.0;
};

struct RunRecord {
  std::string agent;
  std::string world;
  long K = 0;
  int horizon = 0;
  Index feature_dim = 0;
  double lambda_reg = 1.0;
  double v_star = 0.0;
  double v_star_se = 0.0;
  std::vector<IterationRow> rows;
};

using RowSink = std::function<void(const IterationRow&)>;

/// V* by planning on the true model with the true rewards, then Monte Carlo
/// evaluation on the true world. Uses its own named streams so it never
/// perturbs the run streams.
ValueEstimate estimate_v_star(const ExperimentConfig& config, const KnrWorld& world);
ValueEstimate estimate_v_star(const ExperimentConfig& config);

/// Algorithm loop with the KNR covariance-scaled Gaussian reward noise.
RunRecord run_planex_knr(const ExperimentConfig& config, const RowSink& sink = {});
/// Same loop with the general Gaussian / Bernoulli schemes over knr_iota.
RunRecord run_planex_general(const ExperimentConfig& config, const RowSink& sink = {});
/// greedy, ucb-bonus or uniform-random comparison agents.
RunRecord run_baseline(const ExperimentConfig& config, const RowSink& sink = {});
/// Dispatch on config.agent.
RunRecord run_experiment(const ExperimentConfig& config, const RowSink& sink = {});

/// Expands {"sweep": {"seeds": [...], "grid": {key: [values...]}}} into one
/// config per (grid point, seed). A seed s sets all three streams to s.
struct SweepItem {
  std::string label;
  ExperimentConfig config;
};
std::vector<SweepItem> expand_sweep(const nlohmann::json& j);

}  // namespace planex
