#pragma once

#include "planex/common.hpp"
#include "planex/world.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace planex {

enum class PlannerKind { Exhaustive, Shooting };

const char* to_string(PlannerKind kind);

/// Open-loop action sequence, optionally re-planned at every step (MPC) when
/// executed against the real environment.
struct Policy {
  enum class Kind { OpenLoop, Mpc };
  Kind kind = Kind::OpenLoop;
  int first_step = 0;
  std::vector<Vector> actions;             // one per remaining step
  std::vector<std::size_t> action_indices; // finite action spaces only
  int inner_horizon = 0;                   // mpc: 0 means "to the end"

  /// (h, s) -> action for the open-loop part; ignores s.
  StepPolicy as_step_policy() const;
};

struct PlanResult {
  Policy policy;
  double value_estimate = 0.0;
  PlannerKind planner = PlannerKind::Exhaustive;
  long n_model_rollouts = 0;
};

/// Where planning starts on a model. The model is a KnrWorld whose W and sigma
/// are the fitted ones; its own rewards are ignored in favour of `rewards`.
struct PlanStart {
  Vector state;
  int first_step = 0;
  /// Steps to plan over; 0 plans to the end of the horizon.
  int depth = 0;
};

struct ExhaustiveOptions {
  long budget = 100000;
  int n_eval_rollouts = 1;
};

struct ShootingOptions {
  long n_candidates = 1024;
  int n_eval_rollouts = 1;
};

/// Enumerates every open-loop sequence and returns the best one; ties go to
/// the lexicographically first action-index sequence. With sigma = 0 the
/// enumeration shares prefixes, otherwise each sequence is scored by
/// n_eval_rollouts Monte Carlo rollouts on the model.
PlanResult plan_exhaustive(const KnrWorld& model, const PlanStart& start,
                           const StepReward& rewards, const ExhaustiveOptions& opts,
                           RngStream& rng);

/// Random shooting: N open-loop candidates drawn uniformly (per-step uniform
/// over a finite list, or uniform in the box), best kept; ties go to the
/// earliest candidate.
PlanResult plan_shooting(const KnrWorld& model, const PlanStart& start, const StepReward& rewards,
                         const ShootingOptions& opts, RngStream& rng);

/// Value of an open-loop sequence on the model under `rewards`; exact when
/// the model is deterministic.
ValueEstimate evaluate_open_loop(const KnrWorld& model, const PlanStart& start,
                                 const std::vector<Vector>& actions, const StepReward& rewards,
                                 int n_rollouts, RngStream& rng);

/// V^pi_1 of a policy on the fitted model under the supplied rewards.
double evaluate_policy_on_model(const Policy& policy, const StepReward& rewards,
                                const KnrWorld& model, const Vector& s1, int n_rollouts,
                                RngStream& rng);

enum class PlanNoise { CertaintyEquivalent, Stochastic };

struct PlannerConfig {
  PlannerKind kind = PlannerKind::Exhaustive;
  long budget = 100000;
  long n_candidates = 1024;
  int n_eval_rollouts = 1;
  PlanNoise plan_noise = PlanNoise::CertaintyEquivalent;
  Policy::Kind mode = Policy::Kind::OpenLoop;
  int inner_horizon = 0;

  nlohmann::json to_json() const;
  static PlannerConfig from_json(const nlohmann::json& j);
};

/// Dispatches to the configured planner on `model` (W, sigma as given; sigma
/// is zeroed for certainty-equivalent planning).
PlanResult plan(const PlannerConfig& cfg, const KnrWorld& model, const PlanStart& start,
                const StepReward& rewards, RngStream& rng);

}  // namespace planex
