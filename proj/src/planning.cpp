#include "planex/planning.hpp"

#include "planex/json_io.hpp"

#include <cmath>
#include <limits>

namespace planex {

const char* to_string(PlannerKind kind) {
  return kind == PlannerKind::Exhaustive ? "exhaustive" : "shooting";
}

StepPolicy Policy::as_step_policy() const {
  auto acts = actions;
  const int first = first_step;
  return [acts = std::move(acts), first](int h, const Vector&) -> Vector {
    const int i = h - first;
    if (i < 0 || i >= static_cast<int>(acts.size()))
      throw PolicyError("open-loop policy queried outside its steps");
    return acts[static_cast<std::size_t>(i)];
  };
}

namespace {

int resolve_depth(const KnrWorld& model, const PlanStart& start) {
  const int remaining = model.horizon() - start.first_step;
  if (start.first_step < 0 || remaining < 1) throw DomainError("planner: start step out of range");
  if (start.state.size() != model.state_dim()) throw ConfigError("planner: state dimension mismatch");
  return start.depth > 0 ? std::min(start.depth, remaining) : remaining;
}

// A^D, saturating at `cap + 1`.
long count_sequences(std::size_t actions, int depth, long cap) {
  long n = 1;
  for (int d = 0; d < depth; ++d) {
    if (n > cap / static_cast<long>(std::max<std::size_t>(actions, 1))) return cap + 1;
    n *= static_cast<long>(actions);
  }
  return n;
}

PlanResult finish(const PlanStart& start, PlannerKind kind, std::vector<std::size_t> indices,
                  std::vector<Vector> actions, double value, long rollouts) {
  PlanResult out;
  out.planner = kind;
  out.value_estimate = value;
  out.n_model_rollouts = rollouts;
  out.policy.first_step = start.first_step;
  out.policy.action_indices = std::move(indices);
  out.policy.actions = std::move(actions);
  return out;
}

}  // namespace

ValueEstimate evaluate_open_loop(const KnrWorld& model, const PlanStart& start,
                                 const std::vector<Vector>& actions, const StepReward& rewards,
                                 int n_rollouts, RngStream& rng) {
  if (n_rollouts < 1) throw DomainError("evaluate_open_loop: n_rollouts must be >= 1");
  const int depth = static_cast<int>(actions.size());
  if (start.first_step + depth > model.horizon())
    throw DomainError("evaluate_open_loop: sequence runs past the horizon");
  const bool deterministic = model.sigma() == 0.0;
  const int n = deterministic ? 1 : n_rollouts;
  const auto& fm = model.features();
  Vector phi(fm.dim());
  double mean = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    Vector s = start.state;
    double g = 0.0;
    for (int d = 0; d < depth; ++d) {
      const Vector& a = actions[static_cast<std::size_t>(d)];
      fm.evaluate_into(s, a, phi);
      g += rewards(start.first_step + d, s, a, phi);
      if (d + 1 < depth) {
        Vector next = model.w_star() * phi;
        if (!deterministic)
          for (Index j = 0; j < next.size(); ++j) next[j] += model.sigma() * rng.normal();
        s = std::move(next);
      }
    }
    const double delta = g - mean;
    mean += delta / (i + 1);
    m2 += delta * (g - mean);
  }
  ValueEstimate out;
  out.mean = mean;
  if (n > 1) out.std_error = std::sqrt(std::max(0.0, m2 / (n - 1)) / n);
  return out;
}

PlanResult plan_exhaustive(const KnrWorld& model, const PlanStart& start,
                           const StepReward& rewards, const ExhaustiveOptions& opts,
                           RngStream& rng) {
  const auto& space = model.actions();
  if (!space.is_finite()) throw PlannerRefusal("exhaustive planner needs a finite action list");
  const int depth = resolve_depth(model, start);
  const std::size_t A = space.size();
  const long n_seq = count_sequences(A, depth, opts.budget);
  if (n_seq > opts.budget)
    throw PlannerRefusal("exhaustive planner: |A|^H exceeds the budget; use the shooting planner");

  std::vector<std::size_t> idx(static_cast<std::size_t>(depth), 0);
  std::vector<std::size_t> best_idx;
  double best = -std::numeric_limits<double>::infinity();

  if (model.sigma() == 0.0) {
    // Depth-first in lexicographic order, sharing prefix rollouts.
    const auto& fm = model.features();
    std::vector<Vector> states(static_cast<std::size_t>(depth), Vector(model.state_dim()));
    std::vector<Vector> phis(static_cast<std::size_t>(depth), Vector(fm.dim()));
    std::vector<double> prefix(static_cast<std::size_t>(depth) + 1, 0.0);
    states[0] = start.state;
    auto dfs = [&](auto&& self, int d) -> void {
      const auto ud = static_cast<std::size_t>(d);
      if (d == depth) {
        if (prefix[ud] > best) {
          best = prefix[ud];
          best_idx = idx;
        }
        return;
      }
      for (std::size_t a = 0; a < A; ++a) {
        idx[ud] = a;
        fm.evaluate_into(states[ud], space[a], phis[ud]);
        prefix[ud + 1] = prefix[ud] + rewards(start.first_step + d, states[ud], space[a], phis[ud]);
        if (d + 1 < depth) states[ud + 1].noalias() = model.w_star() * phis[ud];
        self(self, d + 1);
      }
    };
    dfs(dfs, 0);
  } else {
    std::vector<Vector> seq(static_cast<std::size_t>(depth));
    for (long n = 0; n < n_seq; ++n) {
      for (int d = 0; d < depth; ++d) seq[static_cast<std::size_t>(d)] = space[idx[static_cast<std::size_t>(d)]];
      const double v = evaluate_open_loop(model, start, seq, rewards, opts.n_eval_rollouts, rng).mean;
      if (v > best) {
        best = v;
        best_idx = idx;
      }
      // Odometer increment, last position fastest (lexicographic order).
      for (int d = depth - 1; d >= 0; --d) {
        auto& i = idx[static_cast<std::size_t>(d)];
        if (++i < A) break;
        i = 0;
      }
    }
  }

  std::vector<Vector> acts;
  acts.reserve(best_idx.size());
  for (auto i : best_idx) acts.push_back(space[i]);
  const long rollouts = model.sigma() == 0.0 ? n_seq : n_seq * opts.n_eval_rollouts;
  return finish(start, PlannerKind::Exhaustive, std::move(best_idx), std::move(acts), best,
                rollouts);
}

PlanResult plan_shooting(const KnrWorld& model, const PlanStart& start, const StepReward& rewards,
                         const ShootingOptions& opts, RngStream& rng) {
  if (opts.n_candidates < 1) throw DomainError("shooting planner: N must be >= 1");
  const auto& space = model.actions();
  const int depth = resolve_depth(model, start);
  const auto D = static_cast<std::size_t>(depth);

  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_idx;
  std::vector<Vector> best_seq;
  std::vector<std::size_t> idx(D);
  std::vector<Vector> seq(D);
  for (long c = 0; c < opts.n_candidates; ++c) {
    for (std::size_t d = 0; d < D; ++d) {
      if (space.is_finite()) {
        idx[d] = rng.index(space.size());
        seq[d] = space[idx[d]];
      } else {
        Vector a(space.dim());
        for (Index j = 0; j < a.size(); ++j) a[j] = rng.uniform(space.low()[j], space.high()[j]);
        seq[d] = std::move(a);
      }
    }
    const double v = evaluate_open_loop(model, start, seq, rewards, opts.n_eval_rollouts, rng).mean;
    if (v > best) {
      best = v;
      best_seq = seq;
      if (space.is_finite()) best_idx = idx;
    }
  }
  const long per = model.sigma() == 0.0 ? 1 : opts.n_eval_rollouts;
  return finish(start, PlannerKind::Shooting, std::move(best_idx), std::move(best_seq), best,
                opts.n_candidates * per);
}

double evaluate_policy_on_model(const Policy& policy, const StepReward& rewards,
                                const KnrWorld& model, const Vector& s1, int n_rollouts,
                                RngStream& rng) {
  PlanStart start{s1, policy.first_step, static_cast<int>(policy.actions.size())};
  return evaluate_open_loop(model, start, policy.actions, rewards, n_rollouts, rng).mean;
}

nlohmann::json PlannerConfig::to_json() const {
  return nlohmann::json{{"planner", to_string(kind)},
                        {"budget", budget},
                        {"n_candidates", n_candidates},
                        {"n_eval_rollouts", n_eval_rollouts},
                        {"plan_noise", plan_noise == PlanNoise::CertaintyEquivalent ? "ce" : "stochastic"},
                        {"mode", mode == Policy::Kind::OpenLoop ? "open-loop" : "mpc"},
                        {"inner_horizon", inner_horizon}};
}

PlannerConfig PlannerConfig::from_json(const nlohmann::json& j) {
  PlannerConfig c;
  const auto kind = json_io::get_or<std::string>(j, "planner", "exhaustive");
  if (kind == "exhaustive") {
    c.kind = PlannerKind::Exhaustive;
  } else if (kind == "shooting") {
    c.kind = PlannerKind::Shooting;
  } else {
    throw ConfigError("unknown planner '" + kind + "'");
  }
  c.budget = json_io::get_or<long>(j, "budget", c.budget);
  c.n_candidates = json_io::get_or<long>(j, "n_candidates", c.n_candidates);
  c.n_eval_rollouts = json_io::get_or<int>(j, "n_eval_rollouts", c.n_eval_rollouts);
  const auto noise = json_io::get_or<std::string>(j, "plan_noise", "ce");
  if (noise == "ce") {
    c.plan_noise = PlanNoise::CertaintyEquivalent;
  } else if (noise == "stochastic") {
    c.plan_noise = PlanNoise::Stochastic;
  } else {
    throw ConfigError("plan_noise must be 'ce' or 'stochastic'");
  }
  const auto mode = json_io::get_or<std::string>(j, "mode", "open-loop");
  if (mode == "open-loop") {
    c.mode = Policy::Kind::OpenLoop;
  } else if (mode == "mpc") {
    c.mode = Policy::Kind::Mpc;
  } else {
    throw ConfigError("mode must be 'open-loop' or 'mpc'");
  }
  c.inner_horizon = json_io::get_or<int>(j, "inner_horizon", 0);
  if (c.budget < 1 || c.n_candidates < 1 || c.n_eval_rollouts < 1 || c.inner_horizon < 0)
    throw ConfigError("planner budgets must be positive");
  return c;
}

PlanResult plan(const PlannerConfig& cfg, const KnrWorld& model, const PlanStart& start,
                const StepReward& rewards, RngStream& rng) {
  const KnrWorld& m = model;
  if (cfg.plan_noise == PlanNoise::CertaintyEquivalent && model.sigma() != 0.0) {
    const KnrWorld ce = model.with_dynamics(model.w_star(), 0.0);
    return plan(cfg, ce, start, rewards, rng);
  }
  PlanResult r = cfg.kind == PlannerKind::Exhaustive
                     ? plan_exhaustive(m, start, rewards, {cfg.budget, cfg.n_eval_rollouts}, rng)
                     : plan_shooting(m, start, rewards, {cfg.n_candidates, cfg.n_eval_rollouts}, rng);
  r.policy.kind = cfg.mode;
  r.policy.inner_horizon = cfg.inner_horizon;
  return r;
}

}  // namespace planex
