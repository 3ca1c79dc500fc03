#include "planex/driver.hpp"

#include "planex/json_io.hpp"
#include "planex/ridge.hpp"

#include <cmath>
#include <sstream>

namespace planex {

const char* to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::PlanexKnr:
      return "planex-knr";
    case AgentKind::PlanexGeneral:
      return "planex-general";
    case AgentKind::Greedy:
      return "greedy";
    case AgentKind::UcbBonus:
      return "ucb-bonus";
    case AgentKind::UniformRandom:
      return "uniform-random";
  }
  return "?";
}

AgentKind agent_from_string(const std::string& name) {
  if (name == "planex-knr") return AgentKind::PlanexKnr;
  if (name == "planex-general") return AgentKind::PlanexGeneral;
  if (name == "greedy") return AgentKind::Greedy;
  if (name == "ucb-bonus") return AgentKind::UcbBonus;
  if (name == "uniform-random") return AgentKind::UniformRandom;
  throw ConfigError("unknown agent '" + name + "'");
}

// ---------------------------------------------------------------------------
// Config

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j{{"world", world},
                   {"agent", planex::to_string(agent)},
                   {"K", K},
                   {"lambda_reg", lambda_reg},
                   {"scheme", planex::to_string(scheme)},
                   {"beta_scale", beta_scale},
                   {"sigma_min", sigma_min},
                   {"bonus", bonus},
                   {"planner", planner.to_json()},
                   {"seeds", {{"env", seeds.env}, {"reward", seeds.reward}, {"planner", seeds.planner}}},
                   {"high_precision_rollouts", high_precision_rollouts},
                   {"optimism_tolerance_se", optimism_tolerance_se}};
  nlohmann::json vs{{"n_rollouts", v_star_rollouts}};
  if (v_star_planner) vs["planner"] = v_star_planner->to_json();
  j["v_star"] = vs;
  if (beta_delta) j["beta_delta"] = *beta_delta;
  if (w_norm_bound) j["w_norm_bound"] = *w_norm_bound;
  if (delta) j["delta"] = *delta;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  using json_io::get_or;
  ExperimentConfig c;
  try {
    c.world = json_io::require(j, "world");
    c.agent = agent_from_string(json_io::require(j, "agent").get<std::string>());
    c.K = json_io::require(j, "K").get<long>();
    c.lambda_reg = get_or(j, "lambda_reg", c.lambda_reg);
    const std::string fallback_scheme =
        c.agent == AgentKind::PlanexGeneral ? "general-gaussian" : "knr-gaussian";
    c.scheme = scheme_from_string(get_or<std::string>(j, "scheme", fallback_scheme));
    c.beta_scale = get_or(j, "beta_scale", c.beta_scale);
    c.sigma_min = get_or(j, "sigma_min", c.sigma_min);
    if (j.contains("beta_delta") && !j["beta_delta"].is_null()) c.beta_delta = j["beta_delta"].get<double>();
    c.bonus = get_or(j, "bonus", c.bonus);
    if (j.contains("w_norm_bound") && !j["w_norm_bound"].is_null())
      c.w_norm_bound = j["w_norm_bound"].get<double>();
    if (j.contains("delta") && !j["delta"].is_null()) c.delta = j["delta"].get<double>();
    c.planner = PlannerConfig::from_json(j.value("planner", nlohmann::json::object()));

    if (j.contains("seeds")) {
      const auto& s = j["seeds"];
      c.seeds.env = json_io::require(s, "env").get<std::uint64_t>();
      c.seeds.reward = json_io::require(s, "reward").get<std::uint64_t>();
      c.seeds.planner = json_io::require(s, "planner").get<std::uint64_t>();
    } else if (j.contains("seed")) {
      const auto s = j["seed"].get<std::uint64_t>();
      c.seeds = {s, s, s};
    } else {
      throw ConfigError("config: seeds must be given explicitly ('seed' or 'seeds')");
    }
    if (j.contains("noise_seed_stream")) c.seeds.reward = j["noise_seed_stream"].get<std::uint64_t>();

    if (j.contains("v_star")) {
      const auto& v = j["v_star"];
      c.v_star_rollouts = get_or(v, "n_rollouts", c.v_star_rollouts);
      if (v.contains("planner")) c.v_star_planner = PlannerConfig::from_json(v["planner"]);
    }
    c.high_precision_rollouts = get_or(j, "high_precision_rollouts", c.high_precision_rollouts);
    c.optimism_tolerance_se = get_or(j, "optimism_tolerance_se", c.optimism_tolerance_se);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (c.K < 1) throw ConfigError("config: K must be >= 1");
  if (!(c.lambda_reg > 0.0)) throw ConfigError("config: lambda_reg must be positive");
  if (!(c.beta_scale >= 0.0)) throw ConfigError("config: beta_scale must be >= 0");
  if (!(c.sigma_min > 0.0)) throw ConfigError("config: sigma_min must be positive");
  if (c.beta_delta && !(*c.beta_delta >= 0.0)) throw ConfigError("config: beta_delta must be >= 0");
  if (!(c.bonus >= 0.0)) throw ConfigError("config: bonus must be >= 0");
  if (c.delta && !(*c.delta > 0.0 && *c.delta < 1.0)) throw ConfigError("config: delta must be in (0, 1)");
  if (c.v_star_rollouts < 1) throw ConfigError("config: v_star.n_rollouts must be >= 1");
  if (c.high_precision_rollouts < 0) throw ConfigError("config: high_precision_rollouts must be >= 0");
  if (c.agent == AgentKind::PlanexKnr && c.scheme != SchemeKind::KnrGaussian)
    throw ConfigError("config: planex-knr uses the knr-gaussian scheme");
  if (c.agent == AgentKind::PlanexGeneral && c.scheme == SchemeKind::KnrGaussian)
    throw ConfigError("config: planex-general needs scheme general-gaussian or bernoulli");
  return c;
}

// ---------------------------------------------------------------------------
// V*

ValueEstimate estimate_v_star(const ExperimentConfig& config, const KnrWorld& world) {
  PlannerConfig pc = config.v_star_planner.value_or(config.planner);
  pc.mode = Policy::Kind::OpenLoop;
  RngStream plan_rng(config.seeds.planner, "v-star-planner");
  RngStream env_rng(config.seeds.env, "v-star-env");
  const PlanResult best = plan(pc, world, PlanStart{world.s1(), 0, 0}, world.true_reward(), plan_rng);
  return monte_carlo_value(world, best.policy.as_step_policy(), std::nullopt,
                           config.v_star_rollouts, env_rng);
}

ValueEstimate estimate_v_star(const ExperimentConfig& config) {
  return estimate_v_star(config, world_from_config(config.world));
}

// ---------------------------------------------------------------------------
// The loop

namespace {

/// What an agent contributes to one round besides the shared bookkeeping.
struct RoundRewards {
  StepReward reward;
  bool random_policy = false;
  /// iota_k(phi); when set, the row records sum_h iota_k^2 along the episode.
  std::function<double(const Vector& phi)> iota;
};

using RewardBuilder = std::function<RoundRewards(long k, const Ridge& est, double beta_k,
                                                 IterationRow& row, RngStream& reward_rng)>;

std::vector<Vector> random_sequence(const ActionSpace& space, int H, RngStream& rng) {
  std::vector<Vector> seq;
  seq.reserve(static_cast<std::size_t>(H));
  for (int h = 0; h < H; ++h) {
    if (space.is_finite()) {
      seq.push_back(space[rng.index(space.size())]);
    } else {
      Vector a(space.dim());
      for (Index j = 0; j < a.size(); ++j) a[j] = rng.uniform(space.low()[j], space.high()[j]);
      seq.push_back(std::move(a));
    }
  }
  return seq;
}

/// Executes `first` for step 0 and re-plans from the observed state at every
/// later step.
StepPolicy mpc_policy(const PlannerConfig& pc, const KnrWorld& model, const StepReward& reward,
                      Vector first, RngStream& rng) {
  return [&pc, &model, reward, first = std::move(first), &rng](int h, const Vector& s) -> Vector {
    if (h == 0) return first;
    const PlanResult r = plan(pc, model, PlanStart{s, h, pc.inner_horizon}, reward, rng);
    return r.policy.actions.front();
  };
}

RunRecord run_loop(const ExperimentConfig& config, const RowSink& sink,
                   const RewardBuilder& build) {
  const KnrWorld world = world_from_config(config.world);
  const int H = world.horizon();
  const long K = config.K;

  RunRecord rec;
  rec.agent = to_string(config.agent);
  rec.world = world.name();
  rec.K = K;
  rec.horizon = H;
  rec.feature_dim = world.feature_dim();
  rec.lambda_reg = config.lambda_reg;
  const ValueEstimate vs = estimate_v_star(config, world);
  rec.v_star = vs.mean;
  rec.v_star_se = vs.std_error;
  const double opt_threshold = rec.v_star - config.optimism_tolerance_se * rec.v_star_se;

  RngStream env_rng(config.seeds.env, "env-noise");
  RngStream reward_rng(config.seeds.reward, "reward-noise");
  RngStream plan_rng(config.seeds.planner, "planner");
  RngStream hp_env(config.seeds.env, "hp-env");
  RngStream hp_plan(config.seeds.planner, "hp-planner");

  Ridge est(world.state_dim(), world.feature_dim(), config.lambda_reg);
  const double w_bound = config.w_norm_bound.value_or(world.w_star_norm());
  std::uint64_t chain = est.ingest_hash();
  double return_sum = 0.0;
  rec.rows.reserve(static_cast<std::size_t>(K));

  for (long k = 1; k <= K; ++k) {
    IterationRow row;
    row.k = k;
    const ConfidenceRadius rad = confidence_radius(est, k, w_bound, world.sigma());
    row.beta_k = rad.beta_k;
    row.logdet = est.log_det();
    row.maha_err = mahalanobis_error(est, world.w_star());
    row.wgood_flag = row.maha_err <= row.beta_k;

    const KnrWorld model = world.with_dynamics(est.w_hat(), world.sigma());
    const RoundRewards rr = build(k, est, rad.beta_k, row, reward_rng);
    const PlanStart start{world.s1(), 0, 0};

    StepPolicy policy;
    std::vector<Vector> open_loop;
    if (rr.random_policy) {
      open_loop = random_sequence(world.actions(), H, plan_rng);
      const KnrWorld ce = model.with_dynamics(model.w_star(), 0.0);
      row.value_est = evaluate_open_loop(ce, start, open_loop, rr.reward, 1, plan_rng).mean;
      Policy p;
      p.actions = open_loop;
      policy = p.as_step_policy();
    } else {
      PlanResult pr = plan(config.planner, model, start, rr.reward, plan_rng);
      row.value_est = pr.value_estimate;
      if (config.planner.mode == Policy::Kind::Mpc) {
        policy = mpc_policy(config.planner, model, rr.reward, pr.policy.actions.front(), plan_rng);
      } else {
        open_loop = pr.policy.actions;
        policy = pr.policy.as_step_policy();
      }
    }
    row.opt_flag = row.value_est >= opt_threshold;

    const Trajectory traj = rollout(world, policy, rr.reward, env_rng);
    row.episode_return = traj.true_return();
    if (config.high_precision_rollouts > 0) {
      const StepPolicy hp_policy =
          open_loop.empty()
              ? mpc_policy(config.planner, model, rr.reward, traj.steps.front().action, hp_plan)
              : policy;
      row.episode_return = monte_carlo_value(world, hp_policy, std::nullopt,
                                             config.high_precision_rollouts, hp_env)
                               .mean;
    }

    for (const auto& st : traj.steps) {
      const double u = phi_uncertainty(est, st.phi);
      row.pot_sum += u * u;
      if (rr.iota) {
        const double i = rr.iota(st.phi);
        row.iota_sq_sum += i * i;
      }
    }

    std::vector<Transition> transitions;
    transitions.reserve(traj.steps.size());
    for (const auto& st : traj.steps) transitions.push_back({st.state, st.action, st.next_state});
    est.absorb_episode(world.features(), transitions);
    chain = traj.replay_hash(chain);
    if (chain != est.ingest_hash())
      throw InvariantViolation("replay hash mismatch: estimator did not see the executed transitions");
    row.logdet_next = est.log_det();

    return_sum += row.episode_return;
    row.cum_regret = static_cast<double>(k) * rec.v_star - return_sum;

    if (sink) sink(row);
    rec.rows.push_back(row);
  }
  return rec;
}

double noise_sigma(const ExperimentConfig& config, const KnrWorld& world) {
  return world.sigma() > 0.0 ? world.sigma() : config.sigma_min;
}

void require_agent(const ExperimentConfig& config, std::initializer_list<AgentKind> kinds,
                   const char* who) {
  for (auto k : kinds)
    if (config.agent == k) return;
  throw ConfigError(std::string(who) + ": wrong agent kind '" + to_string(config.agent) + "'");
}

}  // namespace

RunRecord run_planex_knr(const ExperimentConfig& config, const RowSink& sink) {
  require_agent(config, {AgentKind::PlanexKnr}, "run_planex_knr");
  const KnrWorld world = world_from_config(config.world);
  const int H = world.horizon();
  const double sigma = noise_sigma(config, world);
  const double delta = config.delta.value_or(1.0 / static_cast<double>(config.K));
  const double log_term =
      std::log(static_cast<double>(config.K) * static_cast<double>(H) / delta);

  auto build = [&](long k, const Ridge& est, double beta_k, IterationRow& row,
                   RngStream& rng) -> RoundRewards {
    const double sk2 = sigma_k_squared(config.beta_scale * beta_k, H, sigma);
    auto draw = std::make_shared<KnrNoiseDraw>(draw_knr_noise(est.cholesky(), sk2, H, rng, k));
    row.sigma_k_sq = sk2;
    row.beta_xi = 2.0 * sk2 * log_term;
    for (const auto& xi : draw->xi)
      row.xi_norm_sq_max = std::max(row.xi_norm_sq_max, xi.dot(est.precision() * xi));
    row.xigood_flag = row.xi_norm_sq_max <= row.beta_xi;
    const RewardSpec& r = world.rewards();
    RoundRewards out;
    out.reward = [&r, draw](int h, const Vector& s, const Vector& a, const Vector& phi) {
      return perturb_knr(r(h, s, a), phi, draw->xi[static_cast<std::size_t>(h)]);
    };
    return out;
  };
  return run_loop(config, sink, build);
}

RunRecord run_planex_general(const ExperimentConfig& config, const RowSink& sink) {
  require_agent(config, {AgentKind::PlanexGeneral}, "run_planex_general");
  if (config.scheme == SchemeKind::KnrGaussian)
    throw ConfigError("run_planex_general: scheme must be general-gaussian or bernoulli");
  const KnrWorld world = world_from_config(config.world);
  const int H = world.horizon();
  const double bd = config.beta_delta.value_or(default_beta_delta(config.K));
  const double scale = config.beta_scale;
  const RewardSpec& r = world.rewards();

  auto build = [&](long, const Ridge& est, double, IterationRow&, RngStream& rng) -> RoundRewards {
    RoundRewards out;
    out.iota = [&est, scale](const Vector& phi) { return knr_iota(est, phi, scale); };
    if (config.scheme == SchemeKind::GeneralGaussian) {
      const GaussianRewardField field(rng.next_u64(), H, bd);
      out.reward = [&r, &est, field, scale](int h, const Vector& s, const Vector& a,
                                            const Vector& phi) {
        return field(h, s, a, r(h, s, a), knr_iota(est, phi, scale));
      };
    } else {
      const BernoulliRewardField field(H, bd, rng);
      out.reward = [&r, &est, field, scale](int h, const Vector& s, const Vector& a,
                                            const Vector& phi) {
        return field(h, r(h, s, a), knr_iota(est, phi, scale));
      };
    }
    return out;
  };
  return run_loop(config, sink, build);
}

RunRecord run_baseline(const ExperimentConfig& config, const RowSink& sink) {
  require_agent(config, {AgentKind::Greedy, AgentKind::UcbBonus, AgentKind::UniformRandom},
                "run_baseline");
  const KnrWorld world = world_from_config(config.world);
  const RewardSpec& r = world.rewards();
  const double b = config.bonus;
  auto build = [&](long, const Ridge& est, double, IterationRow&, RngStream&) -> RoundRewards {
    RoundRewards out;
    switch (config.agent) {
      case AgentKind::UcbBonus:
        out.reward = [&r, &est, b](int h, const Vector& s, const Vector& a, const Vector& phi) {
          return r(h, s, a) + b * phi_uncertainty(est, phi);
        };
        break;
      case AgentKind::UniformRandom:
        out.random_policy = true;
        [[fallthrough]];
      default:
        out.reward = [&r](int h, const Vector& s, const Vector& a, const Vector&) {
          return r(h, s, a);
        };
    }
    return out;
  };
  return run_loop(config, sink, build);
}

RunRecord run_experiment(const ExperimentConfig& config, const RowSink& sink) {
  switch (config.agent) {
    case AgentKind::PlanexKnr:
      return run_planex_knr(config, sink);
    case AgentKind::PlanexGeneral:
      return run_planex_general(config, sink);
    default:
      return run_baseline(config, sink);
  }
}

// ---------------------------------------------------------------------------
// Sweeps

namespace {

void set_path(nlohmann::json& j, const std::string& dotted, const nlohmann::json& value) {
  nlohmann::json* node = &j;
  std::stringstream ss(dotted);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("sweep: empty grid key");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  (*node)[parts.back()] = value;
}

}  // namespace

std::vector<SweepItem> expand_sweep(const nlohmann::json& j) {
  const auto& base = json_io::require(j, "base");
  const auto& sweep = json_io::require(j, "sweep");
  const auto& seeds = json_io::require(sweep, "seeds");
  if (!seeds.is_array() || seeds.empty()) throw ConfigError("sweep: seeds must be a nonempty list");
  std::vector<std::pair<std::string, nlohmann::json>> axes;
  if (sweep.contains("grid"))
    for (const auto& [key, values] : sweep["grid"].items()) {
      if (!values.is_array() || values.empty())
        throw ConfigError("sweep: grid values for '" + key + "' must be a nonempty list");
      axes.emplace_back(key, values);
    }

  std::vector<SweepItem> out;
  std::vector<std::size_t> pos(axes.size(), 0);
  while (true) {
    for (const auto& seed : seeds) {
      nlohmann::json cfg = base;
      std::string label;
      for (std::size_t i = 0; i < axes.size(); ++i) {
        const auto& v = axes[i].second[pos[i]];
        set_path(cfg, axes[i].first, v);
        label += axes[i].first + "=" + v.dump() + ",";
      }
      cfg.erase("seeds");
      cfg["seed"] = seed;
      label += "seed=" + seed.dump();
      out.push_back({label, ExperimentConfig::from_json(cfg)});
    }
    std::size_t i = axes.size();
    while (i > 0) {
      --i;
      if (++pos[i] < axes[i].second.size()) break;
      pos[i] = 0;
      if (i == 0) return out;
    }
    if (axes.empty()) return out;
  }
}

}  // namespace planex
