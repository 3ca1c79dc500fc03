#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "planex/planning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

using namespace planex;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// Return of an acceleration sequence on the noiseless double integrator,
// simulated from the closed-form recursion rather than through the features.
double integrator_return(const KnrWorld& w, double dt, const std::vector<double>& us) {
  double p = w.s1()[0], v = w.s1()[1], g = 0.0;
  for (std::size_t h = 0; h < us.size(); ++h) {
    g += w.reward(static_cast<int>(h), vec({p, v}), vec({us[h]}));
    p = p + v * dt + 0.5 * us[h] * dt * dt;
    v = v + us[h] * dt;
  }
  return g;
}

const StepReward zero_reward = [](int, const Vector&, const Vector&, const Vector&) { return 0.0; };

}  // namespace

TEST_CASE("one step picks the best action") {
  const auto w = make_integrator_world({.horizon = 1, .sigma = 0.0});
  RngStream rng(1, "planner");
  const auto r = plan_exhaustive(w, {w.s1()}, w.true_reward(), {}, rng);
  double best = -1;
  for (const auto& a : w.actions().actions()) best = std::max(best, w.reward(0, w.s1(), a));
  CHECK(r.value_estimate == best);
  CHECK(r.policy.actions.size() == 1);
}

TEST_CASE("exhaustive search matches brute force over all 27 sequences") {
  const double dt = 0.5;
  const auto w = make_integrator_world({.horizon = 3, .sigma = 0.0, .dt = dt});
  RngStream rng(1, "planner");
  const auto r = plan_exhaustive(w, {w.s1()}, w.true_reward(), {}, rng);
  const std::vector<double> acc{-1.0, 0.0, 1.0};
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> arg;
  for (double a : acc)
    for (double b : acc)
      for (double c : acc) {
        const double g = integrator_return(w, dt, {a, b, c});
        if (g > best) {
          best = g;
          arg = {a, b, c};
        }
      }
  CHECK(r.value_estimate == doctest::Approx(best).epsilon(1e-12));
  for (std::size_t h = 0; h < 3; ++h) CHECK(r.policy.actions[h][0] == arg[h]);
  CHECK(r.n_model_rollouts == 27);
}

TEST_CASE("ties go to the lexicographically first sequence") {
  const auto w = make_integrator_world({.horizon = 3, .sigma = 0.0});
  RngStream rng(1, "planner");
  const auto r = plan_exhaustive(w, {w.s1()}, zero_reward, {}, rng);
  CHECK(r.policy.action_indices == std::vector<std::size_t>{0, 0, 0});
  CHECK(r.value_estimate == 0.0);
  // The stochastic path enumerates in the same order.
  const auto noisy = make_integrator_world({.horizon = 3, .sigma = 0.1});
  const auto s = plan_exhaustive(noisy, {noisy.s1()}, zero_reward, {100000, 2}, rng);
  CHECK(s.policy.action_indices == std::vector<std::size_t>{0, 0, 0});
}

TEST_CASE("refusals") {
  RngStream rng(1, "planner");
  const auto corridor = make_corridor_world();  // 5^6 sequences
  CHECK_THROWS_AS(plan_exhaustive(corridor, {corridor.s1()}, corridor.true_reward(), {1000, 1}, rng),
                  PlannerRefusal);
  CHECK_NOTHROW(plan_exhaustive(corridor, {corridor.s1()}, corridor.true_reward(), {15625, 1}, rng));

  nlohmann::json j = make_integrator_world({.horizon = 2}).to_json();
  j.erase("actions");
  j["action_box"] = ActionSpace::box(vec({-1}), vec({1})).to_json()["action_box"];
  const auto box_world = KnrWorld::from_json(j);
  CHECK_THROWS_AS(plan_exhaustive(box_world, {box_world.s1()}, box_world.true_reward(), {}, rng),
                  PlannerRefusal);
  const auto shot = plan_shooting(box_world, {box_world.s1()}, box_world.true_reward(), {64, 1}, rng);
  for (const auto& a : shot.policy.actions) CHECK(box_world.actions().contains(a));
  CHECK(shot.policy.action_indices.empty());

  CHECK_THROWS_AS(plan_shooting(corridor, {corridor.s1()}, zero_reward, {0, 1}, rng), DomainError);
  CHECK_THROWS_AS(plan_exhaustive(corridor, {corridor.s1(), 6}, zero_reward, {}, rng), DomainError);
}

TEST_CASE("shooting with one candidate returns that candidate") {
  const auto w = make_integrator_world({.horizon = 4, .sigma = 0.0});
  RngStream a(3, "planner"), b(3, "planner");
  const auto r = plan_shooting(w, {w.s1()}, w.true_reward(), {1, 1}, a);
  std::vector<Vector> seq;
  for (int h = 0; h < 4; ++h) seq.push_back(w.actions()[b.index(w.actions().size())]);
  CHECK(r.policy.actions == seq);
  RngStream c(0, "eval");
  CHECK(r.value_estimate == evaluate_open_loop(w, {w.s1()}, seq, w.true_reward(), 1, c).mean);
}

TEST_CASE("shooting keeps the best of its own candidates") {
  const auto w = make_corridor_world({.sigma = 0.0});
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RngStream a(seed, "planner"), b(seed, "planner"), eval(0, "eval");
    const long N = 50;
    const auto r = plan_shooting(w, {w.s1()}, w.true_reward(), {N, 1}, a);
    double best = -1.0;
    for (long c = 0; c < N; ++c) {
      std::vector<Vector> seq;
      for (int h = 0; h < w.horizon(); ++h) seq.push_back(w.actions()[b.index(w.actions().size())]);
      best = std::max(best, evaluate_open_loop(w, {w.s1()}, seq, w.true_reward(), 1, eval).mean);
    }
    CHECK(r.value_estimate == best);
  }
}

TEST_CASE("shooting agrees with exhaustive on a tiny problem") {
  const auto w = make_integrator_world({.horizon = 2, .sigma = 0.0});
  RngStream e(0, "planner");
  const double opt = plan_exhaustive(w, {w.s1()}, w.true_reward(), {}, e).value_estimate;
  int agree = 0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    RngStream rng(static_cast<std::uint64_t>(s), "planner");
    agree += plan_shooting(w, {w.s1()}, w.true_reward(), {64, 1}, rng).value_estimate == opt;
  }
  CHECK(agree >= 95);
}

TEST_CASE("shooting gets close to the optimum on the integrator benchmark") {
  const auto w = make_integrator_world({.sigma = 0.0});
  RngStream e(0, "planner");
  const double opt = plan_exhaustive(w, {w.s1()}, w.true_reward(), {59049, 1}, e).value_estimate;
  std::vector<double> vals;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    RngStream rng(s, "planner");
    vals.push_back(plan_shooting(w, {w.s1()}, w.true_reward(), {1024, 1}, rng).value_estimate);
  }
  std::sort(vals.begin(), vals.end());
  CHECK(vals[5] >= 0.95 * opt);
  for (double v : vals) CHECK(v <= opt + 1e-12);
}

TEST_CASE("more candidates never hurt under a shared seed") {
  const auto w = make_corridor_world({.sigma = 0.0});
  double prev = -1.0;
  for (long N : {1, 4, 16, 64, 256}) {
    RngStream rng(21, "planner");
    const double v = plan_shooting(w, {w.s1()}, w.true_reward(), {N, 1}, rng).value_estimate;
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("larger rewards give larger planned values") {
  const auto w = make_integrator_world({.horizon = 4, .sigma = 0.0});
  const StepReward base = w.true_reward();
  const StepReward higher = [base](int h, const Vector& s, const Vector& a, const Vector& phi) {
    return base(h, s, a, phi) + 0.1 * (1.0 + s[0] * s[0]);
  };
  RngStream rng(1, "planner");
  const double v0 = plan_exhaustive(w, {w.s1()}, base, {}, rng).value_estimate;
  const double v1 = plan_exhaustive(w, {w.s1()}, higher, {}, rng).value_estimate;
  CHECK(v1 >= v0 + 0.4 - 1e-12);
}

TEST_CASE("policy evaluation on the model") {
  const auto w = make_integrator_world({.horizon = 5, .sigma = 0.0});
  RngStream rng(2, "planner");
  const auto r = plan_exhaustive(w, {w.s1()}, w.true_reward(), {}, rng);
  CHECK(evaluate_policy_on_model(r.policy, w.true_reward(), w, w.s1(), 1, rng) == r.value_estimate);
  CHECK(evaluate_policy_on_model(r.policy, zero_reward, w, w.s1(), 1, rng) == 0.0);

  // Noisy model: the average tracks a direct Monte Carlo estimate on the world.
  const auto noisy = make_integrator_world({.horizon = 5, .sigma = 0.1});
  RngStream a(4, "eval"), b(5, "eval");
  const double on_model = evaluate_policy_on_model(r.policy, noisy.true_reward(), noisy, noisy.s1(), 4000, a);
  const auto mc = monte_carlo_value(noisy, r.policy.as_step_policy(), std::nullopt, 4000, b);
  CHECK(std::abs(on_model - mc.mean) <= 5.0 * std::sqrt(2.0) * std::max(mc.std_error, 1e-6));

  const auto ev = evaluate_open_loop(noisy, {noisy.s1()}, r.policy.actions, noisy.true_reward(), 50, a);
  CHECK(ev.std_error > 0.0);
  CHECK_THROWS_AS(evaluate_open_loop(noisy, {noisy.s1(), 2}, r.policy.actions, zero_reward, 1, a),
                  DomainError);
}

TEST_CASE("partial depth and later start") {
  const auto w = make_integrator_world({.horizon = 6, .sigma = 0.0});
  RngStream rng(1, "planner");
  const auto r = plan_exhaustive(w, {vec({0.3, 0.1}), 2, 3}, w.true_reward(), {}, rng);
  CHECK(r.policy.first_step == 2);
  CHECK(r.policy.actions.size() == 3);
  const auto tail = plan_exhaustive(w, {vec({0.3, 0.1}), 4, 0}, w.true_reward(), {}, rng);
  CHECK(tail.policy.actions.size() == 2);
  const auto sp = tail.policy.as_step_policy();
  CHECK(sp(4, w.s1()) == tail.policy.actions[0]);
  CHECK_THROWS_AS(sp(3, w.s1()), PolicyError);
}

TEST_CASE("planner config") {
  PlannerConfig c;
  c.kind = PlannerKind::Shooting;
  c.n_candidates = 77;
  c.plan_noise = PlanNoise::Stochastic;
  c.mode = Policy::Kind::Mpc;
  c.inner_horizon = 3;
  const auto back = PlannerConfig::from_json(c.to_json());
  CHECK(back.kind == PlannerKind::Shooting);
  CHECK(back.n_candidates == 77);
  CHECK(back.plan_noise == PlanNoise::Stochastic);
  CHECK(back.mode == Policy::Kind::Mpc);
  CHECK(back.inner_horizon == 3);
  CHECK_THROWS_AS(PlannerConfig::from_json({{"planner", "cem"}}), ConfigError);
  CHECK_THROWS_AS(PlannerConfig::from_json({{"budget", 0}}), ConfigError);
  CHECK_THROWS_AS(PlannerConfig::from_json({{"mode", "closed"}}), ConfigError);
}

TEST_CASE("certainty-equivalent planning ignores model noise") {
  const auto noisy = make_integrator_world({.horizon = 4, .sigma = 0.2});
  const auto clean = noisy.with_dynamics(noisy.w_star(), 0.0);
  PlannerConfig c;
  c.mode = Policy::Kind::Mpc;
  c.inner_horizon = 2;
  RngStream a(1, "planner"), b(1, "planner");
  const auto r1 = plan(c, noisy, {noisy.s1()}, noisy.true_reward(), a);
  const auto r2 = plan_exhaustive(clean, {clean.s1()}, clean.true_reward(), {}, b);
  CHECK(r1.value_estimate == r2.value_estimate);
  CHECK(r1.policy.actions == r2.policy.actions);
  CHECK(r1.policy.kind == Policy::Kind::Mpc);
  CHECK(r1.policy.inner_horizon == 2);
}
