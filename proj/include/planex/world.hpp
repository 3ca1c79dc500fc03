#pragma once

#include "planex/common.hpp"
#include "planex/features.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace planex {

/// One additive reward term. `steps` lists the 1-based steps where the term is
/// active; empty means every step.
struct RewardTerm {
  enum class Kind {
    Quadratic,  // value * max(0, 1 - ||s - goal||^2 / width^2)
    Distance,   // value * max(0, 1 - ||s - goal|| / width)
    Region,     // value if |s - goal|_inf <= half_width componentwise
    Linear,     // offset + state_coef . s + action_coef . a
  };
  Kind kind = Kind::Quadratic;
  Vector goal;
  double width = 1.0;
  Vector half_width;
  double value = 1.0;
  double offset = 0.0;
  Vector state_coef, action_coef;
  std::vector<int> steps;

  bool active_at(int h) const;
  double evaluate(const Vector& s, const Vector& a) const;
  /// Upper bound of the raw term, or +inf when unbounded.
  double upper_bound() const;
  bool can_be_negative() const;
};

/// r_h(s, a) for h = 0..H-1: the sum of active terms, clamped to [0, 1].
class RewardSpec {
 public:
  RewardSpec() = default;
  explicit RewardSpec(std::vector<RewardTerm> terms);

  double operator()(int h, const Vector& s, const Vector& a) const;
  const std::vector<RewardTerm>& terms() const { return terms_; }
  bool clamped() const { return clamped_; }

  nlohmann::json to_json() const;
  static RewardSpec from_json(const nlohmann::json& j);

 private:
  std::vector<RewardTerm> terms_;
  bool clamped_ = false;
};

/// Reward as seen by rollouts and planners. `phi` is the feature vector at
/// (s, a), passed so perturbed rewards need not recompute it. h is 0-based.
using StepReward =
    std::function<double(int h, const Vector& s, const Vector& a, const Vector& phi)>;

using StepPolicy = std::function<Vector(int h, const Vector& s)>;

/// Ground-truth KNR dynamics s' = W* phi(s, a) + N(0, sigma^2 I) with known
/// rewards and a fixed initial state. Immutable after construction.
class KnrWorld {
 public:
  KnrWorld(Matrix w_star, double sigma, FeatureMap features, RewardSpec rewards,
           ActionSpace actions, Vector s1, std::string name = {});

  const Matrix& w_star() const { return *w_star_; }
  double sigma() const { return sigma_; }
  const FeatureMap& features() const { return *features_; }
  const RewardSpec& rewards() const { return *rewards_; }
  const ActionSpace& actions() const { return *actions_; }
  const Vector& s1() const { return s1_; }
  const std::string& name() const { return name_; }
  int horizon() const { return features_->horizon(); }
  Index state_dim() const { return s1_.size(); }
  Index feature_dim() const { return features_->dim(); }
  /// ||W*||_2, computed once by power iteration.
  double w_star_norm() const { return w_star_norm_; }

  double reward(int h, const Vector& s, const Vector& a) const { return (*rewards_)(h, s, a); }
  StepReward true_reward() const;

  /// Same features, rewards and actions with different dynamics (a fitted model).
  KnrWorld with_dynamics(Matrix w, double sigma) const;

  nlohmann::json to_json() const;
  static KnrWorld from_json(const nlohmann::json& j);

 private:
  std::shared_ptr<const Matrix> w_star_;
  double sigma_;
  std::shared_ptr<const FeatureMap> features_;
  std::shared_ptr<const RewardSpec> rewards_;
  std::shared_ptr<const ActionSpace> actions_;
  Vector s1_;
  std::string name_;
  double w_star_norm_ = 0.0;
};

struct TrajectoryStep {
  int h = 0;  // 0-based
  Vector state;
  Vector action;
  double reward_true = 0.0;
  double reward_used = 0.0;
  Vector next_state;
  Vector phi;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;

  double true_return() const;
  double used_return() const;
  /// Hash over the executed (s, a, s') triples, chained from `seed`.
  std::uint64_t replay_hash(std::uint64_t seed = 0xcbf29ce484222325ULL) const;
};

Vector step(const KnrWorld& world, const Vector& state, const Vector& action, RngStream& rng);

Trajectory rollout(const KnrWorld& world, const StepPolicy& policy,
                   const std::optional<StepReward>& reward_override, RngStream& rng);

struct ValueEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Mean return of n independent rollouts (under `rewards`, or the world's own
/// rewards when empty) with its standard error.
ValueEstimate monte_carlo_value(const KnrWorld& world, const StepPolicy& policy,
                                const std::optional<StepReward>& rewards, int n_rollouts,
                                RngStream& rng);

// ---------------------------------------------------------------------------
// Built-in worlds

/// Double integrator (position, velocity) with a scalar acceleration from a
/// finite list, polynomial degree-1 features and a dense quadratic-distance
/// reward on position.
struct IntegratorOptions {
  int horizon = 10;
  double sigma = 0.05;
  double dt = 0.5;
  double goal = 1.0;
  double reward_width = 1.5;
  double position_bound = 2.0;
  double velocity_bound = 1.0;
  std::vector<double> accelerations{-1.0, 0.0, 1.0};
};
KnrWorld make_integrator_world(const IntegratorOptions& opts = {});

/// One-dimensional corridor with a sparse reward that pays only at the last
/// step and only near the far end. Starting at 0 with an uninformed model,
/// every plan looks worthless, so greedy planning never leaves the start.
struct CorridorOptions {
  int horizon = 6;
  double sigma = 0.01;
  double length = 5.0;
  double step_size = 1.0;
  double reward_width = 2.0;
  std::vector<double> moves{-1.0, -0.5, 0.0, 0.5, 1.0};
};
KnrWorld make_corridor_world(const CorridorOptions& opts = {});

/// Random W* over random Fourier features of (s, a), 2-D state and a small
/// finite set of planar actions, dense quadratic reward.
struct RandomFourierOptions {
  int horizon = 5;
  double sigma = 0.05;
  Index num_features = 8;
  double bandwidth = 1.0;
  double w_scale = 1.0;
  std::uint64_t seed = 7;
};
KnrWorld make_random_fourier_world(const RandomFourierOptions& opts = {});

/// Builds a world from either a full environment document or a
/// {"zoo": name, ...options} reference to a built-in world.
KnrWorld world_from_config(const nlohmann::json& j);

}  // namespace planex
