#include "planex/world.hpp"

#include "planex/json_io.hpp"
#include "planex/linalg.hpp"

#include <cmath>
#include <limits>

namespace planex {

using json_io::json;

// ---------------------------------------------------------------------------
// Rewards

bool RewardTerm::active_at(int h) const {
  if (steps.empty()) return true;
  for (int s : steps)
    if (s == h + 1) return true;
  return false;
}

double RewardTerm::evaluate(const Vector& s, const Vector& a) const {
  switch (kind) {
    case Kind::Quadratic:
      return value * std::max(0.0, 1.0 - (s - goal).squaredNorm() / (width * width));
    case Kind::Distance:
      return value * std::max(0.0, 1.0 - (s - goal).norm() / width);
    case Kind::Region:
      return ((s - goal).cwiseAbs().array() <= half_width.array()).all() ? value : 0.0;
    case Kind::Linear: {
      double r = offset;
      if (state_coef.size() > 0) r += state_coef.dot(s);
      if (action_coef.size() > 0) r += action_coef.dot(a);
      return r;
    }
  }
  return 0.0;
}

double RewardTerm::upper_bound() const {
  if (kind == Kind::Linear) return std::numeric_limits<double>::infinity();
  return std::max(0.0, value);
}

bool RewardTerm::can_be_negative() const { return kind == Kind::Linear || value < 0.0; }

RewardSpec::RewardSpec(std::vector<RewardTerm> terms) : terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    if (t.kind == RewardTerm::Kind::Quadratic || t.kind == RewardTerm::Kind::Distance) {
      if (!(t.width > 0)) throw ConfigError("reward: width must be positive");
    }
    if (t.kind == RewardTerm::Kind::Region && t.half_width.size() != t.goal.size())
      throw ConfigError("reward: region half_width/goal dimension mismatch");
    for (int s : t.steps)
      if (s < 1) throw ConfigError("reward: steps are 1-based");
  }
  // Worst case over a single step: every term active at once.
  double upper = 0.0;
  bool negative = false;
  for (const auto& t : terms_) {
    upper += t.upper_bound();
    negative = negative || t.can_be_negative();
  }
  if (upper > 1.0 || negative) {
    clamped_ = true;
    warn("reward terms can leave [0, 1]; rewards are clamped to [0, 1]");
  }
}

double RewardSpec::operator()(int h, const Vector& s, const Vector& a) const {
  double r = 0.0;
  for (const auto& t : terms_)
    if (t.active_at(h)) r += t.evaluate(s, a);
  if (!std::isfinite(r)) throw ConfigError("reward: non-finite raw reward");
  return std::clamp(r, 0.0, 1.0);
}

namespace {

const char* kind_name(RewardTerm::Kind k) {
  switch (k) {
    case RewardTerm::Kind::Quadratic:
      return "quadratic";
    case RewardTerm::Kind::Distance:
      return "distance";
    case RewardTerm::Kind::Region:
      return "region";
    case RewardTerm::Kind::Linear:
      return "linear";
  }
  return "?";
}

}  // namespace

json RewardSpec::to_json() const {
  json arr = json::array();
  for (const auto& t : terms_) {
    json j{{"kind", kind_name(t.kind)}, {"value", t.value}};
    if (t.goal.size() > 0) j["goal"] = json_io::vector_to_json(t.goal);
    if (t.kind == RewardTerm::Kind::Quadratic || t.kind == RewardTerm::Kind::Distance)
      j["width"] = t.width;
    if (t.kind == RewardTerm::Kind::Region) j["half_width"] = json_io::vector_to_json(t.half_width);
    if (t.kind == RewardTerm::Kind::Linear) {
      j["offset"] = t.offset;
      if (t.state_coef.size() > 0) j["state_coef"] = json_io::vector_to_json(t.state_coef);
      if (t.action_coef.size() > 0) j["action_coef"] = json_io::vector_to_json(t.action_coef);
    }
    if (!t.steps.empty()) j["steps"] = t.steps;
    arr.push_back(j);
  }
  return arr;
}

RewardSpec RewardSpec::from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("rewards: expected an array of terms");
  std::vector<RewardTerm> terms;
  for (const auto& e : j) {
    RewardTerm t;
    const auto kind = json_io::require(e, "kind").get<std::string>();
    if (kind == "quadratic") {
      t.kind = RewardTerm::Kind::Quadratic;
    } else if (kind == "distance") {
      t.kind = RewardTerm::Kind::Distance;
    } else if (kind == "region") {
      t.kind = RewardTerm::Kind::Region;
    } else if (kind == "linear") {
      t.kind = RewardTerm::Kind::Linear;
    } else {
      throw ConfigError("unknown reward kind '" + kind + "'");
    }
    if (e.contains("goal")) t.goal = json_io::vector_from_json(e["goal"], "reward.goal");
    t.width = json_io::get_or<double>(e, "width", 1.0);
    t.value = json_io::get_or<double>(e, "value", 1.0);
    t.offset = json_io::get_or<double>(e, "offset", 0.0);
    if (e.contains("half_width"))
      t.half_width = json_io::vector_from_json(e["half_width"], "reward.half_width");
    if (e.contains("state_coef"))
      t.state_coef = json_io::vector_from_json(e["state_coef"], "reward.state_coef");
    if (e.contains("action_coef"))
      t.action_coef = json_io::vector_from_json(e["action_coef"], "reward.action_coef");
    if (e.contains("steps")) t.steps = e["steps"].get<std::vector<int>>();
    if (t.kind != RewardTerm::Kind::Linear && t.goal.size() == 0)
      throw ConfigError("reward: '" + kind + "' needs a goal");
    terms.push_back(std::move(t));
  }
  return RewardSpec(std::move(terms));
}

// ---------------------------------------------------------------------------
// World

KnrWorld::KnrWorld(Matrix w_star, double sigma, FeatureMap features, RewardSpec rewards,
                   ActionSpace actions, Vector s1, std::string name)
    : w_star_(std::make_shared<const Matrix>(std::move(w_star))),
      sigma_(sigma),
      features_(std::make_shared<const FeatureMap>(std::move(features))),
      rewards_(std::make_shared<const RewardSpec>(std::move(rewards))),
      actions_(std::make_shared<const ActionSpace>(std::move(actions))),
      s1_(std::move(s1)),
      name_(std::move(name)) {
  if (!(sigma_ >= 0.0) || !std::isfinite(sigma_)) throw ConfigError("world: sigma must be >= 0");
  if (w_star_->rows() != s1_.size())
    throw ConfigError("world: W* rows must equal the state dimension");
  if (w_star_->cols() != features_->dim())
    throw ConfigError("world: W* columns must equal the feature dimension");
  if (!w_star_->allFinite() || !s1_.allFinite()) throw ConfigError("world: non-finite W* or s1");
  if (features_->action_dim() != 0 && features_->action_dim() != actions_->dim())
    throw ConfigError("world: feature map and action space disagree on action dimension");
  for (const auto& t : rewards_->terms()) {
    if (t.goal.size() > 0 && t.goal.size() != s1_.size())
      throw ConfigError("world: reward goal dimension mismatch");
    for (int s : t.steps)
      if (s > features_->horizon()) throw ConfigError("world: reward step beyond horizon");
  }
  w_star_norm_ = spectral_norm(*w_star_);
}

StepReward KnrWorld::true_reward() const {
  auto rewards = rewards_;
  return [rewards](int h, const Vector& s, const Vector& a, const Vector&) {
    return (*rewards)(h, s, a);
  };
}

KnrWorld KnrWorld::with_dynamics(Matrix w, double sigma) const {
  if (w.rows() != w_star_->rows() || w.cols() != w_star_->cols())
    throw ConfigError("with_dynamics: shape mismatch");
  KnrWorld copy = *this;
  copy.w_star_ = std::make_shared<const Matrix>(std::move(w));
  if (!(sigma >= 0.0)) throw ConfigError("with_dynamics: sigma must be >= 0");
  copy.sigma_ = sigma;
  copy.w_star_norm_ = spectral_norm(*copy.w_star_);
  return copy;
}

json KnrWorld::to_json() const {
  json j{{"name", name_},
         {"horizon", horizon()},
         {"state_dim", state_dim()},
         {"feature", features_->to_json()},
         {"W_star", json_io::matrix_to_json(*w_star_)},
         {"sigma", sigma_},
         {"rewards", rewards_->to_json()},
         {"s1", json_io::vector_to_json(s1_)}};
  const json acts = actions_->to_json();
  for (const auto& [k, v] : acts.items()) j[k] = v;
  return j;
}

KnrWorld KnrWorld::from_json(const json& j) {
  const int horizon = json_io::require(j, "horizon").get<int>();
  const Vector s1 = json_io::vector_from_json(json_io::require(j, "s1"), "s1");
  if (j.contains("state_dim") && j["state_dim"].get<Index>() != s1.size())
    throw ConfigError("environment: state_dim does not match s1");
  ActionSpace actions = ActionSpace::from_json(j);
  FeatureMap fm = FeatureMap::from_json(json_io::require(j, "feature"), actions, horizon, s1.size());
  return KnrWorld(json_io::matrix_from_json(json_io::require(j, "W_star"), "W_star"),
                  json_io::require(j, "sigma").get<double>(), std::move(fm),
                  RewardSpec::from_json(json_io::require(j, "rewards")), std::move(actions), s1,
                  json_io::get_or<std::string>(j, "name", ""));
}

// ---------------------------------------------------------------------------
// Trajectories

double Trajectory::true_return() const {
  double r = 0.0;
  for (const auto& s : steps) r += s.reward_true;
  return r;
}

double Trajectory::used_return() const {
  double r = 0.0;
  for (const auto& s : steps) r += s.reward_used;
  return r;
}

std::uint64_t Trajectory::replay_hash(std::uint64_t seed) const {
  std::uint64_t h = seed;
  for (const auto& s : steps) {
    h = fnv1a_doubles(s.state.data(), static_cast<std::size_t>(s.state.size()), h);
    h = fnv1a_doubles(s.action.data(), static_cast<std::size_t>(s.action.size()), h);
    h = fnv1a_doubles(s.next_state.data(), static_cast<std::size_t>(s.next_state.size()), h);
  }
  return h;
}

Vector step(const KnrWorld& world, const Vector& state, const Vector& action, RngStream& rng) {
  if (state.size() != world.state_dim()) throw ConfigError("step: state dimension mismatch");
  Vector next = world.w_star() * world.features().evaluate(state, action);
  for (Index i = 0; i < next.size(); ++i) next[i] += world.sigma() * rng.normal();
  return next;
}

Trajectory rollout(const KnrWorld& world, const StepPolicy& policy,
                   const std::optional<StepReward>& reward_override, RngStream& rng) {
  const int H = world.horizon();
  Trajectory traj;
  traj.steps.reserve(static_cast<std::size_t>(H));
  Vector s = world.s1();
  for (int h = 0; h < H; ++h) {
    TrajectoryStep st;
    st.h = h;
    st.state = s;
    st.action = policy(h, s);
    if (!world.actions().contains(st.action))
      throw PolicyError("policy returned an action outside the action space");
    st.phi = world.features().evaluate(st.state, st.action);
    st.reward_true = world.reward(h, st.state, st.action);
    st.reward_used =
        reward_override ? (*reward_override)(h, st.state, st.action, st.phi) : st.reward_true;
    Vector next = world.w_star() * st.phi;
    for (Index i = 0; i < next.size(); ++i) next[i] += world.sigma() * rng.normal();
    st.next_state = next;
    s = std::move(next);
    traj.steps.push_back(std::move(st));
  }
  return traj;
}

ValueEstimate monte_carlo_value(const KnrWorld& world, const StepPolicy& policy,
                                const std::optional<StepReward>& rewards, int n_rollouts,
                                RngStream& rng) {
  if (n_rollouts < 1) throw DomainError("monte_carlo_value: n_rollouts must be >= 1");
  // Welford accumulation.
  double mean = 0.0, m2 = 0.0;
  for (int i = 0; i < n_rollouts; ++i) {
    const Trajectory t = rollout(world, policy, rewards, rng);
    const double g = t.used_return();
    const double delta = g - mean;
    mean += delta / (i + 1);
    m2 += delta * (g - mean);
  }
  ValueEstimate out;
  out.mean = mean;
  if (n_rollouts > 1) {
    const double var = m2 / (n_rollouts - 1);
    out.std_error = std::sqrt(std::max(0.0, var) / n_rollouts);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Built-in worlds

KnrWorld make_integrator_world(const IntegratorOptions& o) {
  std::vector<Vector> acts;
  for (double u : o.accelerations) acts.push_back(Vector::Constant(1, u));
  ActionSpace actions = ActionSpace::finite(std::move(acts));
  Vector lo(2), hi(2);
  lo << -o.position_bound, -o.velocity_bound;
  hi << o.position_bound, o.velocity_bound;
  FeatureMap fm = FeatureMap::polynomial(1, lo, hi, actions, o.horizon);
  // Raw features are (1, p, v, a); the constant slot exposes the scale.
  const double scale = fm.evaluate(Vector::Zero(2), Vector::Zero(1))[0];
  Matrix w(2, 4);
  w << 0, 1, o.dt, 0.5 * o.dt * o.dt,  //
      0, 0, 1, o.dt;
  w /= scale;
  RewardTerm t;
  t.kind = RewardTerm::Kind::Quadratic;
  t.goal = Vector::Zero(2);
  t.goal[0] = o.goal;
  t.width = o.reward_width;
  // Goal is (goal, 0): arrive and stop.
  RewardSpec rewards({t});
  return KnrWorld(w, o.sigma, std::move(fm), std::move(rewards), std::move(actions),
                  Vector::Zero(2), "integrator");
}

KnrWorld make_corridor_world(const CorridorOptions& o) {
  std::vector<Vector> acts;
  for (double m : o.moves) acts.push_back(Vector::Constant(1, m));
  ActionSpace actions = ActionSpace::finite(std::move(acts));
  FeatureMap fm = FeatureMap::polynomial(1, Vector::Constant(1, 0.0),
                                         Vector::Constant(1, o.length), actions, o.horizon);
  const double scale = fm.evaluate(Vector::Zero(1), Vector::Zero(1))[0];
  Matrix w(1, 3);
  w << 0, 1, o.step_size;  // x' = clamp(x) + step * a
  w /= scale;
  RewardTerm t;
  t.kind = RewardTerm::Kind::Distance;
  t.goal = Vector::Constant(1, o.length);
  t.width = o.reward_width;
  t.steps = {o.horizon};
  return KnrWorld(w, o.sigma, std::move(fm), RewardSpec({t}), std::move(actions),
                  Vector::Zero(1), "corridor");
}

KnrWorld make_random_fourier_world(const RandomFourierOptions& o) {
  std::vector<Vector> acts;
  for (auto [x, y] : {std::pair{0.0, 0.0}, {1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}}) {
    Vector a(2);
    a << x, y;
    acts.push_back(a);
  }
  ActionSpace actions = ActionSpace::finite(std::move(acts));
  FeatureMap fm = FeatureMap::random_fourier(o.num_features, 2, 2, o.bandwidth, o.seed, o.horizon);
  RngStream rng(o.seed, "random-fourier-weights");
  Matrix w(2, o.num_features);
  for (Index i = 0; i < w.rows(); ++i)
    for (Index j = 0; j < w.cols(); ++j) w(i, j) = o.w_scale * rng.normal();
  RewardTerm t;
  t.kind = RewardTerm::Kind::Quadratic;
  t.goal = Vector::Constant(2, 0.5);
  t.width = 2.0;
  return KnrWorld(w, o.sigma, std::move(fm), RewardSpec({t}), std::move(actions),
                  Vector::Zero(2), "random-fourier");
}

KnrWorld world_from_config(const json& j) {
  if (!j.contains("zoo")) return KnrWorld::from_json(j);
  const auto name = j["zoo"].get<std::string>();
  if (name == "integrator") {
    IntegratorOptions o;
    o.horizon = json_io::get_or(j, "horizon", o.horizon);
    o.sigma = json_io::get_or(j, "sigma", o.sigma);
    o.dt = json_io::get_or(j, "dt", o.dt);
    o.goal = json_io::get_or(j, "goal", o.goal);
    o.reward_width = json_io::get_or(j, "reward_width", o.reward_width);
    o.position_bound = json_io::get_or(j, "position_bound", o.position_bound);
    o.velocity_bound = json_io::get_or(j, "velocity_bound", o.velocity_bound);
    o.accelerations = json_io::get_or(j, "accelerations", o.accelerations);
    return make_integrator_world(o);
  }
  if (name == "corridor") {
    CorridorOptions o;
    o.horizon = json_io::get_or(j, "horizon", o.horizon);
    o.sigma = json_io::get_or(j, "sigma", o.sigma);
    o.length = json_io::get_or(j, "length", o.length);
    o.step_size = json_io::get_or(j, "step_size", o.step_size);
    o.reward_width = json_io::get_or(j, "reward_width", o.reward_width);
    o.moves = json_io::get_or(j, "moves", o.moves);
    return make_corridor_world(o);
  }
  if (name == "random-fourier") {
    RandomFourierOptions o;
    o.horizon = json_io::get_or(j, "horizon", o.horizon);
    o.sigma = json_io::get_or(j, "sigma", o.sigma);
    o.num_features = json_io::get_or(j, "num_features", o.num_features);
    o.bandwidth = json_io::get_or(j, "bandwidth", o.bandwidth);
    o.w_scale = json_io::get_or(j, "w_scale", o.w_scale);
    o.seed = json_io::get_or(j, "seed", o.seed);
    return make_random_fourier_world(o);
  }
  throw ConfigError("unknown zoo world '" + name + "'");
}

}  // namespace planex
