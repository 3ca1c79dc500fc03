#include "planex/features.hpp"

#include "planex/json_io.hpp"

#include <cmath>
#include <numbers>

namespace planex {

using json_io::json;

namespace {

constexpr double kActionMatchTol = 1e-12;
constexpr double kNormSlack = 1e-12;

void enumerate_exponents(int dims, int degree, std::vector<std::vector<int>>& out) {
  // Graded order: total degree 0, 1, ..., degree; within a degree, lexicographic
  // with the first coordinate carrying the highest power first.
  std::vector<int> current(static_cast<std::size_t>(dims), 0);
  for (int total = 0; total <= degree; ++total) {
    auto rec = [&](auto&& self, int pos, int remaining) -> void {
      if (pos == dims - 1) {
        current[static_cast<std::size_t>(pos)] = remaining;
        out.push_back(current);
        return;
      }
      for (int e = remaining; e >= 0; --e) {
        current[static_cast<std::size_t>(pos)] = e;
        self(self, pos + 1, remaining - e);
      }
    };
    if (dims == 0) {
      if (total == 0) out.push_back({});
      continue;
    }
    rec(rec, 0, total);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ActionSpace

ActionSpace ActionSpace::finite(std::vector<Vector> actions) {
  if (actions.empty()) throw ConfigError("action space: empty action list");
  const Index d = actions.front().size();
  for (const auto& a : actions) {
    if (a.size() != d) throw ConfigError("action space: actions have inconsistent dimension");
    if (!a.allFinite()) throw ConfigError("action space: non-finite action");
  }
  ActionSpace space;
  space.actions_ = std::move(actions);
  return space;
}

ActionSpace ActionSpace::box(Vector low, Vector high) {
  if (low.size() != high.size() || low.size() == 0)
    throw ConfigError("action space: box bounds dimension mismatch");
  if ((high.array() < low.array()).any()) throw ConfigError("action space: box low > high");
  ActionSpace space;
  space.low_ = std::move(low);
  space.high_ = std::move(high);
  return space;
}

Index ActionSpace::dim() const { return is_finite() ? actions_.front().size() : low_.size(); }

std::optional<std::size_t> ActionSpace::find(const Vector& a) const {
  for (std::size_t i = 0; i < actions_.size(); ++i) {
    if (actions_[i].size() == a.size() &&
        (actions_[i] - a).cwiseAbs().maxCoeff() <= kActionMatchTol)
      return i;
  }
  return std::nullopt;
}

bool ActionSpace::contains(const Vector& a) const {
  if (a.size() != dim() || !a.allFinite()) return false;
  if (is_finite()) return find(a).has_value();
  return (a.array() >= low_.array()).all() && (a.array() <= high_.array()).all();
}

Vector ActionSpace::bound_low() const {
  if (!is_finite()) return low_;
  Vector lo = actions_.front();
  for (const auto& a : actions_) lo = lo.cwiseMin(a);
  return lo;
}

Vector ActionSpace::bound_high() const {
  if (!is_finite()) return high_;
  Vector hi = actions_.front();
  for (const auto& a : actions_) hi = hi.cwiseMax(a);
  return hi;
}

json ActionSpace::to_json() const {
  if (is_finite()) {
    json list = json::array();
    for (const auto& a : actions_) list.push_back(json_io::vector_to_json(a));
    return json{{"actions", list}};
  }
  return json{{"action_box",
               {{"low", json_io::vector_to_json(low_)}, {"high", json_io::vector_to_json(high_)}}}};
}

ActionSpace ActionSpace::from_json(const json& j) {
  if (j.contains("actions")) {
    std::vector<Vector> list;
    for (const auto& a : j["actions"]) list.push_back(json_io::vector_from_json(a, "actions"));
    return finite(std::move(list));
  }
  if (j.contains("action_box")) {
    const auto& b = j["action_box"];
    return box(json_io::vector_from_json(json_io::require(b, "low"), "action_box.low"),
               json_io::vector_from_json(json_io::require(b, "high"), "action_box.high"));
  }
  throw ConfigError("environment: needs 'actions' or 'action_box'");
}

// ---------------------------------------------------------------------------
// FeatureMap

const char* to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Polynomial:
      return "polynomial";
    case FeatureKind::RandomFourier:
      return "random-fourier";
    case FeatureKind::TabularOneHot:
      return "tabular-one-hot";
  }
  return "?";
}

double FeatureMap::norm_bound() const { return 1.0 / std::sqrt(static_cast<double>(horizon_)); }

FeatureMap FeatureMap::polynomial(int degree, Vector state_low, Vector state_high,
                                  const ActionSpace& actions, int horizon, bool clamp) {
  if (degree < 0) throw ConfigError("polynomial features: negative degree");
  if (horizon < 1) throw ConfigError("feature map: horizon must be >= 1");
  if (state_low.size() != state_high.size() || state_low.size() == 0)
    throw ConfigError("polynomial features: state bounds dimension mismatch");
  if ((state_high.array() < state_low.array()).any())
    throw ConfigError("polynomial features: state low > high");

  FeatureMap fm;
  fm.kind_ = FeatureKind::Polynomial;
  fm.degree_ = degree;
  fm.horizon_ = horizon;
  fm.clamp_ = clamp;
  fm.state_dim_ = state_low.size();
  fm.action_dim_ = actions.dim();
  const Index dz = fm.state_dim_ + fm.action_dim_;
  fm.z_low_.resize(dz);
  fm.z_high_.resize(dz);
  fm.z_low_ << state_low, actions.bound_low();
  fm.z_high_ << state_high, actions.bound_high();
  enumerate_exponents(static_cast<int>(dz), degree, fm.exponents_);
  fm.dim_ = static_cast<Index>(fm.exponents_.size());

  // Every squared monomial peaks at the vertex of largest |z_i|, so that
  // vertex attains the maximum norm over the box.
  const Vector vertex = fm.z_low_.cwiseAbs().cwiseMax(fm.z_high_.cwiseAbs());
  Vector raw(fm.dim_);
  fm.raw_polynomial(vertex, raw);
  fm.scale_ = 1.0 / (std::sqrt(static_cast<double>(horizon)) * raw.norm());
  return fm;
}

FeatureMap FeatureMap::random_fourier(Matrix frequencies, Vector offsets, int horizon) {
  if (horizon < 1) throw ConfigError("feature map: horizon must be >= 1");
  if (frequencies.rows() != offsets.size() || frequencies.rows() == 0)
    throw ConfigError("random-fourier features: frequencies/offsets mismatch");
  FeatureMap fm;
  fm.kind_ = FeatureKind::RandomFourier;
  fm.horizon_ = horizon;
  fm.dim_ = frequencies.rows();
  fm.frequencies_ = std::move(frequencies);
  fm.offsets_ = std::move(offsets);
  fm.scale_ = 1.0 / std::sqrt(static_cast<double>(fm.dim_) * horizon);
  return fm;
}

FeatureMap FeatureMap::random_fourier(Index num_features, Index state_dim, Index action_dim,
                                      double bandwidth, std::uint64_t seed, int horizon) {
  if (bandwidth <= 0) throw ConfigError("random-fourier features: bandwidth must be positive");
  RngStream rng(seed, "random-fourier");
  Matrix freq(num_features, state_dim + action_dim);
  for (Index i = 0; i < freq.rows(); ++i)
    for (Index j = 0; j < freq.cols(); ++j) freq(i, j) = rng.normal() / bandwidth;
  Vector off(num_features);
  for (Index i = 0; i < num_features; ++i) off[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  FeatureMap fm = random_fourier(std::move(freq), std::move(off), horizon);
  fm.state_dim_ = state_dim;
  fm.action_dim_ = action_dim;
  return fm;
}

FeatureMap FeatureMap::tabular(std::vector<int> cells, Vector origin, Vector spacing,
                               const ActionSpace& actions, int horizon) {
  if (horizon < 1) throw ConfigError("feature map: horizon must be >= 1");
  if (!actions.is_finite()) throw ConfigError("tabular features need a finite action list");
  if (cells.empty() || static_cast<Index>(cells.size()) != origin.size() ||
      origin.size() != spacing.size())
    throw ConfigError("tabular features: grid dimension mismatch");
  Index n_cells = 1;
  for (int c : cells) {
    if (c < 1) throw ConfigError("tabular features: cell counts must be positive");
    n_cells *= c;
  }
  if ((spacing.array() <= 0).any()) throw ConfigError("tabular features: spacing must be positive");
  FeatureMap fm;
  fm.kind_ = FeatureKind::TabularOneHot;
  fm.horizon_ = horizon;
  fm.state_dim_ = origin.size();
  fm.action_dim_ = actions.dim();
  fm.cells_ = std::move(cells);
  fm.origin_ = std::move(origin);
  fm.spacing_ = std::move(spacing);
  fm.actions_ = actions.actions();
  fm.dim_ = n_cells * static_cast<Index>(fm.actions_.size());
  fm.scale_ = 1.0 / std::sqrt(static_cast<double>(horizon));
  return fm;
}

void FeatureMap::raw_polynomial(const Vector& z, Eigen::Ref<Vector> out) const {
  for (std::size_t i = 0; i < exponents_.size(); ++i) {
    double v = 1.0;
    const auto& e = exponents_[i];
    for (std::size_t j = 0; j < e.size(); ++j) {
      for (int p = 0; p < e[j]; ++p) v *= z[static_cast<Index>(j)];
    }
    out[static_cast<Index>(i)] = v;
  }
}

void FeatureMap::check_inputs(const Vector& s, const Vector& a) const {
  if ((state_dim_ != 0 && s.size() != state_dim_) || (action_dim_ != 0 && a.size() != action_dim_))
    throw ConfigError("feature map: state/action dimension mismatch");
  if (kind_ == FeatureKind::RandomFourier && s.size() + a.size() != frequencies_.cols())
    throw ConfigError("feature map: state/action dimension mismatch");
  if (!s.allFinite() || !a.allFinite()) throw NumericError("feature map: non-finite input");
}

Index FeatureMap::cell_of(const Vector& s) const {
  if (kind_ != FeatureKind::TabularOneHot) throw ConfigError("cell_of: not a tabular map");
  Index flat = 0;
  for (std::size_t j = 0; j < cells_.size(); ++j) {
    const auto jj = static_cast<Index>(j);
    long idx = std::lround((s[jj] - origin_[jj]) / spacing_[jj]);
    idx = std::clamp<long>(idx, 0, cells_[j] - 1);
    flat = flat * cells_[j] + idx;
  }
  return flat;
}

void FeatureMap::evaluate_into(const Vector& s, const Vector& a, Eigen::Ref<Vector> out) const {
  check_inputs(s, a);
  switch (kind_) {
    case FeatureKind::Polynomial: {
      Vector z(s.size() + a.size());
      z << s, a;
      if (clamp_) z = z.cwiseMax(z_low_).cwiseMin(z_high_);
      raw_polynomial(z, out);
      out *= scale_;
      break;
    }
    case FeatureKind::RandomFourier: {
      Vector z(s.size() + a.size());
      z << s, a;
      out = ((frequencies_ * z + offsets_).array().cos() * scale_).matrix();
      break;
    }
    case FeatureKind::TabularOneHot: {
      std::size_t ai = actions_.size();
      for (std::size_t i = 0; i < actions_.size(); ++i) {
        if ((actions_[i] - a).cwiseAbs().maxCoeff() <= kActionMatchTol) {
          ai = i;
          break;
        }
      }
      if (ai == actions_.size()) throw DomainError("tabular features: action not in action list");
      out.setZero();
      out[cell_of(s) * static_cast<Index>(actions_.size()) + static_cast<Index>(ai)] = scale_;
      break;
    }
  }
  if (out.norm() > norm_bound() + kNormSlack)
    throw DomainError("feature norm exceeds 1/sqrt(H); input outside the declared domain");
}

Vector FeatureMap::evaluate(const Vector& s, const Vector& a) const {
  Vector out(dim_);
  evaluate_into(s, a, out);
  return out;
}

json FeatureMap::to_json() const {
  switch (kind_) {
    case FeatureKind::Polynomial: {
      const Vector slo = z_low_.head(state_dim_), shi = z_high_.head(state_dim_);
      return json{{"kind", "polynomial"},
                  {"degree", degree_},
                  {"state_low", json_io::vector_to_json(slo)},
                  {"state_high", json_io::vector_to_json(shi)},
                  {"clamp", clamp_}};
    }
    case FeatureKind::RandomFourier:
      return json{{"kind", "random-fourier"},
                  {"frequencies", json_io::matrix_to_json(frequencies_)},
                  {"offsets", json_io::vector_to_json(offsets_)}};
    case FeatureKind::TabularOneHot:
      return json{{"kind", "tabular-one-hot"},
                  {"cells", cells_},
                  {"origin", json_io::vector_to_json(origin_)},
                  {"spacing", json_io::vector_to_json(spacing_)}};
  }
  return {};
}

FeatureMap FeatureMap::from_json(const json& j, const ActionSpace& actions, int horizon,
                                 Index state_dim) {
  const auto kind = json_io::require(j, "kind").get<std::string>();
  FeatureMap fm;
  if (kind == "polynomial") {
    fm = polynomial(json_io::get_or<int>(j, "degree", 1),
                    json_io::vector_from_json(json_io::require(j, "state_low"), "state_low"),
                    json_io::vector_from_json(json_io::require(j, "state_high"), "state_high"),
                    actions, horizon, json_io::get_or<bool>(j, "clamp", true));
  } else if (kind == "random-fourier") {
    if (j.contains("frequencies")) {
      fm = random_fourier(json_io::matrix_from_json(j["frequencies"], "frequencies"),
                          json_io::vector_from_json(json_io::require(j, "offsets"), "offsets"),
                          horizon);
      fm.state_dim_ = state_dim;
      fm.action_dim_ = actions.dim();
    } else {
      fm = random_fourier(json_io::require(j, "num_features").get<Index>(), state_dim,
                          actions.dim(), json_io::get_or<double>(j, "bandwidth", 1.0),
                          json_io::get_or<std::uint64_t>(j, "seed", 0), horizon);
    }
  } else if (kind == "tabular-one-hot") {
    fm = tabular(json_io::require(j, "cells").get<std::vector<int>>(),
                 json_io::vector_from_json(json_io::require(j, "origin"), "origin"),
                 json_io::vector_from_json(json_io::require(j, "spacing"), "spacing"), actions,
                 horizon);
  } else {
    throw ConfigError("unknown feature kind '" + kind + "'");
  }
  if (fm.state_dim_ != state_dim) throw ConfigError("feature map: state_dim mismatch");
  return fm;
}

}  // namespace planex
