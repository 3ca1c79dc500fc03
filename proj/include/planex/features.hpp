#pragma once

#include "planex/common.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <vector>

namespace planex {

/// Either a finite list of action vectors or an axis-aligned box.
class ActionSpace {
 public:
  static ActionSpace finite(std::vector<Vector> actions);
  static ActionSpace box(Vector low, Vector high);

  bool is_finite() const { return !actions_.empty(); }
  Index dim() const;
  std::size_t size() const { return actions_.size(); }
  const Vector& operator[](std::size_t i) const { return actions_[i]; }
  const std::vector<Vector>& actions() const { return actions_; }
  const Vector& low() const { return low_; }
  const Vector& high() const { return high_; }

  bool contains(const Vector& a) const;
  /// Index of `a` in the finite list (exact match up to 1e-12), if present.
  std::optional<std::size_t> find(const Vector& a) const;

  /// Bounding box of the action set (the box itself when not finite).
  Vector bound_low() const;
  Vector bound_high() const;

  nlohmann::json to_json() const;
  static ActionSpace from_json(const nlohmann::json& j);

 private:
  std::vector<Vector> actions_;
  Vector low_, high_;
};

enum class FeatureKind { Polynomial, RandomFourier, TabularOneHot };

const char* to_string(FeatureKind kind);

/// The known embedding phi(s, a). Every kind is normalized at construction so
/// that ||phi(s, a)||_2 <= 1/sqrt(H) over its declared domain.
class FeatureMap {
 public:
  /// All monomials of total degree <= `degree` in z = (s, a). The declared
  /// domain is the state box times the action bounding box; with `clamp`
  /// inputs are projected onto that box before evaluation.
  static FeatureMap polynomial(int degree, Vector state_low, Vector state_high,
                               const ActionSpace& actions, int horizon, bool clamp = true);

  /// phi_i = cos(omega_i . z + b_i) / sqrt(D H), z = (s, a).
  static FeatureMap random_fourier(Matrix frequencies, Vector offsets, int horizon);
  static FeatureMap random_fourier(Index num_features, Index state_dim, Index action_dim,
                                   double bandwidth, std::uint64_t seed, int horizon);

  /// One-hot over (grid cell of s, index of a) scaled to 1/sqrt(H).
  static FeatureMap tabular(std::vector<int> cells, Vector origin, Vector spacing,
                            const ActionSpace& actions, int horizon);

  FeatureKind kind() const { return kind_; }
  Index dim() const { return dim_; }
  Index state_dim() const { return state_dim_; }
  Index action_dim() const { return action_dim_; }
  int horizon() const { return horizon_; }
  double norm_bound() const;

  Vector evaluate(const Vector& s, const Vector& a) const;
  void evaluate_into(const Vector& s, const Vector& a, Eigen::Ref<Vector> out) const;

  /// Grid cell of a state (tabular maps only).
  Index cell_of(const Vector& s) const;

  nlohmann::json to_json() const;
  static FeatureMap from_json(const nlohmann::json& j, const ActionSpace& actions, int horizon,
                              Index state_dim);

 private:
  FeatureMap() = default;
  void check_inputs(const Vector& s, const Vector& a) const;
  void raw_polynomial(const Vector& z, Eigen::Ref<Vector> out) const;

  FeatureKind kind_ = FeatureKind::Polynomial;
  Index dim_ = 0;
  Index state_dim_ = 0;
  Index action_dim_ = 0;
  int horizon_ = 1;
  double scale_ = 1.0;

  // polynomial
  int degree_ = 1;
  std::vector<std::vector<int>> exponents_;
  Vector z_low_, z_high_;
  bool clamp_ = true;

  // random fourier
  Matrix frequencies_;
  Vector offsets_;

  // tabular
  std::vector<int> cells_;
  Vector origin_, spacing_;
  std::vector<Vector> actions_;
};

}  // namespace planex
