#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "planex/features.hpp"

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

ActionSpace three_actions() { return ActionSpace::finite({vec({-1}), vec({0}), vec({1})}); }

double max_norm_over_domain(const FeatureMap& fm, const Vector& lo, const Vector& hi,
                            const ActionSpace& acts, RngStream& rng) {
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Vector s(lo.size());
    for (Index j = 0; j < s.size(); ++j) s[j] = rng.uniform(lo[j], hi[j]);
    const Vector& a = acts[rng.index(acts.size())];
    worst = std::max(worst, fm.evaluate(s, a).norm());
  }
  return worst;
}

}  // namespace

TEST_CASE("action space basics") {
  const auto a = three_actions();
  CHECK(a.is_finite());
  CHECK(a.size() == 3);
  CHECK(a.dim() == 1);
  CHECK(a.contains(vec({0})));
  CHECK_FALSE(a.contains(vec({0.5})));
  CHECK(a.find(vec({1})) == std::optional<std::size_t>(2));
  CHECK(a.bound_low()[0] == -1);
  CHECK(a.bound_high()[0] == 1);

  const auto box = ActionSpace::box(vec({-1, 0}), vec({1, 2}));
  CHECK_FALSE(box.is_finite());
  CHECK(box.contains(vec({0.3, 1.9})));
  CHECK_FALSE(box.contains(vec({0.3, 2.1})));
  CHECK_THROWS_AS(ActionSpace::box(vec({1}), vec({0})), ConfigError);
  CHECK_THROWS_AS(ActionSpace::finite({}), ConfigError);

  CHECK(ActionSpace::from_json(a.to_json()).actions().size() == 3);
  CHECK(ActionSpace::from_json(box.to_json()).high() == box.high());
}

TEST_CASE("feature norms respect 1/sqrt(H) on the declared domain") {
  RngStream rng(3, "features");
  const auto acts = three_actions();
  const Vector lo = vec({-2, -1}), hi = vec({2, 1});
  for (int H : {1, 4, 10}) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(H)) + 1e-12;
    for (int degree : {1, 2, 3}) {
      const auto fm = FeatureMap::polynomial(degree, lo, hi, acts, H);
      CHECK(max_norm_over_domain(fm, lo, hi, acts, rng) <= bound);
      CHECK(fm.norm_bound() == doctest::Approx(1.0 / std::sqrt(H)));
    }
    const auto rff = FeatureMap::random_fourier(16, 2, 1, 1.0, 5, H);
    CHECK(max_norm_over_domain(rff, lo, hi, acts, rng) <= bound);
    const auto tab = FeatureMap::tabular({5, 3}, lo, vec({1.0, 1.0}), acts, H);
    CHECK(max_norm_over_domain(tab, lo, hi, acts, rng) <= bound);
  }
}

TEST_CASE("polynomial features enumerate graded monomials") {
  const auto acts = three_actions();
  // Monomials of degree <= 2 in 3 variables: C(5, 2) = 10.
  const auto fm = FeatureMap::polynomial(2, vec({-1, -1}), vec({1, 1}), acts, 4);
  CHECK(fm.dim() == 10);
  CHECK(fm.kind() == FeatureKind::Polynomial);
  // Degree 1: (1, s1, s2, a); the norm bound is attained at a corner.
  const auto lin = FeatureMap::polynomial(1, vec({-1, -1}), vec({1, 1}), acts, 4);
  CHECK(lin.dim() == 4);
  const Vector corner = lin.evaluate(vec({1, 1}), vec({1}));
  CHECK(corner.norm() == doctest::Approx(0.5));
  // The constant slot equals the scale, and ratios are preserved.
  const Vector phi = lin.evaluate(vec({0.5, -0.25}), vec({-1}));
  CHECK(phi[1] / phi[0] == doctest::Approx(0.5));
  CHECK(phi[2] / phi[0] == doctest::Approx(-0.25));
  CHECK(phi[3] / phi[0] == doctest::Approx(-1.0));
}

TEST_CASE("polynomial inputs outside the box are clamped") {
  const auto acts = three_actions();
  const auto fm = FeatureMap::polynomial(1, vec({0}), vec({1}), acts, 2);
  CHECK(fm.evaluate(vec({5}), vec({1})) == fm.evaluate(vec({1}), vec({1})));
  const auto strict = FeatureMap::polynomial(1, vec({0}), vec({1}), acts, 2, false);
  CHECK_THROWS_AS(strict.evaluate(vec({5}), vec({1})), DomainError);
}

TEST_CASE("tabular features are scaled one-hot vectors") {
  const auto acts = three_actions();
  const auto fm = FeatureMap::tabular({4}, vec({0}), vec({1}), acts, 9);
  CHECK(fm.dim() == 12);
  const Vector phi = fm.evaluate(vec({2.0}), vec({1}));
  CHECK(phi.sum() == doctest::Approx(1.0 / 3.0));
  CHECK(phi[2 * 3 + 2] == doctest::Approx(1.0 / 3.0));
  CHECK(fm.cell_of(vec({2.2})) == 2);
  CHECK(fm.cell_of(vec({-7})) == 0);
  CHECK_THROWS_AS(fm.evaluate(vec({0}), vec({0.5})), DomainError);
}

TEST_CASE("random fourier features") {
  Matrix w(2, 2);
  w << 1, 0, 0, 2;
  const Vector b = vec({0.0, 0.5});
  const auto fm = FeatureMap::random_fourier(w, b, 4);
  const Vector phi = fm.evaluate(vec({0.3}), vec({0.1}));
  const double scale = 1.0 / std::sqrt(2.0 * 4.0);
  CHECK(phi[0] == doctest::Approx(std::cos(0.3) * scale));
  CHECK(phi[1] == doctest::Approx(std::cos(0.2 + 0.5) * scale));
}

TEST_CASE("feature evaluation errors") {
  const auto acts = three_actions();
  const auto fm = FeatureMap::polynomial(1, vec({-1, -1}), vec({1, 1}), acts, 4);
  CHECK_THROWS_AS(fm.evaluate(vec({0}), vec({0})), ConfigError);
  CHECK_THROWS_AS(fm.evaluate(vec({0, 0}), vec({0, 0})), ConfigError);
  CHECK_THROWS_AS(fm.evaluate(vec({std::numeric_limits<double>::quiet_NaN(), 0}), vec({0})),
                  NumericError);
  CHECK_THROWS_AS(FeatureMap::polynomial(1, vec({1}), vec({0}), acts, 4), ConfigError);
  CHECK_THROWS_AS(FeatureMap::polynomial(1, vec({0}), vec({1}), acts, 0), ConfigError);
}

TEST_CASE("feature maps round trip through json") {
  const auto acts = three_actions();
  const Vector lo = vec({-2, -1}), hi = vec({2, 1});
  RngStream rng(9, "json");
  const std::vector<FeatureMap> maps{FeatureMap::polynomial(2, lo, hi, acts, 5),
                                     FeatureMap::random_fourier(6, 2, 1, 0.7, 11, 5),
                                     FeatureMap::tabular({3, 3}, lo, vec({2, 1}), acts, 5)};
  for (const auto& fm : maps) {
    const auto back = FeatureMap::from_json(fm.to_json(), acts, 5, 2);
    CHECK(back.dim() == fm.dim());
    CHECK(back.kind() == fm.kind());
    for (int i = 0; i < 50; ++i) {
      const Vector s = vec({rng.uniform(-2, 2), rng.uniform(-1, 1)});
      const Vector& a = acts[rng.index(3)];
      CHECK(back.evaluate(s, a) == fm.evaluate(s, a));
    }
  }
}
