#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "planex/ridge.hpp"
#include "planex/world.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

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

// Batch ridge solution of min sum ||s' - W phi||^2 + lambda ||W||_F^2 via the
// normal equations, solved with a full-pivot LU on the explicit system.
Matrix batch_ridge(const std::vector<Vector>& phis, const std::vector<Vector>& next, double lambda) {
  const Index d = phis.front().size(), ds = next.front().size();
  Matrix A = lambda * Matrix::Identity(d, d);
  Matrix B = Matrix::Zero(ds, d);
  for (std::size_t i = 0; i < phis.size(); ++i) {
    A += phis[i] * phis[i].transpose();
    B += next[i] * phis[i].transpose();
  }
  return A.transpose().fullPivLu().solve(B.transpose()).transpose();
}

// Square root of an SPD matrix by eigendecomposition.
Matrix sqrtm(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

TEST_CASE("empty estimate is the prior") {
  Ridge est(1, 2, 1.0);
  CHECK(est.w_hat() == Matrix::Zero(1, 2));
  CHECK(est.precision() == Matrix::Identity(2, 2));
  CHECK(est.log_det_ratio() == 0.0);
  CHECK(est.episodes() == 0);
}

TEST_CASE("one transition by hand") {
  Ridge est(1, 2, 1.0);
  est.add(vec({1, 0}), vec({3}));
  est.refresh();
  Matrix lam(2, 2);
  lam << 2, 0, 0, 1;
  CHECK(est.precision() == lam);
  CHECK(est.w_hat()(0, 0) == doctest::Approx(1.5));
  CHECK(est.w_hat()(0, 1) == 0.0);
}

TEST_CASE("incremental fit equals the batch normal equations") {
  RngStream rng(17, "ridge");
  for (int trial = 0; trial < 20; ++trial) {
    const Index d = 1 + static_cast<Index>(rng.index(8)), ds = 1 + static_cast<Index>(rng.index(3));
    const double lambda = rng.uniform(0.5, 2.0);
    Ridge est(ds, d, lambda);
    std::vector<Vector> phis, next;
    const int n = 50;
    for (int i = 0; i < n; ++i) {
      phis.push_back(rng.normal_vector(d) / std::sqrt(double(d)));
      next.push_back(rng.normal_vector(ds));
      est.add(phis.back(), next.back());
      // Interleave refreshes with the updates.
      if (i % 7 == 0) est.refresh();
    }
    est.refresh();
    const Matrix oracle = batch_ridge(phis, next, lambda);
    CHECK((est.w_hat() - oracle).cwiseAbs().maxCoeff() <= 1e-8);
    // W_hat = sum_outer Lambda^{-1}
    const Matrix back = est.w_hat() * est.precision();
    CHECK((back - est.sum_outer()).cwiseAbs().maxCoeff() <= 1e-9);
    // Lambda >= lambda I
    Eigen::SelfAdjointEigenSolver<Matrix> es(est.precision());
    CHECK(es.eigenvalues().minCoeff() >= lambda - 1e-10);
  }
}

TEST_CASE("episode absorption through the feature map") {
  const auto world = make_integrator_world({.sigma = 0.05});
  RngStream rng(3, "env-noise");
  Ridge est(2, world.feature_dim(), 1.0);
  std::vector<Vector> phis, next;
  for (int ep = 0; ep < 5; ++ep) {
    const StepPolicy pol = [&rng, &world](int, const Vector&) {
      return world.actions()[rng.index(world.actions().size())];
    };
    const auto traj = rollout(world, pol, std::nullopt, rng);
    std::vector<Transition> ts;
    for (const auto& st : traj.steps) {
      ts.push_back({st.state, st.action, st.next_state});
      phis.push_back(st.phi);
      next.push_back(st.next_state);
    }
    est = update(est, world.features(), ts);
  }
  CHECK(est.episodes() == 5);
  CHECK(est.n_transitions() == 5 * world.horizon());
  CHECK((est.w_hat() - batch_ridge(phis, next, 1.0)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("non-finite transitions are rejected") {
  Ridge est(1, 2, 1.0);
  CHECK_THROWS_AS(est.add(vec({std::numeric_limits<double>::infinity(), 0}), vec({1})), NumericError);
  CHECK_THROWS_AS(est.add(vec({1, 0, 0}), vec({1})), ConfigError);
  CHECK_THROWS_AS(Ridge(1, 2, 0.0), DomainError);
}

TEST_CASE("confidence radius") {
  Ridge est(2, 3, 1.0);
  const double wn = 1.5, sigma = 0.2;
  const auto r1 = confidence_radius(est, 1, wn, sigma);
  CHECK(r1.logdet_ratio == 0.0);
  CHECK(r1.beta_k == doctest::Approx(2 * wn * wn + 8 * sigma * sigma * (2 * std::log(5.0) + std::log(4.0))));

  RngStream rng(1, "beta");
  for (int i = 0; i < 10; ++i) est.add(rng.normal_vector(3) * 0.3, rng.normal_vector(2));
  est.refresh();
  const auto a = confidence_radius(est, 7, wn, sigma);
  const auto b = confidence_radius(est, 14, wn, sigma);
  CHECK(b.beta_k - a.beta_k == doctest::Approx(16 * sigma * sigma * std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(confidence_radius(est, 0, wn, sigma), DomainError);

  // Nondecreasing over a run.
  Ridge run(2, 3, 1.0);
  double prev = -1;
  for (long k = 1; k <= 30; ++k) {
    const double beta = confidence_radius(run, k, wn, sigma).beta_k;
    CHECK(beta >= prev);
    prev = beta;
    run.add(rng.normal_vector(3) * 0.3, rng.normal_vector(2));
    run.refresh();
  }
}

TEST_CASE("mahalanobis error") {
  Ridge est(2, 2, 1.0);
  RngStream rng(5, "maha");
  CHECK(mahalanobis_error(est, est.w_hat()) == 0.0);
  Matrix w(2, 2);
  w << 1, -2, 0.5, 3;
  Eigen::JacobiSVD<Matrix> svd(w);
  CHECK(mahalanobis_error(est, w) == doctest::Approx(std::pow(svd.singularValues()[0], 2)).epsilon(1e-10));

  for (int trial = 0; trial < 10; ++trial) {
    Ridge e(2, 2, 1.0);
    for (int i = 0; i < 6; ++i) e.add(rng.normal_vector(2), rng.normal_vector(2));
    e.refresh();
    Matrix truth(2, 2);
    for (Index i = 0; i < 4; ++i) truth.data()[i] = rng.normal();
    const Matrix m = (truth - e.w_hat()) * sqrtm(e.precision());
    Eigen::JacobiSVD<Matrix> s(m);
    const double oracle = s.singularValues()[0] * s.singularValues()[0];
    CHECK(std::abs(mahalanobis_error(e, truth) - oracle) <= 1e-10 * std::max(1.0, oracle));
  }
  CHECK_THROWS_AS(mahalanobis_error(est, Matrix::Zero(3, 2)), ConfigError);
}

TEST_CASE("phi uncertainty") {
  Ridge id(1, 2, 1.0);
  CHECK(phi_uncertainty(id, vec({0.6, 0.8})) == doctest::Approx(1.0));
  CHECK(phi_uncertainty(id, vec({0.3, 0.4})) == doctest::Approx(0.5));

  nlohmann::json j = Ridge(1, 2, 1.0).to_json();
  j["Lambda"]["data"] = {4.0, 0.0, 0.0, 1.0};
  const Ridge diag = Ridge::from_json(j);
  CHECK(phi_uncertainty(diag, vec({2, 0})) == doctest::Approx(1.0));

  RngStream rng(2, "unc");
  for (double lambda : {0.5, 1.0, 3.0}) {
    Ridge e(1, 3, lambda);
    for (int i = 0; i < 20; ++i) {
      const Vector phi = rng.normal_vector(3);
      CHECK(phi_uncertainty(e, phi) <= phi.norm() / std::sqrt(lambda) + 1e-12);
      e.add(rng.normal_vector(3) * 0.5, rng.normal_vector(1));
    }
  }

  j["Lambda"]["data"] = {1.0, 2.0, 2.0, 1.0};
  CHECK_THROWS_AS(Ridge::from_json(j), NumericError);
}

TEST_CASE("checkpoints round trip") {
  RngStream rng(8, "ckpt");
  Ridge est(2, 4, 1.3);
  for (int i = 0; i < 25; ++i) est.add(rng.normal_vector(4) * 0.4, rng.normal_vector(2));
  est.refresh();
  const auto j = est.to_json();
  CHECK(j.contains("W_hat"));
  CHECK(j.contains("Lambda"));
  CHECK(j["lambda"] == 1.3);
  const Ridge back = Ridge::from_json(nlohmann::json::parse(j.dump()));
  CHECK((back.w_hat() - est.w_hat()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(back.precision() == est.precision());
  CHECK(back.n_transitions() == 25);
  CHECK(back.log_det() == doctest::Approx(est.log_det()));

  // Without sum_outer the accumulator is rebuilt from W_hat Lambda.
  auto slim = j;
  slim.erase("sum_outer");
  const Ridge rebuilt = Ridge::from_json(slim);
  CHECK((rebuilt.w_hat() - est.w_hat()).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("single-precision instantiation tracks double") {
  RngStream rng(4, "float");
  RidgeEstimate<float> f(1, 3, 1.0f);
  Ridge d(1, 3, 1.0);
  for (int i = 0; i < 40; ++i) {
    const Vector phi = rng.normal_vector(3) * 0.3;
    const Vector s = rng.normal_vector(1);
    f.add(phi.cast<float>(), s.cast<float>());
    d.add(phi, s);
  }
  f.refresh();
  d.refresh();
  CHECK((f.w_hat().cast<double>() - d.w_hat()).cwiseAbs().maxCoeff() <= 1e-4);
  CHECK(static_cast<double>(f.log_det()) == doctest::Approx(d.log_det()).epsilon(1e-5));
}

TEST_CASE("estimates converge under persistent excitation") {
  const auto world = make_integrator_world({.sigma = 0.05});
  std::vector<double> e10, e100, e1000;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RngStream env(seed, "env-noise"), pick(seed, "actions");
    Ridge est(2, world.feature_dim(), 1.0);
    const StepPolicy pol = [&](int, const Vector&) {
      return world.actions()[pick.index(world.actions().size())];
    };
    for (int k = 1; k <= 1000; ++k) {
      const auto traj = rollout(world, pol, std::nullopt, env);
      std::vector<Transition> ts;
      for (const auto& st : traj.steps) ts.push_back({st.state, st.action, st.next_state});
      est.absorb_episode(world.features(), ts);
      const double err = (est.w_hat() - world.w_star()).norm();
      if (k == 10) e10.push_back(err);
      if (k == 100) e100.push_back(err);
      if (k == 1000) e1000.push_back(err);
    }
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  CHECK(median(e10) > median(e100));
  CHECK(median(e100) > median(e1000));
}
