#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "planex/common.hpp"
#include "planex/json_io.hpp"
#include "planex/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <filesystem>

using namespace planex;

TEST_CASE("named streams are reproducible and independent") {
  RngStream a(42, "env-noise"), b(42, "env-noise"), c(42, "planner"), d(43, "env-noise");
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
    CHECK(x != d.next_u64());
  }
}

TEST_CASE("stream helpers stay in range") {
  RngStream r(1, "t");
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform(-2.0, 3.0);
    CHECK(u >= -2.0);
    CHECK(u < 3.0);
    CHECK(r.index(7) < 7);
  }
  CHECK(r.normal_vector(5).size() == 5);
}

TEST_CASE("normal cdf at -1") {
  // Reference value of Phi(-1) to 17 digits.
  CHECK(normal_cdf(-1.0) == doctest::Approx(0.15865525393145705).epsilon(1e-14));
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.0) + normal_cdf(-1.0) == doctest::Approx(1.0));
}

TEST_CASE("counter-based normals have unit moments") {
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = normal_from_key(splitmix64(static_cast<std::uint64_t>(i)));
    s += z;
    s2 += z * z;
  }
  const double mean = s / n, var = s2 / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("fnv1a is stable and seed sensitive") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  const double xs[3] = {1.0, 2.0, 3.0};
  CHECK(fnv1a_doubles(xs, 3, 1) != fnv1a_doubles(xs, 3, 2));
}

TEST_CASE("power iteration agrees with dense solvers") {
  RngStream r(7, "linalg");
  for (int t = 0; t < 20; ++t) {
    Matrix a(3, 5);
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = r.normal();
    Eigen::JacobiSVD<Matrix> svd(a);
    CHECK(spectral_norm(a) == doctest::Approx(svd.singularValues()[0]).epsilon(1e-9));
    const Matrix g = a.transpose() * a;
    Eigen::SelfAdjointEigenSolver<Matrix> es(g);
    CHECK(largest_eigenvalue_psd(g) == doctest::Approx(es.eigenvalues().maxCoeff()).epsilon(1e-9));
  }
  CHECK(spectral_norm(Matrix::Zero(2, 3)) == 0.0);
}

TEST_CASE("log det from the Cholesky factor") {
  Matrix m(2, 2);
  m << 4, 1, 1, 3;
  Eigen::LLT<Matrix> llt(m);
  CHECK(log_det<double>(llt) == doctest::Approx(std::log(11.0)));
}

TEST_CASE("json matrix and vector round trip") {
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const auto j = json_io::matrix_to_json(m);
  CHECK(j["rows"] == 2);
  CHECK(j["data"][3] == 4.0);
  CHECK(json_io::matrix_from_json(j, "m") == m);
  Vector v(3);
  v << 0.1, -2, 1e-300;
  CHECK(json_io::vector_from_json(json_io::vector_to_json(v), "v") == v);

  const auto path = (std::filesystem::temp_directory_path() / "planex_json_io.json").string();
  json_io::write_file(path, j);
  CHECK(json_io::read_file(path) == j);
  std::filesystem::remove(path);
  CHECK_THROWS(json_io::read_file(path));
}
