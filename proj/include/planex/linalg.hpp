#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace planex {

struct PowerIterationOptions {
  double tolerance = 1e-10;
  int max_iterations = 1000;
};

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration. Stops when the unit iterate moves less than `tolerance`; the
/// Rayleigh quotient error is then quadratic in that step.
template <typename Derived>
typename Derived::Scalar largest_eigenvalue_psd(const Eigen::MatrixBase<Derived>& m,
                                                 PowerIterationOptions opts = {}) {
  using Scalar = typename Derived::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = m.rows();
  if (n == 0) return Scalar(0);
  if (m.cwiseAbs().maxCoeff() == Scalar(0)) return Scalar(0);

  // Deterministic, non-symmetric start so it is not orthogonal to the top
  // eigenvector in any of the structured cases we meet.
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = Scalar(1) + Scalar(i + 1) / Scalar(n + 3);
  v.normalize();

  Scalar rayleigh = v.dot(m * v);
  for (int it = 0; it < opts.max_iterations; ++it) {
    Vec w = m * v;
    const Scalar norm = w.norm();
    if (norm == Scalar(0)) return Scalar(0);
    w /= norm;
    const Scalar step = (w - v).norm();
    v = std::move(w);
    rayleigh = v.dot(m * v);
    if (step <= Scalar(opts.tolerance)) break;
  }
  return rayleigh;
}

/// Spectral norm (largest singular value) via power iteration on the smaller
/// Gram matrix.
template <typename Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& m,
                                       PowerIterationOptions opts = {}) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (m.size() == 0) return Scalar(0);
  const Mat gram = m.rows() <= m.cols() ? Mat(m * m.transpose()) : Mat(m.transpose() * m);
  using std::sqrt;
  return sqrt(std::max(Scalar(0), largest_eigenvalue_psd(gram, opts)));
}

/// log det of an SPD matrix from its Cholesky factor.
template <typename Scalar>
Scalar log_det(const Eigen::LLT<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>& llt) {
  using std::log;
  return Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace planex
