#pragma once

#include "planex/common.hpp"
#include "planex/features.hpp"
#include "planex/linalg.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <span>

namespace planex {

/// (s, a, s') as executed.
struct Transition {
  Vector state;
  Vector action;
  Vector next_state;
};

/// Online ridge regression of s' on phi(s, a):
///
///   Lambda = lambda I + sum phi phi^T,   W_hat = (sum s' phi^T) Lambda^{-1}.
///
/// Lambda^{-1} is never formed. The Cholesky factor of Lambda is kept current
/// with rank-one updates and every solve goes through it.
template <typename Scalar>
class RidgeEstimate {
 public:
  using MatrixS = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using VectorS = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  RidgeEstimate(Index state_dim, Index feature_dim, Scalar lambda)
      : lambda_(lambda),
        w_hat_(MatrixS::Zero(state_dim, feature_dim)),
        sum_outer_(MatrixS::Zero(state_dim, feature_dim)),
        lambda_mat_(lambda * MatrixS::Identity(feature_dim, feature_dim)) {
    if (!(lambda > Scalar(0))) throw DomainError("ridge: lambda must be positive");
    if (state_dim < 1 || feature_dim < 1) throw DomainError("ridge: empty dimensions");
    llt_.compute(lambda_mat_);
  }

  Index state_dim() const { return w_hat_.rows(); }
  Index feature_dim() const { return w_hat_.cols(); }
  Scalar lambda() const { return lambda_; }
  const MatrixS& w_hat() const { return w_hat_; }
  const MatrixS& precision() const { return lambda_mat_; }
  const MatrixS& sum_outer() const { return sum_outer_; }
  const Eigen::LLT<MatrixS>& cholesky() const { return llt_; }
  long n_transitions() const { return n_transitions_; }
  /// Number of completed episodes absorbed; the estimate serves round k = episodes + 1.
  long episodes() const { return episodes_; }
  std::uint64_t ingest_hash() const { return ingest_hash_; }

  Scalar log_det() const { return planex::log_det<Scalar>(llt_); }
  /// log det(Lambda_k) - log det(lambda I)
  Scalar log_det_ratio() const {
    using std::log;
    return log_det() - Scalar(feature_dim()) * log(lambda_);
  }

  /// Accumulates one (phi, s') pair. Call refresh() after a batch.
  void add(const VectorS& phi, const VectorS& next_state) {
    if (phi.size() != feature_dim() || next_state.size() != state_dim())
      throw ConfigError("ridge: transition dimension mismatch");
    if (!phi.allFinite() || !next_state.allFinite())
      throw NumericError("ridge: non-finite transition");
    lambda_mat_.noalias() += phi * phi.transpose();
    sum_outer_.noalias() += next_state * phi.transpose();
    llt_.rankUpdate(phi, Scalar(1));
    if (llt_.info() != Eigen::Success) throw NumericError("ridge: Cholesky update failed");
    ++n_transitions_;
  }

  /// Recomputes W_hat = sum_outer Lambda^{-1} from the cached factor.
  void refresh() {
    w_hat_ = llt_.solve(sum_outer_.transpose()).transpose();
  }

  /// Absorbs one episode of executed transitions.
  void absorb_episode(const FeatureMap& fm, std::span<const Transition> transitions) {
    for (const auto& t : transitions) {
      if (!t.state.allFinite() || !t.action.allFinite() || !t.next_state.allFinite())
        throw NumericError("ridge: non-finite transition");
      const VectorS phi = fm.evaluate(t.state, t.action).template cast<Scalar>();
      add(phi, t.next_state.template cast<Scalar>());
      ingest_hash_ = hash_transition(t, ingest_hash_);
    }
    refresh();
    ++episodes_;
  }

  /// Refactorizes Lambda from scratch (drops accumulated rank-update error).
  void refactorize() {
    llt_.compute(lambda_mat_);
    if (llt_.info() != Eigen::Success) throw NumericError("ridge: Lambda is not SPD");
    refresh();
  }

  static std::uint64_t hash_transition(const Transition& t, std::uint64_t h) {
    h = fnv1a_doubles(t.state.data(), static_cast<std::size_t>(t.state.size()), h);
    h = fnv1a_doubles(t.action.data(), static_cast<std::size_t>(t.action.size()), h);
    return fnv1a_doubles(t.next_state.data(), static_cast<std::size_t>(t.next_state.size()), h);
  }

  nlohmann::json to_json() const;
  static RidgeEstimate from_json(const nlohmann::json& j);

 private:
  Scalar lambda_;
  MatrixS w_hat_;
  MatrixS sum_outer_;
  MatrixS lambda_mat_;
  Eigen::LLT<MatrixS> llt_;
  long n_transitions_ = 0;
  long episodes_ = 0;
  std::uint64_t ingest_hash_ = 0xcbf29ce484222325ULL;
};

using Ridge = RidgeEstimate<double>;

/// Functional update: returns the estimate after absorbing `transitions`.
template <typename Scalar>
RidgeEstimate<Scalar> update(RidgeEstimate<Scalar> est, const FeatureMap& fm,
                             std::span<const Transition> transitions) {
  est.absorb_episode(fm, transitions);
  return est;
}

struct ConfidenceRadius {
  double beta_k = 0.0;
  double w_star_norm_bound = 0.0;
  double sigma = 0.0;
  double logdet_ratio = 0.0;
};

/// beta_k = 2 lambda ||W*||^2 + 8 sigma^2 (d_S log 5 + 2 log k + log 4 + log det(Lambda_k)/det(lambda I))
template <typename Scalar>
ConfidenceRadius confidence_radius(const RidgeEstimate<Scalar>& est, long k,
                                   double w_star_norm_bound, double sigma) {
  if (k < 1) throw DomainError("confidence_radius: k must be >= 1");
  if (!(w_star_norm_bound >= 0.0) || !(sigma >= 0.0))
    throw DomainError("confidence_radius: bounds must be nonnegative");
  ConfidenceRadius r;
  r.w_star_norm_bound = w_star_norm_bound;
  r.sigma = sigma;
  r.logdet_ratio = static_cast<double>(est.log_det_ratio());
  const double d_s = static_cast<double>(est.state_dim());
  r.beta_k = 2.0 * static_cast<double>(est.lambda()) * w_star_norm_bound * w_star_norm_bound +
             8.0 * sigma * sigma *
                 (d_s * std::log(5.0) + 2.0 * std::log(static_cast<double>(k)) + std::log(4.0) +
                  r.logdet_ratio);
  return r;
}

/// ||(W_true - W_hat) Lambda^{1/2}||_2^2, i.e. the top eigenvalue of
/// D Lambda D^T with D = W_true - W_hat.
template <typename Scalar, typename Derived>
Scalar mahalanobis_error(const RidgeEstimate<Scalar>& est,
                         const Eigen::MatrixBase<Derived>& w_true) {
  if (w_true.rows() != est.state_dim() || w_true.cols() != est.feature_dim())
    throw ConfigError("mahalanobis_error: shape mismatch");
  using MatrixS = typename RidgeEstimate<Scalar>::MatrixS;
  const MatrixS diff = w_true.template cast<Scalar>() - est.w_hat();
  const MatrixS gram = diff * est.precision() * diff.transpose();
  return largest_eigenvalue_psd(gram);
}

/// ||phi||_{Lambda^{-1}} = ||L^{-1} phi|| with Lambda = L L^T.
template <typename Scalar, typename Derived>
Scalar phi_uncertainty(const RidgeEstimate<Scalar>& est, const Eigen::MatrixBase<Derived>& phi) {
  if (phi.size() != est.feature_dim()) throw ConfigError("phi_uncertainty: dimension mismatch");
  if (est.cholesky().info() != Eigen::Success) throw NumericError("phi_uncertainty: Lambda not SPD");
  typename RidgeEstimate<Scalar>::VectorS y = phi.template cast<Scalar>();
  est.cholesky().matrixL().solveInPlace(y);
  return y.norm();
}

template <typename Scalar>
Scalar phi_uncertainty(const RidgeEstimate<Scalar>& est, const FeatureMap& fm, const Vector& s,
                       const Vector& a) {
  return phi_uncertainty(est, fm.evaluate(s, a));
}

// ---------------------------------------------------------------------------
// JSON checkpoints

template <typename Scalar>
nlohmann::json RidgeEstimate<Scalar>::to_json() const {
  auto mat = [](const MatrixS& m) {
    nlohmann::json data = nlohmann::json::array();
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) data.push_back(static_cast<double>(m(r, c)));
    return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
  };
  return nlohmann::json{{"W_hat", mat(w_hat_)},
                        {"Lambda", mat(lambda_mat_)},
                        {"sum_outer", mat(sum_outer_)},
                        {"lambda", static_cast<double>(lambda_)},
                        {"k", episodes_ + 1},
                        {"n_transitions", n_transitions_}};
}

template <typename Scalar>
RidgeEstimate<Scalar> RidgeEstimate<Scalar>::from_json(const nlohmann::json& j) {
  auto mat = [](const nlohmann::json& m, const char* what) {
    if (!m.contains("rows") || !m.contains("cols") || !m.contains("data"))
      throw ConfigError(std::string("checkpoint: malformed ") + what);
    const auto rows = m["rows"].get<Index>(), cols = m["cols"].get<Index>();
    const auto& data = m["data"];
    if (static_cast<Index>(data.size()) != rows * cols)
      throw ConfigError(std::string("checkpoint: bad size for ") + what);
    MatrixS out(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) out(r, c) = Scalar(data[static_cast<std::size_t>(r * cols + c)].get<double>());
    return out;
  };
  const MatrixS lam = mat(j.at("Lambda"), "Lambda");
  const MatrixS w = mat(j.at("W_hat"), "W_hat");
  RidgeEstimate est(w.rows(), w.cols(), Scalar(j.at("lambda").get<double>()));
  if (lam.rows() != w.cols() || lam.cols() != w.cols())
    throw ConfigError("checkpoint: Lambda shape does not match W_hat");
  est.lambda_mat_ = lam;
  est.llt_.compute(lam);
  if (est.llt_.info() != Eigen::Success) throw NumericError("checkpoint: Lambda is not SPD");
  // sum_outer = W_hat Lambda when not stored explicitly.
  est.sum_outer_ = j.contains("sum_outer") ? mat(j["sum_outer"], "sum_outer") : MatrixS(w * lam);
  est.refresh();
  est.episodes_ = std::max<long>(0, j.value("k", 1L) - 1);
  est.n_transitions_ = j.value("n_transitions", 0L);
  return est;
}

}  // namespace planex
