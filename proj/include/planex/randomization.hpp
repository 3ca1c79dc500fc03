#pragma once

#include "planex/common.hpp"
#include "planex/ridge.hpp"

#include <functional>
#include <string>
#include <vector>

namespace planex {

enum class SchemeKind { KnrGaussian, GeneralGaussian, Bernoulli };

const char* to_string(SchemeKind kind);
SchemeKind scheme_from_string(const std::string& name);

/// Parameters of a randomized-reward scheme. `beta_delta` is beta(delta) of
/// the calibrated model; `c_r_delta` the reward concentration constant.
struct SchemeParams {
  SchemeKind kind = SchemeKind::KnrGaussian;
  double beta_delta = 1.0;
  double c_r_delta = 0.0;
  double p0 = 3.0 / 16.0;
};

/// Default beta(delta) at delta = 1/K: log K, floored at 1.
double default_beta_delta(long K);

/// Concentration constant C_r(delta') of a scheme at the given horizon.
/// Bernoulli: 2 sqrt(H) beta(delta) exactly. Gaussian: a Gaussian tail bound
/// union-bounded over the H K draws of a run.
double concentration_constant(SchemeKind kind, int H, double beta_delta, long K,
                              double delta_prime);

/// sigma_k^2 = H^3 beta_k / sigma^2
double sigma_k_squared(double beta_k, int H, double sigma);

/// H independent draws xi_h ~ N(0, sigma_k^2 Lambda^{-1}).
struct KnrNoiseDraw {
  std::vector<Vector> xi;
  double sigma_k_sq = 0.0;
  long round = 0;
};

/// Samples through the Cholesky factor: xi = sigma_k L^{-T} z, z ~ N(0, I).
KnrNoiseDraw draw_knr_noise(const Eigen::LLT<Matrix>& lambda_factor, double sigma_k_sq, int H,
                            RngStream& rng, long round = 0);
KnrNoiseDraw draw_knr_noise(const Matrix& lambda, double sigma_k_sq, int H, RngStream& rng,
                            long round = 0);

/// {r + phi^T xi_h}^+ ; no upper clip.
double perturb_knr(double r_value, const Vector& phi, const Vector& xi_h);

/// One draw of N(r, H beta(delta) iota^2).
double general_gaussian_reward(double r_value, double iota_value, int H, double beta_delta,
                               RngStream& rng);

/// One draw of r +- 2 sqrt(H) beta(delta) iota with a fair sign.
double bernoulli_reward(double r_value, double iota_value, int H, double beta_delta,
                        RngStream& rng);

/// min(1, beta_scale ||phi||_{Lambda^{-1}}), floored at 1e-12.
double knr_iota(const Ridge& est, const Vector& phi, double beta_scale);
double knr_iota(const Ridge& est, const FeatureMap& fm, const Vector& s, const Vector& a,
                double beta_scale);

inline constexpr double kIotaFloor = 1e-12;
inline constexpr double kQuantizationCell = 1e-6;

/// iota_k : S x A -> (0, 1], given the features at (s, a).
using UncertaintyFn = std::function<double(const Vector& s, const Vector& a, const Vector& phi)>;

/// Randomized reward of the general Gaussian scheme for one round. The draw
/// at (h, s, a) is a pure function of the round seed and the quantized key,
/// so the reward is a fixed function for the whole planning stage and safe to
/// query concurrently.
class GaussianRewardField {
 public:
  GaussianRewardField(std::uint64_t round_seed, int H, double beta_delta);

  double operator()(int h, const Vector& s, const Vector& a, double r_value,
                    double iota_value) const;
  /// The standard-normal variate behind (h, s, a).
  double unit_draw(int h, const Vector& s, const Vector& a) const;

 private:
  std::uint64_t round_seed_;
  int H_;
  double beta_delta_;
};

/// Randomized reward of the Bernoulli scheme for one round: one fair sign per
/// step h, shared by all states at that step.
class BernoulliRewardField {
 public:
  BernoulliRewardField(int H, double beta_delta, RngStream& rng);
  BernoulliRewardField(std::vector<int> signs, int H, double beta_delta);

  double operator()(int h, double r_value, double iota_value) const;
  int sign(int h) const { return signs_[static_cast<std::size_t>(h)]; }
  double amplitude(double iota_value) const;

 private:
  std::vector<int> signs_;
  int H_;
  double beta_delta_;
};

/// Key for the memoized per-round draw: step plus (s, a) quantized to cells of
/// kQuantizationCell.
std::uint64_t quantized_key(int h, const Vector& s, const Vector& a);

/// Exact probability, by enumerating all 2^H sign vectors, that
/// sum_h w_h eps_h >= (1/2) sqrt(sum_h w_h^2). Returned as a count of
/// favourable sign vectors out of 2^H.
struct SignEnumeration {
  std::uint64_t favourable = 0;
  std::uint64_t total = 0;
  double probability() const { return static_cast<double>(favourable) / static_cast<double>(total); }
  /// Exact rational comparison favourable / total >= num / den.
  bool at_least(std::uint64_t num, std::uint64_t den) const { return favourable * den >= num * total; }
};
SignEnumeration enumerate_sign_tail(const std::vector<double>& weights);

}  // namespace planex
