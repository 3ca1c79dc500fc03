#include "planex/randomization.hpp"

#include <cmath>

namespace planex {

const char* to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::KnrGaussian:
      return "knr-gaussian";
    case SchemeKind::GeneralGaussian:
      return "general-gaussian";
    case SchemeKind::Bernoulli:
      return "bernoulli";
  }
  return "?";
}

SchemeKind scheme_from_string(const std::string& name) {
  if (name == "knr-gaussian") return SchemeKind::KnrGaussian;
  if (name == "general-gaussian") return SchemeKind::GeneralGaussian;
  if (name == "bernoulli") return SchemeKind::Bernoulli;
  throw ConfigError("unknown scheme '" + name + "'");
}

double default_beta_delta(long K) {
  return std::max(1.0, std::log(static_cast<double>(std::max(K, 1L))));
}

double concentration_constant(SchemeKind kind, int H, double beta_delta, long K,
                              double delta_prime) {
  const double h = static_cast<double>(H);
  switch (kind) {
    case SchemeKind::Bernoulli:
      return 2.0 * std::sqrt(h) * beta_delta;
    case SchemeKind::GeneralGaussian:
    case SchemeKind::KnrGaussian: {
      if (!(delta_prime > 0.0)) throw DomainError("concentration_constant: delta' must be > 0");
      const double draws = h * static_cast<double>(std::max(K, 1L));
      return std::sqrt(h * beta_delta * 2.0 * std::log(2.0 * draws / delta_prime));
    }
  }
  return 0.0;
}

double sigma_k_squared(double beta_k, int H, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("sigma_k_squared: sigma must be positive");
  if (H < 1) throw DomainError("sigma_k_squared: H must be >= 1");
  if (!(beta_k >= 0.0)) throw DomainError("sigma_k_squared: beta_k must be nonnegative");
  const double h = static_cast<double>(H);
  return h * h * h * beta_k / (sigma * sigma);
}

KnrNoiseDraw draw_knr_noise(const Eigen::LLT<Matrix>& lambda_factor, double sigma_k_sq, int H,
                            RngStream& rng, long round) {
  if (lambda_factor.info() != Eigen::Success) throw NumericError("draw_knr_noise: Lambda not SPD");
  if (!(sigma_k_sq >= 0.0)) throw DomainError("draw_knr_noise: sigma_k^2 must be >= 0");
  const double sigma_k = std::sqrt(sigma_k_sq);
  const Index d = lambda_factor.matrixLLT().rows();
  KnrNoiseDraw out;
  out.sigma_k_sq = sigma_k_sq;
  out.round = round;
  out.xi.reserve(static_cast<std::size_t>(H));
  for (int h = 0; h < H; ++h) {
    // Cov(L^{-T} z) = (L L^T)^{-1} = Lambda^{-1}
    Vector z = rng.normal_vector(d);
    lambda_factor.matrixU().solveInPlace(z);
    out.xi.push_back(sigma_k * z);
  }
  return out;
}

KnrNoiseDraw draw_knr_noise(const Matrix& lambda, double sigma_k_sq, int H, RngStream& rng,
                            long round) {
  Eigen::LLT<Matrix> llt(lambda);
  if (llt.info() != Eigen::Success) throw NumericError("draw_knr_noise: Lambda not SPD");
  return draw_knr_noise(llt, sigma_k_sq, H, rng, round);
}

double perturb_knr(double r_value, const Vector& phi, const Vector& xi_h) {
  return std::max(r_value + phi.dot(xi_h), 0.0);
}

double general_gaussian_reward(double r_value, double iota_value, int H, double beta_delta,
                               RngStream& rng) {
  const double sd = std::sqrt(static_cast<double>(H) * beta_delta) * iota_value;
  return r_value + sd * rng.normal();
}

double bernoulli_reward(double r_value, double iota_value, int H, double beta_delta,
                        RngStream& rng) {
  const double amp = 2.0 * std::sqrt(static_cast<double>(H)) * beta_delta * iota_value;
  return rng.coin() ? r_value + amp : r_value - amp;
}

double knr_iota(const Ridge& est, const Vector& phi, double beta_scale) {
  const double u = beta_scale * phi_uncertainty(est, phi);
  return std::clamp(u, kIotaFloor, 1.0);
}

double knr_iota(const Ridge& est, const FeatureMap& fm, const Vector& s, const Vector& a,
                double beta_scale) {
  return knr_iota(est, fm.evaluate(s, a), beta_scale);
}

std::uint64_t quantized_key(int h, const Vector& s, const Vector& a) {
  std::uint64_t key = splitmix64(static_cast<std::uint64_t>(h) + 0x632be59bd9b4e019ULL);
  auto mix = [&key](double x) {
    const auto cell = static_cast<std::int64_t>(std::llround(x / kQuantizationCell));
    key = splitmix64(key ^ static_cast<std::uint64_t>(cell));
  };
  for (Index i = 0; i < s.size(); ++i) mix(s[i]);
  key = splitmix64(key ^ 0xa0761d6478bd642fULL);
  for (Index i = 0; i < a.size(); ++i) mix(a[i]);
  return key;
}

GaussianRewardField::GaussianRewardField(std::uint64_t round_seed, int H, double beta_delta)
    : round_seed_(round_seed), H_(H), beta_delta_(beta_delta) {
  if (!(beta_delta >= 0.0)) throw DomainError("gaussian scheme: beta(delta) must be >= 0");
}

double GaussianRewardField::unit_draw(int h, const Vector& s, const Vector& a) const {
  return normal_from_key(round_seed_ ^ quantized_key(h, s, a));
}

double GaussianRewardField::operator()(int h, const Vector& s, const Vector& a, double r_value,
                                       double iota_value) const {
  const double sd = std::sqrt(static_cast<double>(H_) * beta_delta_) * iota_value;
  return r_value + sd * unit_draw(h, s, a);
}

BernoulliRewardField::BernoulliRewardField(int H, double beta_delta, RngStream& rng)
    : H_(H), beta_delta_(beta_delta) {
  if (!(beta_delta >= 0.0)) throw DomainError("bernoulli scheme: beta(delta) must be >= 0");
  signs_.reserve(static_cast<std::size_t>(H));
  for (int h = 0; h < H; ++h) signs_.push_back(rng.coin() ? 1 : -1);
}

BernoulliRewardField::BernoulliRewardField(std::vector<int> signs, int H, double beta_delta)
    : signs_(std::move(signs)), H_(H), beta_delta_(beta_delta) {
  if (static_cast<int>(signs_.size()) != H) throw DomainError("bernoulli scheme: need H signs");
}

double BernoulliRewardField::amplitude(double iota_value) const {
  return 2.0 * std::sqrt(static_cast<double>(H_)) * beta_delta_ * iota_value;
}

double BernoulliRewardField::operator()(int h, double r_value, double iota_value) const {
  return r_value + sign(h) * amplitude(iota_value);
}

SignEnumeration enumerate_sign_tail(const std::vector<double>& weights) {
  const std::size_t H = weights.size();
  if (H == 0 || H > 30) throw DomainError("enumerate_sign_tail: need 1..30 weights");
  double sq = 0.0;
  for (double w : weights) sq += w * w;
  const double threshold = 0.5 * std::sqrt(sq);
  // Ties (e.g. 16 equal weights) must count; allow for summation rounding.
  const double slack = 1e-12 * static_cast<double>(H) * std::sqrt(sq);
  SignEnumeration out;
  out.total = std::uint64_t{1} << H;
  for (std::uint64_t mask = 0; mask < out.total; ++mask) {
    double sum = 0.0;
    for (std::size_t h = 0; h < H; ++h) sum += ((mask >> h) & 1U) ? weights[h] : -weights[h];
    if (sum >= threshold - slack) ++out.favourable;
  }
  return out;
}

}  // namespace planex
