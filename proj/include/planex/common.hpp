#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace planex {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Error taxonomy. Everything derives from std::runtime_error so callers that
// only care about "the run failed" can catch one type.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PolicyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PlannerRefusal : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvariantViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void warn(std::string_view message);
void set_warnings_enabled(bool enabled);

/// 64-bit FNV-1a, used for stream naming and replay hashes.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a_doubles(const double* data, std::size_t n, std::uint64_t seed);

/// SplitMix64 finalizer; a good stateless mixer for counter-based draws.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Standard normal from a 64-bit key (Box-Muller on two derived uniforms).
double normal_from_key(std::uint64_t key);

/// A named pseudo-random stream. Two streams with the same numeric seed but
/// different names are independent, so a single experiment seed can feed the
/// env-noise, reward-noise and planner streams without sharing state.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view name);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  bool coin() { return (engine_() >> 63) != 0; }
  std::uint64_t next_u64() { return engine_(); }

  Vector normal_vector(Index n);

  std::uint64_t seed() const { return seed_; }
  const std::string& name() const { return name_; }

 private:
  std::uint64_t seed_;
  std::string name_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Standard normal CDF via erfc.
double normal_cdf(double x);

}  // namespace planex
