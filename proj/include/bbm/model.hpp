#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace bbm {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrt2 = 1.41421356237309504880;

/// Raised when an argument lies outside the domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised for inconsistent or incomplete configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Near-critical model parameters.
///
/// The drift is mu = sqrt(2 - epsilon) and the strip width is
/// L = pi / sqrt(epsilon), so that 1 - mu^2/2 - pi^2/(2 L^2) = 0. `a` is the
/// drift constant of the limiting branching mechanism; it is not known and is
/// carried as a free parameter (0 by default).
struct ModelParams {
  double epsilon = 1.0;
  double mu = 1.0;
  double L = kPi;
  double a = 0.0;
};

ModelParams params_from_epsilon(double epsilon, double a = 0.0);

/// N-parameterization: L = (log N + 3 log log N) / sqrt 2.
ModelParams params_from_N(std::int64_t N, double a = 0.0);

/// Value of N(log N)^2 for the N that corresponds to strip width L, i.e. the
/// solution u of u + 3 log u = sqrt(2) L, mapped to e^u u^2. Works for
/// non-integer equivalents so it is defined for every valid epsilon.
double n_log2_equivalent(double L);

/// Max deviation of the two defining identities; 0 up to rounding.
double invariant_defect(const ModelParams& p);

/// Identifies one independent random stream.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  SeedSpec with_stream(std::uint64_t s) const { return {master_seed, s}; }
  bool operator==(const SeedSpec&) const = default;
};

/// Per-replica random source. Streams are seeded through std::seed_seq from
/// all four 32-bit halves of (master_seed, stream_id).
class Rng {
 public:
  explicit Rng(const SeedSpec& seed);

  double uniform() { return uniform_(engine_); }
  /// Uniform on (0, 1], safe to take the log of.
  double uniform_pos() { return 1.0 - uniform_(engine_); }
  double normal() { return normal_(engine_); }
  double exponential() { return -std::log(uniform_pos()); }
  std::uint64_t bits() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Model block of a configuration file: exactly one of "epsilon" / "N",
/// optional "a" (default 0) and "master_seed" (default 0).
struct ModelConfig {
  ModelParams params;
  std::uint64_t master_seed = 0;
};

ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace bbm
