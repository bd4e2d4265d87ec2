#include "bbm/model.hpp"

#include <algorithm>
#include <cmath>

namespace bbm {

ModelParams params_from_epsilon(double epsilon, double a) {
  if (!(epsilon > 0.0) || epsilon > 2.0) {
    throw DomainError("epsilon must lie in (0, 2], got " + std::to_string(epsilon));
  }
  ModelParams p;
  p.epsilon = epsilon;
  p.mu = std::sqrt(2.0 - epsilon);
  p.L = kPi / std::sqrt(epsilon);
  p.a = a;
  return p;
}

ModelParams params_from_N(std::int64_t N, double a) {
  if (N < 3) {
    throw DomainError("N must be at least 3, got " + std::to_string(N));
  }
  const double logN = std::log(static_cast<double>(N));
  const double scale = logN + 3.0 * std::log(logN);
  ModelParams p;
  p.epsilon = 2.0 * kPi * kPi / (scale * scale);
  if (p.epsilon > 2.0) {
    throw DomainError("N = " + std::to_string(N) + " gives epsilon > 2");
  }
  p.mu = std::sqrt(2.0 - p.epsilon);
  p.L = scale / kSqrt2;
  p.a = a;
  return p;
}

double n_log2_equivalent(double L) {
  // u + 3 log u is increasing for u > 0; bisect on [1e-12, target].
  const double target = kSqrt2 * L;
  double lo = 1e-12;
  double hi = std::max(target, 1.0);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid + 3.0 * std::log(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double u = 0.5 * (lo + hi);
  return std::exp(u) * u * u;
}

double invariant_defect(const ModelParams& p) {
  const double d1 = std::abs(p.mu * p.mu + p.epsilon - 2.0);
  const double d2 = std::abs(1.0 - 0.5 * p.mu * p.mu - kPi * kPi / (2.0 * p.L * p.L));
  const double d3 = std::abs(p.L * std::sqrt(p.epsilon) - kPi);
  return std::max({d1, d2, d3});
}

Rng::Rng(const SeedSpec& seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed.master_seed),
                    static_cast<std::uint32_t>(seed.master_seed >> 32),
                    static_cast<std::uint32_t>(seed.stream_id),
                    static_cast<std::uint32_t>(seed.stream_id >> 32)};
  engine_.seed(seq);
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  const bool has_eps = j.contains("epsilon");
  const bool has_n = j.contains("N");
  if (has_eps == has_n) {
    throw ConfigError("config must contain exactly one of \"epsilon\" or \"N\"");
  }
  ModelConfig cfg;
  const double a = j.value("a", 0.0);
  if (has_eps) {
    cfg.params = params_from_epsilon(j.at("epsilon").get<double>(), a);
  } else {
    const auto& n = j.at("N");
    if (!n.is_number_integer()) {
      throw ConfigError("\"N\" must be an integer");
    }
    cfg.params = params_from_N(n.get<std::int64_t>(), a);
  }
  cfg.master_seed = j.value("master_seed", std::uint64_t{0});
  return cfg;
}

}  // namespace bbm
