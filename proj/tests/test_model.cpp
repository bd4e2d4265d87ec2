#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "bbm/model.hpp"

using namespace bbm;

TEST_CASE("params_from_epsilon reference values") {
  auto p = params_from_epsilon(2.0);
  CHECK(p.mu == doctest::Approx(0.0));
  CHECK(p.L == doctest::Approx(2.221441469079183).epsilon(1e-14));

  p = params_from_epsilon(1.0);
  CHECK(p.mu == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p.L == doctest::Approx(kPi).epsilon(1e-15));

  // sqrt(1.92) and pi / sqrt(0.08) evaluated independently.
  p = params_from_epsilon(0.08);
  CHECK(std::abs(p.mu - std::sqrt(1.92L)) < 1e-15);
  CHECK(std::abs(p.L - 3.14159265358979323846L / std::sqrt(0.08L)) < 1e-14);
  CHECK(p.mu == doctest::Approx(1.3856406).epsilon(1e-7));
  CHECK(p.L == doctest::Approx(11.107207).epsilon(1e-7));
}

TEST_CASE("params_from_epsilon rejects values outside (0, 2]") {
  CHECK_THROWS_AS(params_from_epsilon(0.0), DomainError);
  CHECK_THROWS_AS(params_from_epsilon(-0.1), DomainError);
  CHECK_THROWS_AS(params_from_epsilon(2.0000001), DomainError);
  CHECK_THROWS_AS(params_from_epsilon(std::nan("")), DomainError);
}

TEST_CASE("parameter identities hold for random epsilon") {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    double e = u(gen);
    if (e == 0.0) continue;
    const auto p = params_from_epsilon(e, 0.3);
    CHECK(std::abs(p.L * std::sqrt(p.epsilon) - kPi) < 1e-12);
    CHECK(std::abs(p.mu * p.mu + p.epsilon - 2.0) < 1e-12);
    CHECK(p.mu < kSqrt2);
    CHECK(invariant_defect(p) < 1e-12);
    CHECK(p.a == 0.3);
  }
}

TEST_CASE("N parameterization") {
  CHECK_THROWS_AS(params_from_N(2), DomainError);
  CHECK_THROWS_AS(params_from_N(0), DomainError);
  // L falls below pi / sqrt(2) for N this small.
  CHECK_THROWS_AS(params_from_N(3), DomainError);
  CHECK_THROWS_AS(params_from_N(5), DomainError);
  double prev_eps = 10.0;
  for (std::int64_t N : {6LL, 10LL, 100LL, 1000LL, 1000000LL, 1000000000000LL}) {
    const auto p = params_from_N(N);
    const double ln = std::log(static_cast<double>(N));
    CHECK(p.L == doctest::Approx((ln + 3.0 * std::log(ln)) / std::sqrt(2.0)).epsilon(1e-14));
    const auto q = params_from_epsilon(p.epsilon);
    CHECK(std::abs(q.L - p.L) < 1e-12);
    CHECK(std::abs(q.mu - p.mu) < 1e-12);
    CHECK(p.epsilon < prev_eps);
    prev_eps = p.epsilon;
    // The equivalent recovers N (log N)^2 exactly for integer N.
    CHECK(n_log2_equivalent(p.L) == doctest::Approx(N * ln * ln).epsilon(1e-9));
  }
}

TEST_CASE("Rng streams are reproducible and distinct") {
  Rng a({1, 0}), b({1, 0}), c({1, 1}), d({2, 0});
  std::set<std::uint64_t> firsts;
  for (int i = 0; i < 10; ++i) CHECK(a.bits() == b.bits());
  firsts.insert(Rng({1, 0}).bits());
  firsts.insert(c.bits());
  firsts.insert(d.bits());
  firsts.insert(Rng({0, 1ULL << 32}).bits());
  CHECK(firsts.size() == 4);
  Rng e({5, 5});
  for (int i = 0; i < 1000; ++i) {
    const double v = e.uniform_pos();
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
    CHECK(e.exponential() >= 0.0);
  }
}

TEST_CASE("model_config_from_json") {
  auto cfg = model_config_from_json(nlohmann::json::parse(R"({"epsilon": 0.5, "a": 1.5, "master_seed": 9})"));
  CHECK(cfg.params.epsilon == 0.5);
  CHECK(cfg.params.a == 1.5);
  CHECK(cfg.master_seed == 9);
  cfg = model_config_from_json(nlohmann::json::parse(R"({"N": 100})"));
  CHECK(cfg.params.a == 0.0);
  CHECK(cfg.master_seed == 0);
  CHECK_THROWS_AS(model_config_from_json(nlohmann::json::parse(R"({"epsilon": 1, "N": 10})")), ConfigError);
  CHECK_THROWS_AS(model_config_from_json(nlohmann::json::parse(R"({"a": 1})")), ConfigError);
  CHECK_THROWS_AS(model_config_from_json(nlohmann::json::parse(R"({"N": 10.5})")), ConfigError);
  CHECK_THROWS_AS(model_config_from_json(nlohmann::json::parse(R"({"epsilon": 3})")), DomainError);
}
