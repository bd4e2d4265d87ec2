#include <doctest.h>

#include <cmath>
#include <sstream>

#include "bbm/functionals.hpp"

using namespace bbm;

TEST_CASE("Z, Y and V on explicit configurations") {
  const auto p = params_from_epsilon(1.0);
  const double x[] = {kPi / 2};
  CHECK(compute_Z(x, p) == doctest::Approx(4.810477380965351).epsilon(1e-14));
  CHECK(compute_Y(x, p) == doctest::Approx(std::exp(kPi / 2)));
  // Above L the indicator removes the particle from Z but not from Y.
  const double above[] = {p.L + 0.5};
  CHECK(compute_Z(above, p) == 0.0);
  CHECK(compute_Z_killed(above, p) < 0.0);
  CHECK(compute_Y(above, p) == doctest::Approx(std::exp(p.L + 0.5)));
  const double none[] = {0.0};
  CHECK(compute_V(std::span<const double>(none, 0), p, 1.0) == 0.0);
  // V = x e^{mu x + (mu^2/2 - 1) t}
  CHECK(compute_V(x, p, 2.0) == doctest::Approx(kPi / 2 * std::exp(kPi / 2 - 1.0)));
  CHECK_THROWS_AS(compute_V(x, p, -1.0), DomainError);
}

TEST_CASE("Z eigenfunction satisfies the generator identity") {
  for (double eps : {0.3, 1.0, 1.7}) {
    const auto p = params_from_epsilon(eps);
    auto f = [&](double y) { return std::exp(p.mu * y) * std::sin(kPi * y / p.L); };
    for (double y = 0.2; y < p.L; y += 0.37) {
      const double h = 1e-4;
      const double d2 = (f(y + h) - 2 * f(y) + f(y - h)) / (h * h);
      const double d1 = (f(y + h) - f(y - h)) / (2 * h);
      CHECK(std::abs(0.5 * d2 - p.mu * d1 + f(y)) < 1e-5 * std::max(1.0, f(y)));
    }
  }
}

TEST_CASE("simulate_functionals validates the time grid and samples at each time") {
  const auto p = params_from_epsilon(1.0);
  EngineOptions opts;
  const std::vector<double> bad{0.5, 1.0};
  CHECK_THROWS(simulate_functionals(p, 1.0, BarrierSpec{}, bad, 2, {1, 0}, opts));
  const std::vector<double> times{0.0, 0.5, 1.0};
  const auto traj = simulate_functionals(p, kPi / 2, BarrierSpec{}, times, 5, {1, 0}, opts);
  REQUIRE(traj.size() == 5);
  for (const auto& t : traj) {
    REQUIRE(t.samples.size() == 3);
    CHECK(t.samples[0].M == 1);
    CHECK(t.samples[0].Z == doctest::Approx(4.810477380965351));
    CHECK(t.samples[2].time == doctest::Approx(1.0));
  }
  std::ostringstream os;
  write_timeseries_csv(os, traj);
  CHECK(os.str().rfind("time,M,Z,Y,V,replica_id\n", 0) == 0);
}

TEST_CASE("martingale_report checks the barrier configuration") {
  const auto p = params_from_epsilon(1.0);
  const std::vector<double> times{0.0, 0.5};
  const auto traj = simulate_functionals(p, 1.0, BarrierSpec{}, times, 4, {1, 0}, EngineOptions{});
  CHECK_THROWS_AS(martingale_report(traj, MartingaleCheck::ZKilledAtL, p), ConfigError);
  BarrierSpec kill_at_L;
  kill_at_L.upper = p.L;
  const auto traj2 = simulate_functionals(p, 1.0, kill_at_L, times, 4, {1, 0}, EngineOptions{});
  CHECK_NOTHROW(martingale_report(traj2, MartingaleCheck::ZKilledAtL, p));
  CHECK_THROWS_AS(martingale_report(traj2, MartingaleCheck::VStoppedAtUpper, p), ConfigError);
}

TEST_CASE("killed Z has no drift on a short horizon") {
  const auto p = params_from_epsilon(1.0);
  BarrierSpec b;
  b.upper = p.L;
  const std::vector<double> times{0.0, 0.5, 1.0};
  const auto traj = simulate_functionals(p, kPi / 2, b, times, 2000, {3, 0}, EngineOptions{});
  const auto rep = martingale_report(traj, MartingaleCheck::ZKilledAtL, p);
  CHECK(rep.initial_mean == doctest::Approx(std::exp(kPi / 2)));
  CHECK(rep.passes(4.0));
}
