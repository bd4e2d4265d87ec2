#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "bbm/engine.hpp"
#include "bbm/model.hpp"

namespace bbm {

/// Sum of e^{mu x} sin(pi x / L) over particles with x <= L.
double compute_Z(std::span<const double> positions, const ModelParams& p);

/// Same weight without the indicator. Only meaningful when particles are
/// killed at L, where it coincides with compute_Z.
double compute_Z_killed(std::span<const double> positions, const ModelParams& p);

/// Sum of e^{mu x}.
double compute_Y(std::span<const double> positions, const ModelParams& p);

/// Sum of x e^{mu x + (mu^2/2 - 1) t}.
double compute_V(std::span<const double> positions, const ModelParams& p, double t);

struct FunctionalSample {
  double time = 0.0;
  double Z = 0.0;
  double Y = 0.0;
  double V = 0.0;
  std::int64_t M = 0;
};

/// Functionals of the live particles plus any particles frozen at the upper
/// barrier; M counts live particles only.
FunctionalSample sample_functionals(const ParticleSystem& system);

/// As above with V evaluated at time t (used when the system went extinct
/// before t and only frozen particles remain).
FunctionalSample sample_functionals(const ParticleSystem& system, double t);

struct Trajectory {
  BarrierSpec barriers;
  std::uint64_t replica_id = 0;
  std::vector<FunctionalSample> samples;
};

/// Runs `replicas` independent systems from one particle at x0 and records
/// the functionals at each time of `times` (which must start at 0 and be
/// increasing). Replica r uses stream seed.stream_id + r.
std::vector<Trajectory> simulate_functionals(const ModelParams& params, double x0,
                                             const BarrierSpec& barriers,
                                             std::span<const double> times, std::size_t replicas,
                                             const SeedSpec& seed, const EngineOptions& opts);

enum class MartingaleCheck { ZKilledAtL, VStoppedAtUpper };

std::string_view to_string(MartingaleCheck c);

struct DriftPoint {
  double time = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  /// (mean(t) - mean(0)) / standard error of the paired differences.
  double z_vs_initial = 0.0;
  /// Same against the previous grid time.
  double z_vs_previous = 0.0;
};

struct DriftReport {
  MartingaleCheck which = MartingaleCheck::ZKilledAtL;
  double initial_mean = 0.0;
  std::vector<DriftPoint> points;

  /// Martingale case: |z_vs_initial| < z_max at every time. Supermartingale
  /// case: z_vs_previous < z_max at every time.
  bool passes(double z_max = 3.0) const;
};

/// Ensemble drift of Z (killing at 0 and L = pi/sqrt(eps)) or of V (upper
/// barrier absent or freezing). Throws ConfigError if a trajectory was run
/// with a different barrier configuration.
DriftReport martingale_report(std::span<const Trajectory> trajectories, MartingaleCheck which,
                              const ModelParams& params);

/// CSV with header time,M,Z,Y,V,replica_id.
void write_timeseries_csv(std::ostream& os, std::span<const Trajectory> trajectories);

}  // namespace bbm
