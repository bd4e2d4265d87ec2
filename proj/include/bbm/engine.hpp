#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bbm/model.hpp"

namespace bbm {

enum class DeathCause : std::uint8_t { AbsorbedLower, AbsorbedUpper, Branched, AliveAtEnd };

std::string_view to_string(DeathCause c);

/// One entry of the genealogy arena. The id of a particle is its index in the
/// arena; `parent_id` is -1 for initial particles. While a particle is alive
/// its death_time is +inf and its cause is AliveAtEnd.
struct LineageRecord {
  std::int64_t id = 0;
  std::int64_t parent_id = -1;
  double birth_time = 0.0;
  double death_time = std::numeric_limits<double>::infinity();
  DeathCause cause = DeathCause::AliveAtEnd;
  double death_position = std::numeric_limits<double>::quiet_NaN();
};

/// Snapshot view of a live particle.
struct Particle {
  std::int64_t id = 0;
  double position = 0.0;
  double birth_time = 0.0;
  std::int64_t parent_id = -1;
  bool alive = true;
};

/// What happens to a particle that reaches the upper barrier. Frozen particles
/// stop moving and branching but stay in the configuration at the barrier.
enum class UpperMode { Kill, Freeze };

struct BarrierSpec {
  double lower = 0.0;
  std::optional<double> upper;
  UpperMode upper_mode = UpperMode::Kill;
};

/// Hits recorded at one barrier, at the grid time of detection.
struct BarrierCounts {
  std::int64_t n_hits = 0;
  std::vector<double> hit_times;
  bool truncated = false;
};

struct EngineOptions {
  double dt = 0.01;
  /// Test-harness switch; the model always branches at rate one.
  bool branching = true;
  std::size_t pop_cap = 1'000'000;
};

/// Default time step for the model. The scheme is exact at grid times for the
/// motion and the barrier crossings, so dt only controls the O(dt^2) chance of
/// two branchings on one lineage within a step.
double default_dt(const ModelParams& p);

enum class StepStatus { Ok, Overflow };

/// Branching Brownian motion with drift -mu, binary branching at rate one and
/// absorption at the lower barrier (and optionally at an upper barrier).
///
/// Live particles are stored structure-of-arrays. Each one carries an
/// exponential clock: the time left until its next branching, measured from
/// the start of the current step. A step of length h moves a particle by
/// -mu h + sqrt(h) G. If the clock rings inside the step the path is split at
/// the branching time u: the parent moves to the branch point, then each
/// child moves independently for the remaining h - u. Every path segment is
/// tested against the barriers with the Brownian-bridge crossing probability.
class ParticleSystem {
 public:
  ParticleSystem(const ModelParams& params, const BarrierSpec& barriers,
                 std::span<const double> initial_positions, Rng& rng);

  const ModelParams& params() const { return params_; }
  const BarrierSpec& barriers() const { return barriers_; }
  double time() const { return time_; }
  std::size_t size() const { return pos_.size(); }
  bool extinct() const { return pos_.empty(); }

  std::span<const double> positions() const { return pos_; }
  std::span<const std::int64_t> ids() const { return id_; }
  /// Particles stopped at the upper barrier (UpperMode::Freeze only).
  std::span<const double> frozen_positions() const { return frozen_; }
  std::span<const LineageRecord> genealogy() const { return arena_; }
  const BarrierCounts& lower_counts() const { return lower_counts_; }
  const BarrierCounts& upper_counts() const { return upper_counts_; }
  std::int64_t branch_events() const { return branch_events_; }
  std::size_t initial_count() const { return initial_count_; }

  std::vector<Particle> particles() const;

  /// Ids of the live particles.
  std::vector<std::int64_t> alive_ids() const { return id_; }

  /// Advances by h. Returns Overflow if the population exceeds pop_cap after
  /// the step; the state is still complete and consistent.
  StepStatus step(double h, Rng& rng, const EngineOptions& opts);

  /// Checks the genealogy forest and particle-count identities; returns an
  /// empty string when all hold, otherwise a description of the violation.
  std::string check_invariants() const;

 private:
  enum class Hit { None, Lower, Upper };

  Hit crossing(double from, double to, double duration, Rng& rng) const;
  void kill(std::int64_t id, Hit where, double time);
  std::int64_t new_record(std::int64_t parent, double birth);
  void push_next(double x, double clock, std::int64_t id);

  ModelParams params_;
  BarrierSpec barriers_;
  double time_ = 0.0;
  std::size_t initial_count_ = 0;
  std::int64_t branch_events_ = 0;
  std::int64_t absorptions_ = 0;

  std::vector<double> pos_;
  std::vector<double> clock_;
  std::vector<std::int64_t> id_;
  std::vector<double> next_pos_;
  std::vector<double> next_clock_;
  std::vector<std::int64_t> next_id_;
  std::vector<double> frozen_;

  std::vector<LineageRecord> arena_;
  BarrierCounts lower_counts_;
  BarrierCounts upper_counts_;
};

StepStatus step_system(ParticleSystem& system, double dt, Rng& rng, const EngineOptions& opts);

/// Probability that a Brownian bridge of duration dt whose endpoints lie at
/// distances d_start and d_end from a barrier touches it.
double bridge_crossing_prob(double d_start, double d_end, double dt);

/// All stop conditions are active together; extinction always stops a run.
struct StopRule {
  std::size_t pop_cap = 1'000'000;
  double z_threshold = std::numeric_limits<double>::infinity();
  /// How often (in time units) Z is evaluated against z_threshold.
  double z_check_interval = 0.1;
};

struct Outcome {
  enum class Kind { Extinct, AliveAtHorizon, PopulationCap, ZThreshold };
  Kind kind = Kind::AliveAtHorizon;
  double time = 0.0;
};

std::string_view to_string(Outcome::Kind k);

Outcome run_until(ParticleSystem& system, double horizon, const StopRule& stop, Rng& rng,
                  const EngineOptions& opts);

/// Kills particles at barrier_level < x_start (and at 0) and counts the hits.
/// `truncated` is set when the run ends at time_cap or pop_cap with particles
/// still alive.
BarrierCounts first_passage_census(double x_start, double barrier_level, const ModelParams& params,
                                   Rng& rng, double time_cap, const EngineOptions& opts);

struct MonteCarloSettings {
  std::size_t replicas = 1000;
  double horizon = 200.0;
  std::size_t pop_cap = 1'000'000;
  /// nullopt: use default_z_threshold; +inf disables the Z stop.
  std::optional<double> z_threshold;
  std::optional<double> dt;
  double decided_floor = 0.95;
  bool branching = true;
};

/// min(50 N(log N)^2, 1e4 Z(0)) for a single particle at x0, where N is the
/// equivalent of L; the second term is dropped when Z(0) = 0 (including the
/// x0 = L case, where sin(pi x0 / L) is only rounding error).
double default_z_threshold(const ModelParams& params, double x0);

struct SurvivalEstimate {
  double p_hat = 0.0;
  double ci_halfwidth = 0.0;
  double decided_fraction = 1.0;
  bool unreliable = false;
  std::size_t replicas = 0;
  std::size_t extinct = 0;
  std::size_t z_threshold_hits = 0;
  std::size_t pop_cap_hits = 0;
  std::size_t alive_at_horizon = 0;
};

/// Replica r runs on stream seed.stream_id + r.
SurvivalEstimate estimate_survival(double x, const ModelParams& params,
                                   const MonteCarloSettings& mc, const SeedSpec& seed);

/// Fraction of replicas still alive at each horizon, from one run per replica
/// to the largest horizon with the Z stop disabled. Coupled across horizons.
std::vector<double> survival_at_horizons(double x, const ModelParams& params,
                                         const MonteCarloSettings& mc,
                                         std::span<const double> horizons, const SeedSpec& seed);

/// Writes one JSON object per line with keys in the order id, parent_id,
/// birth_time, death_time, death_cause, death_position. Live particles are
/// written with the system time as death_time and cause alive_at_end.
void write_genealogy(std::ostream& os, const ParticleSystem& system);

}  // namespace bbm
