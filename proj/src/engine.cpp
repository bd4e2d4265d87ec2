#include "bbm/engine.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "bbm/functionals.hpp"
#include "bbm/stats.hpp"

namespace bbm {

namespace {

// Bridge crossing probability below exp(-kBridgeCutoff) is treated as zero.
constexpr double kBridgeCutoff = 60.0;

}  // namespace

std::string_view to_string(DeathCause c) {
  switch (c) {
    case DeathCause::AbsorbedLower: return "absorbed_lower";
    case DeathCause::AbsorbedUpper: return "absorbed_upper";
    case DeathCause::Branched: return "branched";
    case DeathCause::AliveAtEnd: return "alive_at_end";
  }
  return "unknown";
}

std::string_view to_string(Outcome::Kind k) {
  switch (k) {
    case Outcome::Kind::Extinct: return "extinct";
    case Outcome::Kind::AliveAtHorizon: return "alive_at_horizon";
    case Outcome::Kind::PopulationCap: return "population_cap";
    case Outcome::Kind::ZThreshold: return "z_threshold";
  }
  return "unknown";
}

double default_dt(const ModelParams&) { return 0.01; }

double bridge_crossing_prob(double d_start, double d_end, double dt) {
  if (!(dt > 0.0)) throw DomainError("bridge_crossing_prob: dt must be positive");
  if (d_start < 0.0 || d_end < 0.0) throw DomainError("bridge_crossing_prob: negative distance");
  return std::exp(-2.0 * d_start * d_end / dt);
}

ParticleSystem::ParticleSystem(const ModelParams& params, const BarrierSpec& barriers,
                               std::span<const double> initial_positions, Rng& rng)
    : params_(params), barriers_(barriers), initial_count_(initial_positions.size()) {
  if (barriers.upper && !(*barriers.upper > barriers.lower)) {
    throw DomainError("upper barrier must lie above the lower barrier");
  }
  for (double x : initial_positions) {
    if (!(x > barriers.lower) || (barriers.upper && !(x < *barriers.upper))) {
      throw DomainError("initial position " + std::to_string(x) +
                        " is not strictly inside the barriers");
    }
  }
  pos_.reserve(initial_positions.size());
  for (double x : initial_positions) {
    const auto id = new_record(-1, 0.0);
    pos_.push_back(x);
    clock_.push_back(rng.exponential());
    id_.push_back(id);
  }
}

std::vector<Particle> ParticleSystem::particles() const {
  std::vector<Particle> out;
  out.reserve(pos_.size());
  for (std::size_t i = 0; i < pos_.size(); ++i) {
    const auto& rec = arena_[static_cast<std::size_t>(id_[i])];
    out.push_back({id_[i], pos_[i], rec.birth_time, rec.parent_id, true});
  }
  return out;
}

std::int64_t ParticleSystem::new_record(std::int64_t parent, double birth) {
  const auto id = static_cast<std::int64_t>(arena_.size());
  LineageRecord rec;
  rec.id = id;
  rec.parent_id = parent;
  rec.birth_time = birth;
  arena_.push_back(rec);
  return id;
}

void ParticleSystem::push_next(double x, double clock, std::int64_t id) {
  next_pos_.push_back(x);
  next_clock_.push_back(clock);
  next_id_.push_back(id);
}

ParticleSystem::Hit ParticleSystem::crossing(double from, double to, double duration,
                                             Rng& rng) const {
  const double lo = barriers_.lower;
  if (to <= lo) return Hit::Lower;
  if (barriers_.upper && to >= *barriers_.upper) return Hit::Upper;
  if (duration <= 0.0) return Hit::None;
  const double e_lo = 2.0 * (from - lo) * (to - lo) / duration;
  if (e_lo < kBridgeCutoff && rng.uniform() < std::exp(-e_lo)) return Hit::Lower;
  if (barriers_.upper) {
    const double up = *barriers_.upper;
    const double e_up = 2.0 * (up - from) * (up - to) / duration;
    if (e_up < kBridgeCutoff && rng.uniform() < std::exp(-e_up)) return Hit::Upper;
  }
  return Hit::None;
}

void ParticleSystem::kill(std::int64_t id, Hit where, double time) {
  auto& rec = arena_[static_cast<std::size_t>(id)];
  rec.death_time = time;
  ++absorptions_;
  if (where == Hit::Lower) {
    rec.cause = DeathCause::AbsorbedLower;
    rec.death_position = barriers_.lower;
    ++lower_counts_.n_hits;
    lower_counts_.hit_times.push_back(time);
  } else {
    rec.cause = DeathCause::AbsorbedUpper;
    rec.death_position = *barriers_.upper;
    ++upper_counts_.n_hits;
    upper_counts_.hit_times.push_back(time);
    if (barriers_.upper_mode == UpperMode::Freeze) frozen_.push_back(*barriers_.upper);
  }
}

StepStatus ParticleSystem::step(double h, Rng& rng, const EngineOptions& opts) {
  if (!(h > 0.0)) throw DomainError("step: dt must be positive");
  const double mu = params_.mu;
  const double t0 = time_;
  const double t1 = t0 + h;
  const double sqrt_h = std::sqrt(h);
  const std::size_t n = pos_.size();

  next_pos_.clear();
  next_clock_.clear();
  next_id_.clear();

  for (std::size_t i = 0; i < n; ++i) {
    const double x0 = pos_[i];
    const double clock = clock_[i];
    const std::int64_t id = id_[i];

    if (!opts.branching || clock >= h) {
      const double x1 = x0 - mu * h + sqrt_h * rng.normal();
      const Hit hit = crossing(x0, x1, h, rng);
      if (hit != Hit::None) {
        kill(id, hit, t1);
      } else {
        push_next(x1, opts.branching ? clock - h : clock, id);
      }
      continue;
    }

    // Branching inside the step at offset u.
    const double u = std::max(clock, 0.0);
    const double xb = u > 0.0 ? x0 - mu * u + std::sqrt(u) * rng.normal() : x0;
    const Hit pre = crossing(x0, xb, u, rng);
    if (pre != Hit::None) {
      kill(id, pre, t1);
      continue;
    }
    {
      auto& rec = arena_[static_cast<std::size_t>(id)];
      rec.death_time = t0 + u;
      rec.cause = DeathCause::Branched;
      rec.death_position = xb;
    }
    ++branch_events_;
    const double rem = h - u;
    const double sqrt_rem = std::sqrt(rem);
    for (int k = 0; k < 2; ++k) {
      const std::int64_t child = new_record(id, t0 + u);
      const double x1 = rem > 0.0 ? xb - mu * rem + sqrt_rem * rng.normal() : xb;
      const Hit hit = crossing(xb, x1, rem, rng);
      const double child_clock = rng.exponential() - rem;
      if (hit != Hit::None) {
        kill(child, hit, t1);
      } else {
        push_next(x1, child_clock, child);
      }
    }
  }

  pos_.swap(next_pos_);
  clock_.swap(next_clock_);
  id_.swap(next_id_);
  time_ = t1;

#ifndef NDEBUG
  assert(check_invariants().empty());
#endif
  return pos_.size() > opts.pop_cap ? StepStatus::Overflow : StepStatus::Ok;
}

std::string ParticleSystem::check_invariants() const {
  std::ostringstream err;
  const auto expected = static_cast<std::int64_t>(initial_count_) + branch_events_ - absorptions_;
  if (expected != static_cast<std::int64_t>(pos_.size())) {
    err << "population " << pos_.size() << " != initial + branches - absorptions = " << expected
        << "; ";
  }
  std::size_t alive_records = 0;
  for (const auto& rec : arena_) {
    if (rec.parent_id < 0) {
      if (rec.id >= static_cast<std::int64_t>(initial_count_)) err << "orphan id " << rec.id << "; ";
    } else {
      if (rec.parent_id >= rec.id) err << "parent " << rec.parent_id << " not older than " << rec.id << "; ";
      const auto& parent = arena_[static_cast<std::size_t>(rec.parent_id)];
      if (parent.cause != DeathCause::Branched) err << "parent of " << rec.id << " did not branch; ";
      if (rec.birth_time < parent.birth_time) err << "child " << rec.id << " born before parent; ";
      if (rec.birth_time != parent.death_time) err << "child " << rec.id << " birth != parent branch time; ";
    }
    if (rec.cause == DeathCause::AliveAtEnd) ++alive_records;
  }
  if (alive_records != pos_.size()) {
    err << "alive records " << alive_records << " != live particles " << pos_.size() << "; ";
  }
  for (std::size_t i = 0; i < pos_.size(); ++i) {
    if (!(pos_[i] > barriers_.lower) || (barriers_.upper && !(pos_[i] < *barriers_.upper))) {
      err << "particle " << id_[i] << " outside barriers; ";
    }
    if (arena_[static_cast<std::size_t>(id_[i])].cause != DeathCause::AliveAtEnd) {
      err << "live particle " << id_[i] << " marked dead; ";
    }
  }
  if (!std::is_sorted(lower_counts_.hit_times.begin(), lower_counts_.hit_times.end()) ||
      !std::is_sorted(upper_counts_.hit_times.begin(), upper_counts_.hit_times.end())) {
    err << "hit times not sorted; ";
  }
  return err.str();
}

StepStatus step_system(ParticleSystem& system, double dt, Rng& rng, const EngineOptions& opts) {
  return system.step(dt, rng, opts);
}

Outcome run_until(ParticleSystem& system, double horizon, const StopRule& stop, Rng& rng,
                  const EngineOptions& opts) {
  EngineOptions step_opts = opts;
  step_opts.pop_cap = stop.pop_cap;
  const bool z_active = std::isfinite(stop.z_threshold);
  double next_z_check = system.time();
  while (true) {
    if (system.extinct()) return {Outcome::Kind::Extinct, system.time()};
    if (z_active && system.time() >= next_z_check - 1e-12) {
      if (compute_Z(system.positions(), system.params()) >= stop.z_threshold) {
        return {Outcome::Kind::ZThreshold, system.time()};
      }
      next_z_check += stop.z_check_interval;
    }
    const double remaining = horizon - system.time();
    if (remaining <= 1e-12) return {Outcome::Kind::AliveAtHorizon, system.time()};
    const double h = std::min(opts.dt, remaining);
    if (system.step(h, rng, step_opts) == StepStatus::Overflow) {
      return {Outcome::Kind::PopulationCap, system.time()};
    }
  }
}

BarrierCounts first_passage_census(double x_start, double barrier_level, const ModelParams& params,
                                   Rng& rng, double time_cap, const EngineOptions& opts) {
  if (!(barrier_level > 0.0) || !(barrier_level < x_start)) {
    throw DomainError("first_passage_census requires 0 < barrier_level < x_start");
  }
  BarrierSpec barriers;
  barriers.lower = barrier_level;
  const double x0[] = {x_start};
  ParticleSystem system(params, barriers, x0, rng);
  StopRule stop;
  stop.pop_cap = opts.pop_cap;
  const Outcome out = run_until(system, time_cap, stop, rng, opts);
  BarrierCounts counts = system.lower_counts();
  counts.truncated = out.kind != Outcome::Kind::Extinct;
  return counts;
}

double default_z_threshold(const ModelParams& params, double x0) {
  const double big = 50.0 * n_log2_equivalent(params.L);
  const double xs[] = {x0};
  const double z0 = compute_Z(xs, params);
  // At x0 = L the sine factor is rounding noise; treat it as zero.
  return z0 > 1e-12 * std::exp(params.mu * x0) ? std::min(big, 1e4 * z0) : big;
}

SurvivalEstimate estimate_survival(double x, const ModelParams& params,
                                   const MonteCarloSettings& mc, const SeedSpec& seed) {
  if (!(x > 0.0)) throw DomainError("estimate_survival requires x > 0");
  if (mc.replicas == 0) throw DomainError("estimate_survival requires replicas >= 1");

  EngineOptions opts;
  opts.dt = mc.dt.value_or(default_dt(params));
  opts.branching = mc.branching;
  opts.pop_cap = mc.pop_cap;
  StopRule stop;
  stop.pop_cap = mc.pop_cap;
  stop.z_threshold = mc.z_threshold.value_or(default_z_threshold(params, x));

  std::vector<Outcome::Kind> outcomes(mc.replicas);
  parallel_for(mc.replicas, [&](std::size_t r) {
    Rng rng(seed.with_stream(seed.stream_id + r));
    const double x0[] = {x};
    ParticleSystem system(params, BarrierSpec{}, x0, rng);
    outcomes[r] = run_until(system, mc.horizon, stop, rng, opts).kind;
  });

  SurvivalEstimate est;
  est.replicas = mc.replicas;
  for (auto k : outcomes) {
    switch (k) {
      case Outcome::Kind::Extinct: ++est.extinct; break;
      case Outcome::Kind::ZThreshold: ++est.z_threshold_hits; break;
      case Outcome::Kind::PopulationCap: ++est.pop_cap_hits; break;
      case Outcome::Kind::AliveAtHorizon: ++est.alive_at_horizon; break;
    }
  }
  const double n = static_cast<double>(mc.replicas);
  est.p_hat = static_cast<double>(mc.replicas - est.extinct) / n;
  est.ci_halfwidth = 1.96 * std::sqrt(est.p_hat * (1.0 - est.p_hat) / n);
  est.decided_fraction = 1.0 - static_cast<double>(est.alive_at_horizon) / n;
  est.unreliable = est.decided_fraction < mc.decided_floor;
  return est;
}

std::vector<double> survival_at_horizons(double x, const ModelParams& params,
                                         const MonteCarloSettings& mc,
                                         std::span<const double> horizons, const SeedSpec& seed) {
  if (!(x > 0.0)) throw DomainError("survival_at_horizons requires x > 0");
  if (horizons.empty()) return {};
  const double t_max = *std::max_element(horizons.begin(), horizons.end());
  EngineOptions opts;
  opts.dt = mc.dt.value_or(default_dt(params));
  opts.branching = mc.branching;
  StopRule stop;
  stop.pop_cap = mc.pop_cap;

  std::vector<double> death(mc.replicas);
  parallel_for(mc.replicas, [&](std::size_t r) {
    Rng rng(seed.with_stream(seed.stream_id + r));
    const double x0[] = {x};
    ParticleSystem system(params, BarrierSpec{}, x0, rng);
    const Outcome out = run_until(system, t_max, stop, rng, opts);
    death[r] = out.kind == Outcome::Kind::Extinct ? out.time
                                                  : std::numeric_limits<double>::infinity();
  });
  std::vector<double> freq;
  for (double h : horizons) {
    const auto alive = std::count_if(death.begin(), death.end(), [h](double d) { return d > h; });
    freq.push_back(static_cast<double>(alive) / static_cast<double>(mc.replicas));
  }
  return freq;
}

void write_genealogy(std::ostream& os, const ParticleSystem& system) {
  std::vector<double> live_pos(system.genealogy().size(), std::numeric_limits<double>::quiet_NaN());
  const auto ids = system.ids();
  const auto pos = system.positions();
  for (std::size_t i = 0; i < ids.size(); ++i) live_pos[static_cast<std::size_t>(ids[i])] = pos[i];
  for (const auto& rec : system.genealogy()) {
    nlohmann::ordered_json j;
    j["id"] = rec.id;
    if (rec.parent_id < 0) {
      j["parent_id"] = nullptr;
    } else {
      j["parent_id"] = rec.parent_id;
    }
    j["birth_time"] = rec.birth_time;
    const bool alive = rec.cause == DeathCause::AliveAtEnd;
    j["death_time"] = alive ? system.time() : rec.death_time;
    j["death_cause"] = std::string(to_string(rec.cause));
    j["death_position"] = alive ? live_pos[static_cast<std::size_t>(rec.id)] : rec.death_position;
    os << j.dump() << '\n';
  }
}

}  // namespace bbm
