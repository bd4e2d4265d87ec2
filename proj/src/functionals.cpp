#include "bbm/functionals.hpp"

#include <cmath>
#include <ostream>

#include "bbm/stats.hpp"

namespace bbm {

double compute_Z(std::span<const double> positions, const ModelParams& p) {
  CompensatedSum s;
  for (double x : positions) {
    if (x <= p.L) s.add(std::exp(p.mu * x) * std::sin(kPi * x / p.L));
  }
  return s.value();
}

double compute_Z_killed(std::span<const double> positions, const ModelParams& p) {
  CompensatedSum s;
  for (double x : positions) s.add(std::exp(p.mu * x) * std::sin(kPi * x / p.L));
  return s.value();
}

double compute_Y(std::span<const double> positions, const ModelParams& p) {
  CompensatedSum s;
  for (double x : positions) s.add(std::exp(p.mu * x));
  return s.value();
}

double compute_V(std::span<const double> positions, const ModelParams& p, double t) {
  if (t < 0.0) throw DomainError("compute_V requires t >= 0");
  const double decay = (0.5 * p.mu * p.mu - 1.0) * t;
  CompensatedSum s;
  for (double x : positions) s.add(x * std::exp(p.mu * x + decay));
  return s.value();
}

FunctionalSample sample_functionals(const ParticleSystem& system) {
  return sample_functionals(system, system.time());
}

FunctionalSample sample_functionals(const ParticleSystem& system, double t) {
  const auto& p = system.params();
  std::vector<double> all(system.positions().begin(), system.positions().end());
  all.insert(all.end(), system.frozen_positions().begin(), system.frozen_positions().end());
  FunctionalSample s;
  s.time = t;
  s.M = static_cast<std::int64_t>(system.size());
  s.Z = compute_Z(all, p);
  s.Y = compute_Y(all, p);
  s.V = compute_V(all, p, t);
  return s;
}

std::vector<Trajectory> simulate_functionals(const ModelParams& params, double x0,
                                             const BarrierSpec& barriers,
                                             std::span<const double> times, std::size_t replicas,
                                             const SeedSpec& seed, const EngineOptions& opts) {
  if (times.empty() || times.front() != 0.0) {
    throw DomainError("simulate_functionals: time grid must start at 0");
  }
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) throw DomainError("simulate_functionals: grid not increasing");
  }
  std::vector<Trajectory> out(replicas);
  parallel_for(replicas, [&](std::size_t r) {
    Rng rng(seed.with_stream(seed.stream_id + r));
    const double start[] = {x0};
    ParticleSystem system(params, barriers, start, rng);
    Trajectory& traj = out[r];
    traj.barriers = barriers;
    traj.replica_id = seed.stream_id + r;
    traj.samples.push_back(sample_functionals(system));
    for (std::size_t k = 1; k < times.size(); ++k) {
      while (!system.extinct() && system.time() < times[k] - 1e-12) {
        system.step(std::min(opts.dt, times[k] - system.time()), rng, opts);
      }
      traj.samples.push_back(sample_functionals(system, times[k]));
    }
  });
  return out;
}

std::string_view to_string(MartingaleCheck c) {
  return c == MartingaleCheck::ZKilledAtL ? "Z_killed_at_L" : "V_stopped_at_upper";
}

bool DriftReport::passes(double z_max) const {
  for (const auto& pt : points) {
    if (which == MartingaleCheck::ZKilledAtL) {
      if (!(std::abs(pt.z_vs_initial) < z_max)) return false;
    } else {
      if (!(pt.z_vs_previous < z_max)) return false;
    }
  }
  return true;
}

namespace {

void check_barriers(const BarrierSpec& b, MartingaleCheck which, const ModelParams& p) {
  if (b.lower != 0.0) throw ConfigError("martingale_report: lower barrier must be at 0");
  if (which == MartingaleCheck::ZKilledAtL) {
    if (!b.upper || std::abs(*b.upper - p.L) > 1e-12 || b.upper_mode != UpperMode::Kill) {
      throw ConfigError("Z_killed_at_L requires killing at the upper barrier L");
    }
  } else if (b.upper && b.upper_mode != UpperMode::Freeze) {
    throw ConfigError("V_stopped_at_upper requires the upper barrier to stop particles");
  }
}

double pick(const FunctionalSample& s, MartingaleCheck which) {
  return which == MartingaleCheck::ZKilledAtL ? s.Z : s.V;
}

}  // namespace

DriftReport martingale_report(std::span<const Trajectory> trajectories, MartingaleCheck which,
                              const ModelParams& params) {
  if (trajectories.empty()) throw DomainError("martingale_report: empty ensemble");
  const std::size_t n_times = trajectories.front().samples.size();
  for (const auto& t : trajectories) {
    check_barriers(t.barriers, which, params);
    if (t.samples.size() != n_times) throw DomainError("martingale_report: ragged ensemble");
  }
  DriftReport rep;
  rep.which = which;
  std::vector<double> values, d_init, d_prev;
  for (std::size_t k = 0; k < n_times; ++k) {
    values.clear();
    d_init.clear();
    d_prev.clear();
    for (const auto& t : trajectories) {
      const double v = pick(t.samples[k], which);
      values.push_back(v);
      d_init.push_back(v - pick(t.samples[0], which));
      d_prev.push_back(v - pick(t.samples[k == 0 ? 0 : k - 1], which));
    }
    const MeanStat m = mean_stat(values);
    if (k == 0) {
      rep.initial_mean = m.mean;
      continue;
    }
    const MeanStat mi = mean_stat(d_init);
    const MeanStat mp = mean_stat(d_prev);
    DriftPoint pt;
    pt.time = trajectories.front().samples[k].time;
    pt.mean = m.mean;
    pt.std_error = m.std_error;
    pt.z_vs_initial = mi.std_error > 0.0 ? mi.mean / mi.std_error : 0.0;
    pt.z_vs_previous = mp.std_error > 0.0 ? mp.mean / mp.std_error : 0.0;
    rep.points.push_back(pt);
  }
  return rep;
}

void write_timeseries_csv(std::ostream& os, std::span<const Trajectory> trajectories) {
  os << "time,M,Z,Y,V,replica_id\n";
  os.precision(17);
  for (const auto& t : trajectories) {
    for (const auto& s : t.samples) {
      os << s.time << ',' << s.M << ',' << s.Z << ',' << s.Y << ',' << s.V << ',' << t.replica_id
         << '\n';
    }
  }
}

}  // namespace bbm
