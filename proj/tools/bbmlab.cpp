// bbmlab: experiment runner and module-level tools for near-critical
// branching Brownian motion.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bbm/coalescent.hpp"
#include "bbm/csbp.hpp"
#include "bbm/engine.hpp"
#include "bbm/experiments.hpp"
#include "bbm/functionals.hpp"
#include "bbm/model.hpp"
#include "bbm/wave.hpp"

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  return os;
}

int run_experiment_cmd(const std::string& name, const std::string& config_path,
                       std::optional<std::uint64_t> seed, std::optional<std::string> out,
                       const std::string& format) {
  std::ifstream in(config_path);
  if (!in) throw bbm::ConfigError("cannot read config " + config_path);
  const auto j = nlohmann::json::parse(in);
  const auto cfg = bbm::experiment_config_from_json(j, name, seed);
  const std::string dir = out.value_or(cfg.output_dir);
  const auto tables = bbm::run_experiment(cfg);
  std::size_t flagged = 0;
  for (const auto& t : tables) {
    if (format == "csv" || format == "both") {
      std::cout << bbm::emit_outputs(t, bbm::OutputFormat::Csv, dir).string() << '\n';
    }
    if (format == "json" || format == "both") {
      std::cout << bbm::emit_outputs(t, bbm::OutputFormat::Json, dir).string() << '\n';
    }
    flagged += t.flagged_rows();
  }
  if (flagged > 0) {
    std::cerr << "bbmlab: " << flagged << " flagged row(s)\n";
    return 2;
  }
  return 0;
}

bbm::ModelParams model_from_flags(std::optional<double> epsilon, std::optional<std::int64_t> N,
                                  double a) {
  if (epsilon.has_value() == N.has_value()) {
    throw bbm::ConfigError("give exactly one of --epsilon and --N");
  }
  return epsilon ? bbm::params_from_epsilon(*epsilon, a) : bbm::params_from_N(*N, a);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bbmlab: near-critical branching Brownian motion experiments"};
  app.require_subcommand(1);

  struct ExpOpts {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::string format = "both";
  };
  const std::vector<std::string> experiments = {"thm1_wave_match", "thm2_asymptotic",
                                                "prop_ic_scaling", "coalescent_compare",
                                                "survival_curve"};
  std::vector<ExpOpts> exp_opts(experiments.size());
  std::vector<CLI::App*> exp_cmds;
  for (std::size_t i = 0; i < experiments.size(); ++i) {
    auto* cmd = app.add_subcommand(experiments[i], "Run the " + experiments[i] + " experiment");
    cmd->add_option("--config", exp_opts[i].config, "JSON configuration file")->required();
    cmd->add_option("--seed", exp_opts[i].seed, "Override master_seed");
    cmd->add_option("--out", exp_opts[i].out, "Output directory (overrides output_dir)");
    cmd->add_option("--format", exp_opts[i].format, "csv, json or both")
        ->check(CLI::IsMember({"csv", "json", "both"}));
    exp_cmds.push_back(cmd);
  }

  // wave
  auto* wave = app.add_subcommand("wave", "Solve the traveling wave or the Kolmogorov BVP");
  std::string wave_kind = "theta";
  std::optional<double> wave_mu;
  double wave_lo = -20.0, wave_hi = 20.0, wave_tol = 1e-10;
  std::optional<double> wave_domain;
  std::size_t wave_intervals = 4096;
  std::string wave_out = "wave.csv";
  wave->add_option("kind", wave_kind, "theta or kolmogorov")
      ->check(CLI::IsMember({"theta", "kolmogorov"}));
  wave->add_option("--mu", wave_mu, "Drift for the Kolmogorov BVP");
  wave->add_option("--lo", wave_lo, "Left end of the theta grid");
  wave->add_option("--hi", wave_hi, "Right end of the theta grid");
  wave->add_option("--domain", wave_domain, "Right end of the Kolmogorov domain");
  wave->add_option("--intervals", wave_intervals, "Grid intervals");
  wave->add_option("--tol", wave_tol, "Newton tolerance");
  wave->add_option("--out", wave_out, "CSV output; a .json sidecar is written next to it");

  // csbp
  auto* csbp = app.add_subcommand("csbp", "Sample CSBP paths");
  double csbp_a = 0.0, csbp_z0 = 1.0, csbp_T = 6.0;
  std::size_t csbp_steps = 60, csbp_paths = 100;
  std::uint64_t csbp_seed = 0;
  std::string csbp_out = "csbp_paths.csv";
  csbp->add_option("--a", csbp_a, "Mechanism drift constant");
  csbp->add_option("--z0", csbp_z0, "Initial value");
  csbp->add_option("--T", csbp_T, "Final time");
  csbp->add_option("--steps", csbp_steps, "Number of grid steps");
  csbp->add_option("--paths", csbp_paths, "Number of paths");
  csbp->add_option("--seed", csbp_seed, "Master seed");
  csbp->add_option("--out", csbp_out, "CSV output; a .json sidecar is written next to it");

  // coalesce
  auto* coalesce = app.add_subcommand("coalesce", "Sample Bolthausen-Sznitman coalescents");
  int co_n = 4;
  std::size_t co_samples = 100;
  double co_horizon = 1e300;
  std::uint64_t co_seed = 0;
  std::string co_out = "coalescent.ndjson";
  coalesce->add_option("--n", co_n, "Number of singletons")->check(CLI::Range(2, 64));
  coalesce->add_option("--samples", co_samples, "Number of samples");
  coalesce->add_option("--horizon", co_horizon, "Stop time");
  coalesce->add_option("--seed", co_seed, "Master seed");
  coalesce->add_option("--out", co_out, "NDJSON output, one process per line");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Estimate survival and dump trajectories");
  std::optional<double> sim_eps;
  std::optional<std::int64_t> sim_N;
  double sim_a = 0.0, sim_x = 1.0, sim_horizon = 200.0;
  std::optional<double> sim_dt;
  std::size_t sim_replicas = 1000, sim_cap = 1'000'000;
  std::uint64_t sim_seed = 0;
  std::optional<std::string> sim_genealogy, sim_timeseries;
  std::vector<double> sim_times{0.0, 0.5, 1.0, 2.0};
  sim->add_option("--epsilon", sim_eps, "Criticality parameter");
  sim->add_option("--N", sim_N, "N-parameterization");
  sim->add_option("--a", sim_a, "Mechanism drift constant");
  sim->add_option("--x", sim_x, "Starting position");
  sim->add_option("--dt", sim_dt, "Time step");
  sim->add_option("--horizon", sim_horizon, "Horizon");
  sim->add_option("--replicas", sim_replicas, "Replicas");
  sim->add_option("--seed", sim_seed, "Master seed");
  sim->add_option("--pop-cap", sim_cap, "Population cap");
  sim->add_option("--genealogy", sim_genealogy, "NDJSON genealogy of replica 0 at the horizon");
  sim->add_option("--timeseries", sim_timeseries, "CSV of Z, Y, V, M on --times");
  sim->add_option("--times", sim_times, "Sampling times for --timeseries")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    for (std::size_t i = 0; i < exp_cmds.size(); ++i) {
      if (exp_cmds[i]->parsed()) {
        const auto& o = exp_opts[i];
        return run_experiment_cmd(experiments[i], o.config, o.seed, o.out, o.format);
      }
    }
    if (wave->parsed()) {
      bbm::WaveSolution s;
      if (wave_kind == "theta") {
        s = bbm::solve_traveling_wave({wave_lo, wave_hi, wave_intervals}, wave_tol);
      } else {
        if (!wave_mu) throw bbm::ConfigError("kolmogorov needs --mu");
        s = bbm::solve_kolmogorov_bvp(*wave_mu, wave_domain.value_or(bbm::min_kolmogorov_domain(*wave_mu)),
                                      wave_tol, wave_intervals);
      }
      auto os = open_out(wave_out);
      bbm::write_wave_csv(os, s);
      auto side = open_out(wave_out + ".json");
      side << bbm::wave_sidecar(s).dump(2) << '\n';
      return 0;
    }
    if (csbp->parsed()) {
      if (csbp_steps == 0) throw bbm::ConfigError("--steps must be positive");
      const auto p = bbm::CsbpParams::from_a(csbp_a);
      std::vector<double> times;
      for (std::size_t k = 0; k <= csbp_steps; ++k) {
        times.push_back(csbp_T * static_cast<double>(k) / static_cast<double>(csbp_steps));
      }
      std::vector<bbm::CsbpPath> paths;
      for (std::size_t i = 0; i < csbp_paths; ++i) {
        bbm::Rng rng({csbp_seed, i});
        paths.push_back(bbm::sample_path(csbp_z0, times, p, rng));
      }
      auto os = open_out(csbp_out);
      bbm::write_paths_csv(os, paths);
      auto side = open_out(csbp_out + ".json");
      side << bbm::csbp_sidecar(p, csbp_z0, csbp_paths).dump(2) << '\n';
      return 0;
    }
    if (coalesce->parsed()) {
      auto os = open_out(co_out);
      for (std::size_t i = 0; i < co_samples; ++i) {
        bbm::Rng rng({co_seed, i});
        os << bbm::to_json(bbm::bs_sample(co_n, co_horizon, rng)).dump() << '\n';
      }
      return 0;
    }
    if (sim->parsed()) {
      const auto p = model_from_flags(sim_eps, sim_N, sim_a);
      bbm::MonteCarloSettings mc;
      mc.replicas = sim_replicas;
      mc.horizon = sim_horizon;
      mc.pop_cap = sim_cap;
      mc.dt = sim_dt;
      const bbm::SeedSpec seed{sim_seed, 0};
      const auto est = bbm::estimate_survival(sim_x, p, mc, seed);
      nlohmann::ordered_json j;
      j["epsilon"] = p.epsilon;
      j["mu"] = p.mu;
      j["L"] = p.L;
      j["x"] = sim_x;
      j["p_hat"] = est.p_hat;
      j["ci_halfwidth"] = est.ci_halfwidth;
      j["decided_fraction"] = est.decided_fraction;
      j["extinct"] = est.extinct;
      j["z_threshold_hits"] = est.z_threshold_hits;
      j["pop_cap_hits"] = est.pop_cap_hits;
      j["alive_at_horizon"] = est.alive_at_horizon;
      std::cout << j.dump(2) << '\n';

      bbm::EngineOptions opts;
      opts.dt = sim_dt.value_or(bbm::default_dt(p));
      opts.pop_cap = sim_cap;
      if (sim_genealogy) {
        bbm::Rng rng(seed);
        const double x0[] = {sim_x};
        bbm::ParticleSystem sys(p, bbm::BarrierSpec{}, x0, rng);
        bbm::StopRule stop;
        stop.pop_cap = sim_cap;
        bbm::run_until(sys, sim_horizon, stop, rng, opts);
        auto os = open_out(*sim_genealogy);
        bbm::write_genealogy(os, sys);
      }
      if (sim_timeseries) {
        const auto traj = bbm::simulate_functionals(p, sim_x, bbm::BarrierSpec{}, sim_times,
                                                    sim_replicas, seed.with_stream(1ULL << 40), opts);
        auto os = open_out(*sim_timeseries);
        bbm::write_timeseries_csv(os, traj);
      }
      return est.unreliable ? 2 : 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "bbmlab: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
