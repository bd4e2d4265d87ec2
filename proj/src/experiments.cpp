#include "bbm/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <boost/math/tools/minima.hpp>

#include "bbm/coalescent.hpp"
#include "bbm/functionals.hpp"
#include "bbm/stats.hpp"
#include "bbm/wave.hpp"

namespace bbm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ExperimentName {
  Experiment e;
  std::string_view name;
};

constexpr ExperimentName kNames[] = {
    {Experiment::Thm1WaveMatch, "thm1_wave_match"},
    {Experiment::Thm2Asymptotic, "thm2_asymptotic"},
    {Experiment::PropIcScaling, "prop_ic_scaling"},
    {Experiment::CoalescentCompare, "coalescent_compare"},
    {Experiment::SurvivalCurve, "survival_curve"},
};

const std::set<std::string> kKnownKeys = {
    "experiment", "epsilon",  "epsilons",    "N",     "Ns",     "a",      "master_seed",
    "stream_id",  "mc",       "output_dir",  "alpha_grid", "fit_window", "x_fractions",
    "x_values",   "c",        "alpha",       "T",     "lambda_grid", "n", "s_grid",
    "tv_time",    "reference_samples"};

const std::set<std::string> kKnownMcKeys = {"replicas", "horizon", "dt", "pop_cap", "z_threshold",
                                            "decided_floor"};

nlohmann::ordered_json num_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

std::vector<double> double_list(const nlohmann::json& j, const char* key) {
  if (!j.is_array()) throw ConfigError(std::string(key) + " must be an array");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw ConfigError(std::string(key) + " must contain numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

double positive(const nlohmann::json& j, const char* key) {
  if (!j.is_number() || !(j.get<double>() > 0.0)) {
    throw ConfigError(std::string(key) + " must be a positive number");
  }
  return j.get<double>();
}

std::int64_t integer_N(const nlohmann::json& v) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>()) {
    return static_cast<std::int64_t>(v.get<double>());
  }
  throw ConfigError("N must be an integer");
}

Provenance provenance_of(const ExperimentConfig& cfg) {
  return {std::string(to_string(cfg.experiment)), fnv1a_hex(cfg.canonical.dump()),
          cfg.seed.master_seed, code_version()};
}

ResultTable make_table(const ExperimentConfig& cfg, std::string name, std::vector<Column> cols) {
  ResultTable t;
  t.name = std::move(name);
  t.provenance = provenance_of(cfg);
  t.columns = std::move(cols);
  return t;
}

std::int64_t as_i64(std::uint64_t v) { return static_cast<std::int64_t>(v); }

const WaveSolution& theta_wave() {
  static const WaveSolution theta = solve_traveling_wave();
  return theta;
}

}  // namespace

std::string_view to_string(Experiment e) {
  for (const auto& n : kNames) {
    if (n.e == e) return n.name;
  }
  return "unknown";
}

Experiment experiment_from_string(const std::string& name) {
  for (const auto& n : kNames) {
    if (n.name == name) return n.e;
  }
  throw ConfigError("unknown experiment '" + name + "'");
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                             std::optional<std::string> experiment,
                                             std::optional<std::uint64_t> seed) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kKnownKeys.contains(key)) throw ConfigError("unknown configuration key '" + key + "'");
  }
  ExperimentConfig cfg;
  cfg.canonical = j;

  if (experiment) {
    cfg.canonical["experiment"] = *experiment;
  } else if (!j.contains("experiment")) {
    throw ConfigError("configuration names no experiment");
  }
  cfg.experiment = experiment_from_string(cfg.canonical.at("experiment").get<std::string>());

  const double a = j.value("a", 0.0);
  int sources = 0;
  for (const char* k : {"epsilon", "epsilons", "N", "Ns"}) sources += j.contains(k) ? 1 : 0;
  if (sources > 1) throw ConfigError("at most one of epsilon, epsilons, N, Ns may be given");
  if (sources == 0) {
    const std::vector<double> desk{1.0, 0.5, 0.3, 0.2};
    for (double e : desk) cfg.models.push_back(params_from_epsilon(e, a));
    cfg.canonical["epsilons"] = desk;
  } else if (j.contains("epsilon")) {
    cfg.models.push_back(params_from_epsilon(j.at("epsilon").get<double>(), a));
  } else if (j.contains("epsilons")) {
    for (double e : double_list(j.at("epsilons"), "epsilons")) {
      cfg.models.push_back(params_from_epsilon(e, a));
    }
  } else if (j.contains("N")) {
    cfg.models.push_back(params_from_N(integer_N(j.at("N")), a));
  } else {
    for (const auto& v : j.at("Ns")) cfg.models.push_back(params_from_N(integer_N(v), a));
  }
  if (cfg.models.empty()) throw ConfigError("model list is empty");

  if (seed) cfg.canonical["master_seed"] = *seed;
  cfg.seed.master_seed = cfg.canonical.value("master_seed", std::uint64_t{0});
  cfg.seed.stream_id = j.value("stream_id", std::uint64_t{0});

  if (j.contains("mc")) {
    const auto& mc = j.at("mc");
    if (!mc.is_object()) throw ConfigError("mc must be an object");
    for (const auto& [key, value] : mc.items()) {
      if (!kKnownMcKeys.contains(key)) throw ConfigError("unknown mc key '" + key + "'");
    }
    if (mc.contains("replicas")) {
      const auto r = mc.at("replicas").get<std::int64_t>();
      if (r < 1) throw ConfigError("mc.replicas must be >= 1");
      cfg.mc.replicas = static_cast<std::size_t>(r);
    }
    if (mc.contains("horizon")) cfg.mc.horizon = positive(mc.at("horizon"), "mc.horizon");
    if (mc.contains("dt")) cfg.mc.dt = positive(mc.at("dt"), "mc.dt");
    if (mc.contains("pop_cap")) {
      const auto c = mc.at("pop_cap").get<std::int64_t>();
      if (c < 1) throw ConfigError("mc.pop_cap must be >= 1");
      cfg.mc.pop_cap = static_cast<std::size_t>(c);
    }
    if (mc.contains("z_threshold")) cfg.mc.z_threshold = positive(mc.at("z_threshold"), "mc.z_threshold");
    if (mc.contains("decided_floor")) cfg.mc.decided_floor = mc.at("decided_floor").get<double>();
  }

  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  if (j.contains("alpha_grid")) cfg.alpha_grid = double_list(j.at("alpha_grid"), "alpha_grid");
  if (j.contains("fit_window")) {
    const auto w = double_list(j.at("fit_window"), "fit_window");
    if (w.size() != 2 || !(w[0] < w[1])) throw ConfigError("fit_window must be [lo, hi] with lo < hi");
    cfg.fit_lo = w[0];
    cfg.fit_hi = w[1];
  }
  if (j.contains("x_fractions")) cfg.x_fractions = double_list(j.at("x_fractions"), "x_fractions");
  for (double f : cfg.x_fractions) {
    if (!(f > 0.0) || !(f < 1.0)) throw ConfigError("x_fractions must lie in (0, 1)");
  }
  if (j.contains("x_values")) cfg.x_values = double_list(j.at("x_values"), "x_values");
  for (double x : cfg.x_values) {
    if (!(x > 0.0)) throw ConfigError("x_values must be positive");
  }
  if (j.contains("c")) cfg.c = positive(j.at("c"), "c");
  cfg.alpha = j.value("alpha", cfg.alpha);
  if (j.contains("T")) cfg.T = positive(j.at("T"), "T");
  if (j.contains("lambda_grid")) cfg.lambda_grid = double_list(j.at("lambda_grid"), "lambda_grid");
  for (std::size_t i = 0; i < cfg.lambda_grid.size(); ++i) {
    if (!(cfg.lambda_grid[i] > 0.0) || (i > 0 && !(cfg.lambda_grid[i] > cfg.lambda_grid[i - 1]))) {
      throw ConfigError("lambda_grid must be positive and increasing");
    }
  }
  if (j.contains("n")) cfg.n = j.at("n").get<int>();
  if (cfg.n < 2 || cfg.n > 8) throw ConfigError("n must satisfy 2 <= n <= 8");
  if (j.contains("s_grid")) cfg.s_grid = double_list(j.at("s_grid"), "s_grid");
  if (j.contains("tv_time")) cfg.tv_time = positive(j.at("tv_time"), "tv_time");
  if (j.contains("reference_samples")) {
    const auto r = j.at("reference_samples").get<std::int64_t>();
    if (r < 1) throw ConfigError("reference_samples must be >= 1");
    cfg.reference_samples = static_cast<std::size_t>(r);
  }
  return cfg;
}

std::uint64_t grid_stream(const SeedSpec& seed, std::uint64_t g) { return seed.stream_id + (g << 32); }

double binomial_weight_variance(double p_hat, std::size_t n) {
  const double nn = static_cast<double>(n);
  const double p = (p_hat * nn + 0.5) / (nn + 1.0);
  return p * (1.0 - p) / nn;
}

ShiftFit fit_shift(const std::vector<double>& x, const std::vector<double>& y,
                   const std::vector<double>& w, const std::function<double(double)>& f,
                   double s_lo, double s_hi) {
  if (x.empty() || x.size() != y.size() || x.size() != w.size()) {
    throw DomainError("fit_shift needs matching, nonempty x, y, w");
  }
  auto loss = [&](double s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - f(x[i] + s);
      acc += w[i] * r * r;
    }
    return acc;
  };
  // Coarse scan first: the loss is flat far from the data.
  constexpr int kScan = 400;
  const double step = (s_hi - s_lo) / kScan;
  int best = 0;
  double best_loss = loss(s_lo);
  for (int i = 1; i <= kScan; ++i) {
    const double l = loss(s_lo + i * step);
    if (l < best_loss) {
      best_loss = l;
      best = i;
    }
  }
  const double lo = std::max(s_lo, s_lo + (best - 1) * step);
  const double hi = std::min(s_hi, s_lo + (best + 1) * step);
  const auto [s, l] = boost::math::tools::brent_find_minima(loss, lo, hi, 52);
  double wsum = 0.0;
  for (double wi : w) wsum += wi;
  return {s, std::sqrt(l / wsum)};
}

std::vector<ResultTable> run_thm1(const ExperimentConfig& cfg) {
  const WaveSolution& theta = theta_wave();
  auto t = make_table(cfg, "thm1_wave_match",
                      {{"epsilon", "1"},
                       {"L", "space"},
                       {"alpha", "space"},
                       {"x", "space"},
                       {"q_hat", "probability"},
                       {"ci_halfwidth", "probability"},
                       {"decided_fraction", "1"},
                       {"theta_fit", "probability"},
                       {"in_fit", "bool"},
                       {"stream_id", "index"},
                       {"flagged", "bool"}});
  auto fits = nlohmann::ordered_json::array();
  std::uint64_t g = 0;
  for (const auto& p : cfg.models) {
    struct Point {
      double alpha, x, q, ci, decided;
      std::uint64_t stream;
      bool flagged, in_fit;
    };
    std::vector<Point> pts;
    for (double alpha : cfg.alpha_grid) {
      Point pt{alpha, p.L + alpha, 0.0, 0.0, 1.0, grid_stream(cfg.seed, g++), false, false};
      if (pt.x > 0.0) {
        const auto est = estimate_survival(pt.x, p, cfg.mc, cfg.seed.with_stream(pt.stream));
        pt.q = est.p_hat;
        pt.ci = est.ci_halfwidth;
        pt.decided = est.decided_fraction;
        pt.flagged = est.unreliable;
      }
      pt.in_fit = alpha >= cfg.fit_lo && alpha <= cfg.fit_hi && pt.x > 0.0 && !pt.flagged;
      pts.push_back(pt);
    }
    std::vector<double> xs, ys, ws;
    for (const auto& pt : pts) {
      if (!pt.in_fit) continue;
      xs.push_back(pt.alpha);
      ys.push_back(pt.q);
      ws.push_back(1.0 / binomial_weight_variance(pt.q, cfg.mc.replicas));
    }
    std::optional<ShiftFit> fit;
    if (!xs.empty()) fit = fit_shift(xs, ys, ws, [&](double a) { return theta(a); });
    bool monotone = true;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (pts[i].alpha > pts[i - 1].alpha && pts[i].q + pts[i].ci + pts[i - 1].ci < pts[i - 1].q) {
        monotone = false;
      }
    }
    for (const auto& pt : pts) {
      t.add_row({p.epsilon, p.L, pt.alpha, pt.x, pt.q, pt.ci, pt.decided,
                 fit ? theta(pt.alpha + fit->shift) : kNaN, std::int64_t{pt.in_fit},
                 as_i64(pt.stream), std::int64_t{pt.flagged}});
    }
    fits.push_back({{"epsilon", p.epsilon},
                    {"shift", fit ? num_or_null(fit->shift) : nullptr},
                    {"weighted_rms", fit ? num_or_null(fit->weighted_rms) : nullptr},
                    {"fit_points", xs.size()},
                    {"q_monotone_in_alpha", monotone}});
  }
  t.summary["replicas"] = cfg.mc.replicas;
  t.summary["fits"] = fits;
  return {t};
}

std::vector<ResultTable> run_thm2(const ExperimentConfig& cfg) {
  auto t = make_table(cfg, "thm2_asymptotic",
                      {{"epsilon", "1"},
                       {"L", "space"},
                       {"x_fraction", "1"},
                       {"x", "space"},
                       {"q_hat", "probability"},
                       {"ci_halfwidth", "probability"},
                       {"shape", "1"},
                       {"ratio", "1"},
                       {"ratio_ci_halfwidth", "1"},
                       {"decided_fraction", "1"},
                       {"stream_id", "index"},
                       {"flagged", "bool"}});
  auto per_eps = nlohmann::ordered_json::array();
  std::uint64_t g = 0;
  auto shape = [](const ModelParams& p, double x) {
    return p.L * std::exp(-p.mu * (p.L - x)) * std::sin(kPi * x / p.L);
  };
  for (const auto& p : cfg.models) {
    double rmax = -std::numeric_limits<double>::infinity();
    double rmin = std::numeric_limits<double>::infinity();
    double sym_defect = 0.0;
    std::size_t usable = 0;
    for (double f : cfg.x_fractions) {
      const double x = f * p.L;
      const std::uint64_t stream = grid_stream(cfg.seed, g++);
      const auto est = estimate_survival(x, p, cfg.mc, cfg.seed.with_stream(stream));
      const double sh = shape(p, x);
      const bool flagged = est.p_hat == 0.0 || est.unreliable;
      const double ratio = est.p_hat > 0.0 ? est.p_hat / sh : kNaN;
      const double ratio_ci = est.p_hat > 0.0 ? est.ci_halfwidth / sh : kNaN;
      if (!flagged) {
        rmax = std::max(rmax, ratio);
        rmin = std::min(rmin, ratio);
        ++usable;
      }
      const double sym = sh / shape(p, p.L - x) / std::exp(-p.mu * (p.L - 2.0 * x));
      sym_defect = std::max(sym_defect, std::abs(sym - 1.0));
      t.add_row({p.epsilon, p.L, f, x, est.p_hat, est.ci_halfwidth, sh, ratio, ratio_ci,
                 est.decided_fraction, as_i64(stream), std::int64_t{flagged}});
    }
    per_eps.push_back({{"epsilon", p.epsilon},
                       {"ratio_max", usable ? num_or_null(rmax) : nullptr},
                       {"ratio_min", usable ? num_or_null(rmin) : nullptr},
                       {"ratio_spread", usable >= 2 ? num_or_null(rmax / rmin) : nullptr},
                       {"shape_symmetry_defect", sym_defect}});
  }
  t.summary["replicas"] = cfg.mc.replicas;
  t.summary["per_epsilon"] = per_eps;
  return {t};
}

std::vector<ResultTable> run_prop_ic(const ExperimentConfig& cfg) {
  const WaveSolution& theta = theta_wave();
  auto reps = make_table(cfg, "prop_ic_replicas",
                         {{"epsilon", "1"},
                          {"replica", "index"},
                          {"stream_id", "index"},
                          {"outcome", "label"},
                          {"z_hat", "1"},
                          {"y_hat", "1"},
                          {"flagged", "bool"}});
  auto quant = make_table(cfg, "prop_ic_quantiles",
                          {{"epsilon", "1"}, {"statistic", "label"}, {"q", "1"}, {"value", "1"}});
  auto lap = make_table(cfg, "prop_ic_laplace",
                        {{"epsilon", "1"},
                         {"lambda", "1"},
                         {"laplace_empirical", "1"},
                         {"laplace_std_error", "1"},
                         {"psi_fit", "1"}});
  constexpr double kQs[] = {0.1, 0.25, 0.5, 0.75, 0.9};
  auto per_eps = nlohmann::ordered_json::array();
  const double w_scale = 2.0 * kPi * kPi * std::exp(kSqrt2 * cfg.alpha);

  for (std::size_t mi = 0; mi < cfg.models.size(); ++mi) {
    const auto& p = cfg.models[mi];
    const double T = cfg.T.value_or(cfg.c * p.L * p.L);
    const double x0 = p.L + cfg.alpha;
    if (!(x0 > 0.0)) throw ConfigError("L + alpha must be positive");
    const double y_norm = std::exp(kSqrt2 * kPi / std::sqrt(p.epsilon));
    const double z_norm = std::sqrt(p.epsilon) * y_norm;
    const std::uint64_t base = grid_stream(cfg.seed, mi);
    EngineOptions opts;
    opts.dt = cfg.mc.dt.value_or(default_dt(p));
    StopRule stop;
    stop.pop_cap = cfg.mc.pop_cap;

    std::vector<Outcome::Kind> kinds(cfg.mc.replicas);
    std::vector<double> z(cfg.mc.replicas), y(cfg.mc.replicas);
    parallel_for(cfg.mc.replicas, [&](std::size_t r) {
      Rng rng(cfg.seed.with_stream(base + r));
      const double xs[] = {x0};
      ParticleSystem sys(p, BarrierSpec{}, xs, rng);
      const Outcome out = run_until(sys, T, stop, rng, opts);
      kinds[r] = out.kind;
      if (out.kind == Outcome::Kind::PopulationCap) {
        z[r] = y[r] = kNaN;
      } else {
        z[r] = compute_Z(sys.positions(), p) / z_norm;
        y[r] = compute_Y(sys.positions(), p) / y_norm;
      }
    });

    std::vector<double> zs, ys;
    for (std::size_t r = 0; r < cfg.mc.replicas; ++r) {
      const bool flagged = kinds[r] == Outcome::Kind::PopulationCap;
      reps.add_row({p.epsilon, static_cast<std::int64_t>(r), as_i64(base + r),
                    std::string(to_string(kinds[r])), z[r], y[r], std::int64_t{flagged}});
      if (!flagged) {
        zs.push_back(z[r]);
        ys.push_back(y[r]);
      }
    }

    auto entry = nlohmann::ordered_json::object();
    entry["epsilon"] = p.epsilon;
    entry["t"] = T;
    entry["usable_replicas"] = zs.size();
    if (zs.empty()) {
      entry["z_hat_median"] = nullptr;
      entry["y_hat_median"] = nullptr;
      per_eps.push_back(entry);
      continue;
    }
    for (double q : kQs) {
      quant.add_row({p.epsilon, std::string("z_hat"), q, quantile(zs, q)});
    }
    for (double q : kQs) {
      quant.add_row({p.epsilon, std::string("y_hat"), q, quantile(ys, q)});
    }
    entry["z_hat_median"] = quantile(zs, 0.5);
    entry["y_hat_median"] = quantile(ys, 0.5);

    std::vector<double> lam, emp, se, wts;
    for (double l : cfg.lambda_grid) {
      std::vector<double> e;
      e.reserve(zs.size());
      for (double v : zs) e.push_back(std::exp(-l * v / w_scale));
      const auto m = mean_stat(e);
      lam.push_back(l);
      emp.push_back(m.mean);
      se.push_back(m.std_error);
      wts.push_back(1.0 / std::max(m.std_error * m.std_error, 1e-12));
    }
    std::vector<double> u;
    for (double l : lam) u.push_back(std::log(l) / kSqrt2);
    const auto fit = fit_shift(u, emp, wts, [&](double v) { return 1.0 - theta(v); });
    bool decreasing = true, convex = true;
    for (std::size_t i = 1; i < lam.size(); ++i) {
      if (emp[i] > emp[i - 1] + 1e-12) decreasing = false;
      if (i + 1 < lam.size()) {
        const double s0 = (emp[i] - emp[i - 1]) / (lam[i] - lam[i - 1]);
        const double s1 = (emp[i + 1] - emp[i]) / (lam[i + 1] - lam[i]);
        if (s1 < s0 - 1e-12) convex = false;
      }
    }
    for (std::size_t i = 0; i < lam.size(); ++i) {
      lap.add_row({p.epsilon, lam[i], emp[i], se[i], 1.0 - theta(u[i] + fit.shift)});
    }
    entry["laplace_shift"] = num_or_null(fit.shift);
    entry["laplace_weighted_rms"] = num_or_null(fit.weighted_rms);
    entry["laplace_decreasing"] = decreasing;
    entry["laplace_convex"] = convex;
    per_eps.push_back(entry);
  }

  bool y_decreasing = true;
  auto z_ratios = nlohmann::ordered_json::array();
  for (std::size_t i = 1; i < per_eps.size(); ++i) {
    const auto& a = per_eps[i - 1];
    const auto& b = per_eps[i];
    if (a["y_hat_median"].is_null() || b["y_hat_median"].is_null()) {
      y_decreasing = false;
      z_ratios.push_back(nullptr);
      continue;
    }
    if (b["epsilon"].get<double>() < a["epsilon"].get<double>() &&
        !(b["y_hat_median"].get<double>() < a["y_hat_median"].get<double>())) {
      y_decreasing = false;
    }
    const double za = a["z_hat_median"].get<double>();
    z_ratios.push_back(za > 0.0 ? num_or_null(b["z_hat_median"].get<double>() / za) : nullptr);
  }
  reps.summary["replicas"] = cfg.mc.replicas;
  quant.summary["per_epsilon"] = per_eps;
  quant.summary["y_hat_median_decreasing"] = y_decreasing;
  quant.summary["z_hat_median_ratios"] = z_ratios;
  lap.summary["w_scale"] = w_scale;
  return {reps, quant, lap};
}

std::vector<ResultTable> run_coalescent(const ExperimentConfig& cfg) {
  auto reps = make_table(cfg, "coalescent_replicas",
                         {{"epsilon", "1"},
                          {"replica", "index"},
                          {"stream_id", "index"},
                          {"status", "label"},
                          {"alive_at_T", "count"},
                          {"first_merge_time", "eps^-3/2 time"},
                          {"singletons_at_0", "bool"},
                          {"one_block_at_T", "bool"},
                          {"monotone", "bool"}});
  auto blocks = make_table(cfg, "coalescent_blocks",
                           {{"epsilon", "1"},
                            {"s", "eps^-3/2 time"},
                            {"mean_blocks_empirical", "count"},
                            {"mean_blocks_reference", "count"}});
  const int n = cfg.n;
  const double rescale = default_time_rescale();
  const std::size_t n_ref = cfg.reference_samples ? cfg.reference_samples : cfg.mc.replicas;
  auto per_eps = nlohmann::ordered_json::array();

  for (std::size_t mi = 0; mi < cfg.models.size(); ++mi) {
    const auto& p = cfg.models[mi];
    const double T = cfg.T.value_or(cfg.c * p.L * p.L);
    const double x0 = p.L + cfg.alpha;
    if (!(x0 > 0.0)) throw ConfigError("L + alpha must be positive");
    // Genealogical time s counts model time in units of eps^-3/2.
    const double clock = std::pow(p.epsilon, 1.5);
    const double s_max = T * clock;
    std::vector<double> s_grid = cfg.s_grid;
    if (s_grid.empty()) {
      for (int i = 0; i <= 10; ++i) s_grid.push_back(s_max * i / 10.0);
    }
    for (double s : s_grid) {
      if (s < 0.0 || s > s_max) throw ConfigError("s_grid must lie in [0, T eps^3/2]");
    }
    const double tv_time = cfg.tv_time.value_or(s_max / 2.0);
    const std::uint64_t base = grid_stream(cfg.seed, mi);
    const std::uint64_t ref_base = grid_stream(cfg.seed, cfg.models.size() + mi);
    EngineOptions opts;
    opts.dt = cfg.mc.dt.value_or(default_dt(p));
    StopRule stop;
    stop.pop_cap = cfg.mc.pop_cap;

    struct Rep {
      std::string status;
      std::int64_t alive = 0;
      std::optional<PartitionProcess> proc;
      bool singletons = false, one_block = false, monotone = false;
    };
    std::vector<Rep> out(cfg.mc.replicas);
    parallel_for(cfg.mc.replicas, [&](std::size_t r) {
      Rng rng(cfg.seed.with_stream(base + r));
      const double xs[] = {x0};
      ParticleSystem sys(p, BarrierSpec{}, xs, rng);
      const Outcome o = run_until(sys, T, stop, rng, opts);
      Rep& rep = out[r];
      rep.alive = static_cast<std::int64_t>(sys.size());
      if (o.kind == Outcome::Kind::PopulationCap) {
        rep.status = "pop_cap";
        return;
      }
      if (sys.size() < static_cast<std::size_t>(n)) {
        rep.status = sys.extinct() ? "extinct" : "too_few";
        return;
      }
      rep.status = "ok";
      auto ids = sys.alive_ids();
      for (int i = 0; i < n; ++i) {
        const auto remaining = ids.size() - static_cast<std::size_t>(i);
        auto j = static_cast<std::size_t>(i) + static_cast<std::size_t>(rng.uniform() * static_cast<double>(remaining));
        std::swap(ids[static_cast<std::size_t>(i)], ids[std::min(j, ids.size() - 1)]);
      }
      ids.resize(static_cast<std::size_t>(n));
      const double t_end = sys.time();
      rep.proc = empirical_partition_process(sys.genealogy(), ids, t_end, clock);
      rep.singletons = extract_partition(sys.genealogy(), ids, t_end, 0.0).block_count() == n;
      rep.one_block = extract_partition(sys.genealogy(), ids, t_end, t_end).block_count() == 1;
      rep.monotone = true;
      Partition prev = Partition::singletons(n);
      for (double s : s_grid) {
        const Partition cur = extract_partition(sys.genealogy(), ids, t_end, std::min(s / clock, t_end));
        if (!prev.refines(cur)) rep.monotone = false;
        prev = cur;
      }
    });

    std::vector<PartitionProcess> emp;
    std::size_t dropped = 0;
    bool all_singletons = true, all_one_block = true, all_monotone = true;
    for (std::size_t r = 0; r < out.size(); ++r) {
      const Rep& rep = out[r];
      const bool ok = rep.proc.has_value();
      if (ok) {
        emp.push_back(*rep.proc);
        all_singletons = all_singletons && rep.singletons;
        all_one_block = all_one_block && rep.one_block;
        all_monotone = all_monotone && rep.monotone;
      } else {
        ++dropped;
      }
      reps.add_row({p.epsilon, static_cast<std::int64_t>(r), as_i64(base + r), rep.status, rep.alive,
                    ok ? rep.proc->first_merge_time() : kNaN, std::int64_t{ok && rep.singletons},
                    std::int64_t{ok && rep.one_block}, std::int64_t{ok && rep.monotone}});
    }

    auto entry = nlohmann::ordered_json::object();
    entry["epsilon"] = p.epsilon;
    entry["T"] = T;
    entry["s_max"] = s_max;
    entry["n"] = n;
    entry["replicas"] = cfg.mc.replicas;
    entry["dropped"] = dropped;
    entry["drop_rate"] = static_cast<double>(dropped) / static_cast<double>(cfg.mc.replicas);
    entry["all_singletons_at_0"] = all_singletons;
    entry["all_one_block_at_T"] = all_one_block;
    entry["all_monotone"] = all_monotone;
    entry["time_rescale"] = rescale;
    if (emp.empty()) {
      entry["comparison"] = nullptr;
      per_eps.push_back(entry);
      continue;
    }
    std::vector<PartitionProcess> ref(n_ref);
    parallel_for(n_ref, [&](std::size_t r) {
      Rng rng(cfg.seed.with_stream(ref_base + r));
      ref[r] = bs_sample(n, std::numeric_limits<double>::infinity(), rng);
    });
    const auto rep = compare_coalescents(emp, ref, n, rescale, s_grid, tv_time);
    for (const auto& pt : rep.block_counts) {
      blocks.add_row({p.epsilon, pt.s, pt.mean_empirical, pt.mean_reference});
    }
    entry["comparison"] = {{"reference_samples", n_ref},
                           {"first_merge_ks_statistic", rep.first_merge_ks.statistic},
                           {"first_merge_ks_p_value", rep.first_merge_ks.p_value},
                           {"tv_time", tv_time},
                           {"tv_distance", rep.tv_distance ? num_or_null(*rep.tv_distance) : nullptr},
                           {"tv_noise", rep.tv_noise ? num_or_null(*rep.tv_noise) : nullptr}};
    per_eps.push_back(entry);
  }
  reps.summary["per_epsilon"] = per_eps;
  return {reps, blocks};
}

std::vector<ResultTable> run_survival_curve(const ExperimentConfig& cfg) {
  auto t = make_table(cfg, "survival_curve",
                      {{"epsilon", "1"},
                       {"x", "space"},
                       {"q_hat", "probability"},
                       {"ci_halfwidth", "probability"},
                       {"q_bvp", "probability"},
                       {"z_score", "1"},
                       {"decided_fraction", "1"},
                       {"stream_id", "index"},
                       {"flagged", "bool"}});
  std::uint64_t g = 0;
  for (const auto& p : cfg.models) {
    std::vector<double> xs = cfg.x_values;
    if (xs.empty()) {
      for (double f : cfg.x_fractions) xs.push_back(f * p.L);
    }
    const double x_max = *std::max_element(xs.begin(), xs.end());
    const auto q = solve_kolmogorov_bvp(p.mu, std::max(min_kolmogorov_domain(p.mu), x_max + 20.0));
    for (double x : xs) {
      const std::uint64_t stream = grid_stream(cfg.seed, g++);
      const auto est = estimate_survival(x, p, cfg.mc, cfg.seed.with_stream(stream));
      const double qb = q(x);
      const double sd = std::sqrt(binomial_weight_variance(est.p_hat, est.replicas));
      t.add_row({p.epsilon, x, est.p_hat, est.ci_halfwidth, qb, (est.p_hat - qb) / sd,
                 est.decided_fraction, as_i64(stream), std::int64_t{est.unreliable}});
    }
  }
  t.summary["replicas"] = cfg.mc.replicas;
  return {t};
}

std::vector<ResultTable> run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case Experiment::Thm1WaveMatch: return run_thm1(cfg);
    case Experiment::Thm2Asymptotic: return run_thm2(cfg);
    case Experiment::PropIcScaling: return run_prop_ic(cfg);
    case Experiment::CoalescentCompare: return run_coalescent(cfg);
    case Experiment::SurvivalCurve: return run_survival_curve(cfg);
  }
  throw ConfigError("unknown experiment");
}

std::filesystem::path emit_outputs(const ResultTable& table, OutputFormat format,
                                   const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  const auto path = dir / (table.name + (format == OutputFormat::Csv ? ".csv" : ".json"));
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if (format == OutputFormat::Csv) {
    write_csv(os, table);
  } else {
    os << table_to_json(table).dump(2) << '\n';
  }
  os.flush();
  if (!os) throw std::runtime_error("write to " + path.string() + " failed");
  return path;
}

}  // namespace bbm
