#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bbm/engine.hpp"
#include "bbm/model.hpp"
#include "bbm/table.hpp"

namespace bbm {

enum class Experiment { Thm1WaveMatch, Thm2Asymptotic, PropIcScaling, CoalescentCompare, SurvivalCurve };

std::string_view to_string(Experiment e);
/// Throws ConfigError on an unknown name.
Experiment experiment_from_string(const std::string& name);

/// Parsed experiment configuration. Model keys: at most one of "epsilon",
/// "epsilons", "N", "Ns" (default: epsilons 1.0, 0.5, 0.3, 0.2); optional "a".
/// Experiment-specific keys fall back to the defaults below when absent.
struct ExperimentConfig {
  Experiment experiment = Experiment::SurvivalCurve;
  std::vector<ModelParams> models;
  SeedSpec seed;
  MonteCarloSettings mc;
  std::string output_dir = "out";

  /// thm1: alpha offsets from L, and the window used for the shift fit.
  std::vector<double> alpha_grid{-8, -3, -2, -1, 0, 1, 2, 3, 8};
  double fit_lo = -3.0;
  double fit_hi = 3.0;
  /// thm2: x as fractions of L.
  std::vector<double> x_fractions{0.3, 0.4, 0.5, 0.6, 0.7};
  /// survival_curve: absolute starting points (x_fractions used when empty).
  std::vector<double> x_values;
  /// prop_ic and coalescent_compare: start at L + alpha; sample at c L^2
  /// unless T is given.
  double c = 1.0;
  double alpha = 1.0;
  std::optional<double> T;
  std::vector<double> lambda_grid{0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0};
  /// coalescent_compare. s_grid and tv_time are genealogical times: model
  /// time before T in units of eps^-3/2, so they lie in [0, T eps^3/2].
  /// Defaults: 11 points on that interval and its midpoint.
  int n = 4;
  std::vector<double> s_grid;
  std::optional<double> tv_time;
  std::size_t reference_samples = 0;

  /// Canonical JSON of the effective configuration (seed included).
  nlohmann::json canonical;
};

/// Parses a configuration. `experiment` overrides the "experiment" key;
/// `seed` overrides "master_seed".
ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                             std::optional<std::string> experiment = std::nullopt,
                                             std::optional<std::uint64_t> seed = std::nullopt);

/// Stream id for grid point g: grid points are 2^32 streams apart so replica
/// streams never overlap.
std::uint64_t grid_stream(const SeedSpec& seed, std::uint64_t g);

std::vector<ResultTable> run_thm1(const ExperimentConfig& cfg);
std::vector<ResultTable> run_thm2(const ExperimentConfig& cfg);
std::vector<ResultTable> run_prop_ic(const ExperimentConfig& cfg);
std::vector<ResultTable> run_coalescent(const ExperimentConfig& cfg);
std::vector<ResultTable> run_survival_curve(const ExperimentConfig& cfg);
std::vector<ResultTable> run_experiment(const ExperimentConfig& cfg);

enum class OutputFormat { Csv, Json };

/// Writes `<dir>/<table.name>.csv` or `.json`, creating dir if needed.
/// Throws std::runtime_error when the file cannot be written.
std::filesystem::path emit_outputs(const ResultTable& table, OutputFormat format,
                                   const std::filesystem::path& dir);

/// Weighted least-squares shift s minimizing sum w (y - f(x + s))^2 over
/// [s_lo, s_hi]. Returns s and the weighted RMS sqrt(sum w r^2 / sum w).
struct ShiftFit {
  double shift = 0.0;
  double weighted_rms = 0.0;
};
ShiftFit fit_shift(const std::vector<double>& x, const std::vector<double>& y,
                   const std::vector<double>& w, const std::function<double(double)>& f,
                   double s_lo = -10.0, double s_hi = 10.0);

/// Variance used for weighting a binomial frequency k/n; never zero.
double binomial_weight_variance(double p_hat, std::size_t n);

}  // namespace bbm
