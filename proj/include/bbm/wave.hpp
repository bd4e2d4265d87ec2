#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bbm/model.hpp"

namespace bbm {

enum class WaveKind { ThetaWave, QBvp };
enum class TailSide { LeftOfTheta, RightOfQ };
enum class TailModel { PureExp, AlphaTimesExp };

std::string_view to_string(WaveKind k);
std::string_view to_string(TailModel m);

struct TailFit {
  double rate = 0.0;
  TailModel model = TailModel::PureExp;
  /// exp(intercept) of the fitted log-linear model.
  double prefactor = 0.0;
  /// RMS fit residual relative to the spread of the fitted log values.
  double goodness = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
};

/// A discretized monotone solution on a uniform grid.
struct WaveSolution {
  std::vector<double> grid;
  std::vector<double> values;
  WaveKind kind = WaveKind::ThetaWave;
  /// Drift coefficient of the first-derivative term (sqrt 2 for theta).
  double drift = 0.0;
  /// Translation anchor: values(anchor_position) == anchor_value. For the
  /// Q problem this is the Dirichlet condition Q(0) = 0.
  double anchor_position = 0.0;
  double anchor_value = 0.0;
  double residual = 0.0;
  int newton_iterations = 0;
  std::optional<TailFit> tail_fit;

  double step() const { return grid[1] - grid[0]; }
  /// Linear interpolation, clamped to the end values outside the grid.
  double operator()(double x) const;
};

struct GridSpec {
  double lo = -20.0;
  double hi = 20.0;
  std::size_t intervals = 4096;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// Solves 1/2 theta'' = sqrt(2) theta' - theta (1 - theta) with theta -> 0 on
/// the left and theta -> 1 on the right, pinned by theta(anchor) = 1/2.
/// Damped Newton on second-order central differences; the right end uses the
/// Robin condition theta' = (2 - sqrt 2)(1 - theta) from the linearized decay
/// of 1 - theta. The left end is left free: both linear modes at 0 decay to
/// the left, so the anchor fixes the solution.
WaveSolution solve_traveling_wave(const GridSpec& grid = {}, double tol = 1e-10,
                                  double anchor = 0.0);

/// Solves 1/2 Q'' = mu Q' - Q (1 - Q) on [0, domain_max] with Q(0) = 0 and the
/// Robin condition Q' = (sqrt(mu^2 + 2) - mu)(1 - Q) at domain_max.
WaveSolution solve_kolmogorov_bvp(double mu, double domain_max, double tol = 1e-10,
                                  std::size_t intervals = 4096);

/// Smallest domain_max accepted by solve_kolmogorov_bvp.
double min_kolmogorov_domain(double mu);

/// Max-norm of the discrete residual 1/2 u'' - c u' + s u (1 - u) over the
/// interior nodes, with central differences.
double discrete_residual(std::span<const double> values, double h, double drift,
                         double reaction_sign);

/// Least-squares fit of log(value) (left_of_theta) or log(1 - value)
/// (right_of_Q) on grid points in [lo, hi]. The alpha_times_exp model
/// first divides out |x|. Needs at least 20 points in the window.
TailFit tail_fit(const WaveSolution& solution, TailSide side, double lo, double hi,
                 TailModel model = TailModel::PureExp);

/// Diagnostic shooting solver for the Q problem: bisects the initial slope
/// Q'(0) so the RK4 trajectory neither exceeds 1 nor turns back down before
/// x_max. Returns the slope and the trajectory on `intervals` uniform steps.
struct ShootingResult {
  double slope = 0.0;
  std::vector<double> grid;
  std::vector<double> values;
};
ShootingResult shoot_kolmogorov(double mu, double x_max, std::size_t intervals = 4000);

/// Two-column CSV (grid,value).
void write_wave_csv(std::ostream& os, const WaveSolution& s);
/// Sidecar with kind, normalization, tail_fit and residual.
nlohmann::ordered_json wave_sidecar(const WaveSolution& s);

}  // namespace bbm
