#pragma once

#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bbm/model.hpp"

namespace bbm {

/// Continuous-state branching process with mechanism
/// psi(u) = a u + 2 pi^2 u log u.
struct CsbpParams {
  double a = 0.0;
  /// Largest root of psi: exp(-a / 2 pi^2).
  double alpha_root = 1.0;

  static CsbpParams from_a(double a);
};

double psi(double u, const CsbpParams& p);

/// u_t(lambda) with du/dt = -psi(u), u_0 = lambda, so that
/// E[exp(-lambda Z_t) | Z_0 = x] = exp(-x u_t(lambda)).
double laplace_flow(double lambda, double t, const CsbpParams& p);

/// P_x(Z_t -> 0) = exp(-x alpha_root).
double extinction_prob(double x, const CsbpParams& p);

/// Z_t is stored as log Z_t: the process goes to 0 or infinity doubly
/// exponentially fast, well outside double range for moderate t.
struct CsbpPath {
  std::vector<double> times;
  std::vector<double> log_values;
  double z0 = 1.0;

  double final_log_value() const { return log_values.back(); }
};

/// Positive strictly stable variate with E exp(-lambda S) = exp(-lambda^beta),
/// 0 < beta < 1, returned as log S (Kanter's representation).
double sample_log_positive_stable(double beta, Rng& rng);

/// Exact transition sampling on the grid `times` (increasing, starting at 0).
/// Over a step s the index is beta = exp(-2 pi^2 s) and
/// Z_{t+s} = (Z_t alpha^{1-beta})^{1/beta} S_beta. Steps so short that
/// beta > 1 - 1e-12 are merged into the next step.
CsbpPath sample_path(double z0, std::span<const double> times, const CsbpParams& p, Rng& rng);

enum class LimitClass { ToZero, ToInfinity, Undecided };

std::string_view to_string(LimitClass c);

LimitClass limit_classifier(const CsbpPath& path, double lo = 1e-6, double hi = 1e6);

/// CSV with header time,value,path_id; value = exp(log value), which may
/// print as 0 or inf.
void write_paths_csv(std::ostream& os, std::span<const CsbpPath> paths);
nlohmann::ordered_json csbp_sidecar(const CsbpParams& p, double z0, std::size_t n_paths);

}  // namespace bbm
