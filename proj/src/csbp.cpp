#include "bbm/csbp.hpp"

#include <cmath>
#include <ostream>

namespace bbm {

namespace {
constexpr double kTwoPiSq = 2.0 * kPi * kPi;
}

CsbpParams CsbpParams::from_a(double a) { return {a, std::exp(-a / kTwoPiSq)}; }

double psi(double u, const CsbpParams& p) { return p.a * u + kTwoPiSq * u * std::log(u); }

double laplace_flow(double lambda, double t, const CsbpParams& p) {
  if (!(lambda > 0.0)) throw DomainError("laplace_flow requires lambda > 0");
  if (t < 0.0) throw DomainError("laplace_flow requires t >= 0");
  // log u relaxes linearly towards -a / 2 pi^2.
  const double c = p.a / kTwoPiSq;
  return std::exp(std::exp(-kTwoPiSq * t) * (std::log(lambda) + c) - c);
}

double extinction_prob(double x, const CsbpParams& p) {
  if (x < 0.0) throw DomainError("extinction_prob requires x >= 0");
  return std::exp(-x * p.alpha_root);
}

double sample_log_positive_stable(double beta, Rng& rng) {
  if (!(beta > 0.0) || !(beta < 1.0)) throw DomainError("stable index must lie in (0, 1)");
  double u;
  do {
    u = kPi * rng.uniform();
  } while (u == 0.0);
  const double e = rng.exponential();
  // S = sin(beta U) / sin(U)^{1/beta} * (sin((1-beta) U) / E)^{(1-beta)/beta}
  return std::log(std::sin(beta * u)) - std::log(std::sin(u)) / beta +
         (1.0 - beta) / beta * (std::log(std::sin((1.0 - beta) * u)) - std::log(e));
}

CsbpPath sample_path(double z0, std::span<const double> times, const CsbpParams& p, Rng& rng) {
  if (!(z0 > 0.0)) throw DomainError("sample_path requires z0 > 0");
  if (times.empty() || times.front() != 0.0) throw DomainError("time grid must start at 0");
  CsbpPath path;
  path.z0 = z0;
  path.times.push_back(0.0);
  path.log_values.push_back(std::log(z0));
  const double log_alpha = std::log(p.alpha_root);
  double last_t = 0.0;
  double log_z = std::log(z0);
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) throw DomainError("time grid must be increasing");
    const double s = times[k] - last_t;
    const double beta = std::exp(-kTwoPiSq * s);
    if (beta > 1.0 - 1e-12) {
      if (k + 1 < times.size()) continue;
      // Degenerate final step: Z does not move at this resolution.
    } else {
      log_z = (log_z + (1.0 - beta) * log_alpha) / beta + sample_log_positive_stable(beta, rng);
    }
    last_t = times[k];
    path.times.push_back(times[k]);
    path.log_values.push_back(log_z);
  }
  return path;
}

std::string_view to_string(LimitClass c) {
  switch (c) {
    case LimitClass::ToZero: return "to_zero";
    case LimitClass::ToInfinity: return "to_infinity";
    case LimitClass::Undecided: return "undecided";
  }
  return "unknown";
}

LimitClass limit_classifier(const CsbpPath& path, double lo, double hi) {
  if (!(lo < hi) || !(lo > 0.0)) throw DomainError("limit_classifier requires 0 < lo < hi");
  const double v = path.final_log_value();
  if (v < std::log(lo)) return LimitClass::ToZero;
  if (v > std::log(hi)) return LimitClass::ToInfinity;
  return LimitClass::Undecided;
}

void write_paths_csv(std::ostream& os, std::span<const CsbpPath> paths) {
  os << "time,value,path_id\n";
  os.precision(17);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto& p = paths[i];
    for (std::size_t k = 0; k < p.times.size(); ++k) {
      os << p.times[k] << ',' << std::exp(p.log_values[k]) << ',' << i << '\n';
    }
  }
}

nlohmann::ordered_json csbp_sidecar(const CsbpParams& p, double z0, std::size_t n_paths) {
  nlohmann::ordered_json j;
  j["mechanism"] = "a*u + 2*pi^2*u*log(u)";
  j["a"] = p.a;
  j["alpha_root"] = p.alpha_root;
  j["z0"] = z0;
  j["paths"] = n_paths;
  return j;
}

}  // namespace bbm
