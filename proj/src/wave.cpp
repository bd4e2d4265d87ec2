#include "bbm/wave.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "bbm/model.hpp"

namespace bbm {

std::string_view to_string(WaveKind k) {
  return k == WaveKind::ThetaWave ? "theta_wave" : "Q_bvp";
}

std::string_view to_string(TailModel m) {
  return m == TailModel::PureExp ? "pure_exp" : "alpha_times_exp";
}

double WaveSolution::operator()(double x) const {
  if (x <= grid.front()) return values.front();
  if (x >= grid.back()) return values.back();
  const double h = step();
  const auto i = std::min(static_cast<std::size_t>((x - grid.front()) / h), grid.size() - 2);
  const double w = (x - grid[i]) / h;
  return (1.0 - w) * values[i] + w * values[i + 1];
}

double discrete_residual(std::span<const double> u, double h, double drift, double reaction_sign) {
  double worst = 0.0;
  const double inv_h2 = 1.0 / (h * h);
  const double inv_2h = 1.0 / (2.0 * h);
  for (std::size_t i = 1; i + 1 < u.size(); ++i) {
    const double r = 0.5 * (u[i + 1] - 2.0 * u[i] + u[i - 1]) * inv_h2 -
                     drift * (u[i + 1] - u[i - 1]) * inv_2h +
                     reaction_sign * u[i] * (1.0 - u[i]);
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

/// Boundary rows of the discrete problem. The left row is either a Dirichlet
/// value at node 0 or an interpolated anchor inside the grid.
struct Boundary {
  bool dirichlet_left = false;
  double left_value = 0.0;
  std::size_t anchor_node = 0;
  double anchor_weight = 0.0;
  double anchor_value = 0.5;
  double robin_rate = 0.0;
};

// Row layout: row 0 = left/anchor condition, rows 1..N-1 = interior
// residuals, row N = right Robin condition.
Vec residual(const Vec& u, double h, double drift, const Boundary& b) {
  const auto n = u.size();
  Vec f(n);
  if (b.dirichlet_left) {
    f[0] = u[0] - b.left_value;
  } else {
    const auto k = static_cast<Eigen::Index>(b.anchor_node);
    f[0] = (1.0 - b.anchor_weight) * u[k] + b.anchor_weight * u[k + 1] - b.anchor_value;
  }
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    f[i] = 0.5 * (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h) -
           drift * (u[i + 1] - u[i - 1]) / (2.0 * h) + u[i] * (1.0 - u[i]);
  }
  const auto m = n - 1;
  f[m] = (3.0 * u[m] - 4.0 * u[m - 1] + u[m - 2]) / (2.0 * h) - b.robin_rate * (1.0 - u[m]);
  return f;
}

SpMat jacobian(const Vec& u, double h, double drift, const Boundary& b) {
  const auto n = u.size();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(3 * n + 4));
  if (b.dirichlet_left) {
    t.emplace_back(0, 0, 1.0);
  } else {
    const auto k = static_cast<Eigen::Index>(b.anchor_node);
    t.emplace_back(0, k, 1.0 - b.anchor_weight);
    if (b.anchor_weight != 0.0) t.emplace_back(0, k + 1, b.anchor_weight);
  }
  const double lo = 0.5 / (h * h) + drift / (2.0 * h);
  const double hi = 0.5 / (h * h) - drift / (2.0 * h);
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    t.emplace_back(i, i - 1, lo);
    t.emplace_back(i, i, -1.0 / (h * h) + 1.0 - 2.0 * u[i]);
    t.emplace_back(i, i + 1, hi);
  }
  const auto m = n - 1;
  t.emplace_back(m, m, 3.0 / (2.0 * h) + b.robin_rate);
  t.emplace_back(m, m - 1, -4.0 / (2.0 * h));
  t.emplace_back(m, m - 2, 1.0 / (2.0 * h));
  SpMat j(n, n);
  j.setFromTriplets(t.begin(), t.end());
  return j;
}

int newton(Vec& u, double h, double drift, const Boundary& b, double tol) {
  constexpr int kMaxIter = 200;
  Vec f = residual(u, h, drift, b);
  double norm = f.lpNorm<Eigen::Infinity>();
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  bool analyzed = false;
  int it = 0;
  // One extra iteration after reaching tol drives the residual to rounding.
  bool polish = false;
  while (it < kMaxIter) {
    if (norm < tol) {
      if (polish) break;
      polish = true;
    }
    SpMat j = jacobian(u, h, drift, b);
    if (!analyzed) {
      lu.analyzePattern(j);
      analyzed = true;
    }
    lu.factorize(j);
    if (lu.info() != Eigen::Success) throw SolverError("singular Newton Jacobian", norm, it);
    const Vec delta = lu.solve(-f);
    double lambda = 1.0;
    Vec trial = u + delta;
    Vec f_trial = residual(trial, h, drift, b);
    double n_trial = f_trial.lpNorm<Eigen::Infinity>();
    while (n_trial > norm && lambda > 1e-4 && !polish) {
      lambda *= 0.5;
      trial = u + lambda * delta;
      f_trial = residual(trial, h, drift, b);
      n_trial = f_trial.lpNorm<Eigen::Infinity>();
    }
    ++it;
    if (polish && n_trial > norm) break;
    u = std::move(trial);
    f = std::move(f_trial);
    norm = n_trial;
  }
  if (!(norm < tol)) {
    throw SolverError("Newton iteration did not converge: residual " + std::to_string(norm), norm,
                      it);
  }
  return it;
}

void check_shape(const WaveSolution& s) {
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const double v = s.values[i];
    if (v < -1e-12 || v > 1.0 + 1e-12) {
      throw SolverError("solution left [0, 1] at x = " + std::to_string(s.grid[i]), s.residual,
                        s.newton_iterations);
    }
    if (i > 0 && v < s.values[i - 1] - 1e-12) {
      throw SolverError("solution not monotone at x = " + std::to_string(s.grid[i]), s.residual,
                        s.newton_iterations);
    }
  }
}

std::vector<double> uniform_grid(double lo, double hi, std::size_t intervals) {
  std::vector<double> g(intervals + 1);
  const double h = (hi - lo) / static_cast<double>(intervals);
  for (std::size_t i = 0; i <= intervals; ++i) g[i] = lo + h * static_cast<double>(i);
  g.back() = hi;
  return g;
}

}  // namespace

WaveSolution solve_traveling_wave(const GridSpec& spec, double tol, double anchor) {
  if (!(spec.hi > spec.lo) || spec.intervals < 8) throw DomainError("invalid grid");
  if (!(anchor > spec.lo) || !(anchor < spec.hi)) throw DomainError("anchor outside grid");
  if (tol < 1e-13) throw DomainError("tolerance below the rounding floor");

  WaveSolution s;
  s.kind = WaveKind::ThetaWave;
  s.drift = kSqrt2;
  s.grid = uniform_grid(spec.lo, spec.hi, spec.intervals);
  s.anchor_position = anchor;
  s.anchor_value = 0.5;
  const double h = s.step();

  Boundary b;
  const double pos = (anchor - spec.lo) / h;
  b.anchor_node = static_cast<std::size_t>(std::floor(pos + 1e-9));
  b.anchor_weight = std::max(0.0, pos - static_cast<double>(b.anchor_node));
  if (b.anchor_weight < 1e-9) b.anchor_weight = 0.0;
  b.anchor_value = 0.5;
  b.robin_rate = 2.0 - kSqrt2;

  Vec u(static_cast<Eigen::Index>(s.grid.size()));
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    u[static_cast<Eigen::Index>(i)] = 1.0 / (1.0 + std::exp(-kSqrt2 * (s.grid[i] - anchor)));
  }
  s.newton_iterations = newton(u, h, s.drift, b, tol);
  s.values.assign(u.data(), u.data() + u.size());
  s.residual = discrete_residual(s.values, h, s.drift, 1.0);
  check_shape(s);
  return s;
}

double min_kolmogorov_domain(double mu) { return 20.0 / (std::sqrt(mu * mu + 2.0) - mu); }

WaveSolution solve_kolmogorov_bvp(double mu, double domain_max, double tol,
                                  std::size_t intervals) {
  if (!(mu >= 0.0) || !(mu < kSqrt2)) {
    throw DomainError("solve_kolmogorov_bvp requires 0 <= mu < sqrt(2); the process dies out");
  }
  if (domain_max < min_kolmogorov_domain(mu) * (1.0 - 1e-12)) {
    throw DomainError("domain_max below 20 / (sqrt(mu^2 + 2) - mu)");
  }
  if (intervals < 8) throw DomainError("invalid grid");

  WaveSolution s;
  s.kind = WaveKind::QBvp;
  s.drift = mu;
  s.grid = uniform_grid(0.0, domain_max, intervals);
  s.anchor_position = 0.0;
  s.anchor_value = 0.0;
  const double h = s.step();

  Boundary b;
  b.dirichlet_left = true;
  b.left_value = 0.0;
  b.robin_rate = std::sqrt(mu * mu + 2.0) - mu;

  // Survival from x is at least the chance of outrunning the drift for one
  // branching time, so start well away from the trivial solution Q = 0.
  Vec u(static_cast<Eigen::Index>(s.grid.size()));
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    u[static_cast<Eigen::Index>(i)] = 1.0 - std::exp(-b.robin_rate * s.grid[i]);
  }
  s.newton_iterations = newton(u, h, s.drift, b, tol);
  s.values.assign(u.data(), u.data() + u.size());
  s.values.front() = 0.0;
  s.residual = discrete_residual(s.values, h, s.drift, 1.0);
  check_shape(s);
  return s;
}

TailFit tail_fit(const WaveSolution& solution, TailSide side, double lo, double hi,
                 TailModel model) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < solution.grid.size(); ++i) {
    const double x = solution.grid[i];
    if (x < lo || x > hi) continue;
    const double v = side == TailSide::LeftOfTheta ? solution.values[i] : 1.0 - solution.values[i];
    if (!(v > 0.0)) continue;
    double y = std::log(v);
    if (model == TailModel::AlphaTimesExp) {
      if (x == 0.0) continue;
      y -= std::log(std::abs(x));
    }
    xs.push_back(x);
    ys.push_back(y);
  }
  if (xs.size() < 20) throw DomainError("tail_fit window holds fewer than 20 usable grid points");

  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ss = 0.0;
  double ymin = ys[0], ymax = ys[0];
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (intercept + slope * xs[i]);
    ss += r * r;
    ymin = std::min(ymin, ys[i]);
    ymax = std::max(ymax, ys[i]);
  }
  TailFit fit;
  fit.rate = std::abs(slope);
  fit.model = model;
  fit.prefactor = std::exp(intercept);
  fit.goodness = std::sqrt(ss / n) / std::max(ymax - ymin, 1e-300);
  fit.window_lo = lo;
  fit.window_hi = hi;
  return fit;
}

ShootingResult shoot_kolmogorov(double mu, double x_max, std::size_t intervals) {
  if (!(mu >= 0.0) || !(mu < kSqrt2)) throw DomainError("shoot_kolmogorov requires 0 <= mu < sqrt 2");
  const double h = x_max / static_cast<double>(intervals);
  auto rhs = [mu](double q, double p) { return 2.0 * (mu * p - q * (1.0 - q)); };

  // +1: overshoots 1, -1: turns back down below 1, 0: stayed in the band.
  auto run = [&](double slope, std::vector<double>* out) {
    double q = 0.0, p = slope;
    if (out) out->assign(1, 0.0);
    for (std::size_t i = 0; i < intervals; ++i) {
      const double k1q = p, k1p = rhs(q, p);
      const double k2q = p + 0.5 * h * k1p, k2p = rhs(q + 0.5 * h * k1q, p + 0.5 * h * k1p);
      const double k3q = p + 0.5 * h * k2p, k3p = rhs(q + 0.5 * h * k2q, p + 0.5 * h * k2p);
      const double k4q = p + h * k3p, k4p = rhs(q + h * k3q, p + h * k3p);
      q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
      p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
      if (out) out->push_back(q);
      if (q > 1.0) return 1;
      if (p < 0.0) return -1;
    }
    return 0;
  };

  double lo = 0.0, hi = 4.0;
  while (run(hi, nullptr) != 1) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const int cls = run(mid, nullptr);
    if (cls == 1) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  ShootingResult res;
  res.slope = 0.5 * (lo + hi);
  run(lo, &res.values);
  res.grid.resize(res.values.size());
  for (std::size_t i = 0; i < res.grid.size(); ++i) res.grid[i] = h * static_cast<double>(i);
  return res;
}

void write_wave_csv(std::ostream& os, const WaveSolution& s) {
  os << "grid,value\n";
  os.precision(17);
  for (std::size_t i = 0; i < s.grid.size(); ++i) os << s.grid[i] << ',' << s.values[i] << '\n';
}

nlohmann::ordered_json wave_sidecar(const WaveSolution& s) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(s.kind));
  j["drift"] = s.drift;
  j["normalization"] = {{"position", s.anchor_position}, {"value", s.anchor_value}};
  if (s.tail_fit) {
    const auto& t = *s.tail_fit;
    j["tail_fit"] = {{"rate", t.rate},
                     {"model", std::string(to_string(t.model))},
                     {"prefactor", t.prefactor},
                     {"goodness", t.goodness},
                     {"window", {t.window_lo, t.window_hi}}};
  } else {
    j["tail_fit"] = nullptr;
  }
  j["residual"] = s.residual;
  j["newton_iterations"] = s.newton_iterations;
  j["points"] = s.grid.size();
  return j;
}

}  // namespace bbm
