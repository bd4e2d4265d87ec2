#include "bbm/gw.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "bbm/stats.hpp"

namespace bbm {

OffspringDistribution OffspringDistribution::finite(std::vector<double> probs) {
  if (probs.empty()) throw DomainError("empty offspring distribution");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw DomainError("negative offspring probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("offspring probabilities do not sum to 1");
  OffspringDistribution d;
  d.family_ = Family::Finite;
  d.probs_ = std::move(probs);
  for (std::size_t k = 0; k < d.probs_.size(); ++k) {
    const double kk = static_cast<double>(k);
    d.mean_ += kk * d.probs_[k];
    d.fm2_ += kk * (kk - 1.0) * d.probs_[k];
  }
  return d;
}

OffspringDistribution OffspringDistribution::poisson(double mean) {
  if (!(mean > 0.0)) throw DomainError("Poisson mean must be positive");
  OffspringDistribution d;
  d.family_ = Family::Poisson;
  d.param_ = mean;
  d.mean_ = mean;
  d.fm2_ = mean * mean;
  return d;
}

OffspringDistribution OffspringDistribution::geometric(double p) {
  if (!(p > 0.0) || !(p < 1.0)) throw DomainError("geometric parameter must lie in (0, 1)");
  OffspringDistribution d;
  d.family_ = Family::Geometric;
  d.param_ = p;
  d.mean_ = p / (1.0 - p);
  d.fm2_ = 2.0 * p * p / ((1.0 - p) * (1.0 - p));
  return d;
}

double OffspringDistribution::prob(std::size_t k) const {
  switch (family_) {
    case Family::Finite: return k < probs_.size() ? probs_[k] : 0.0;
    case Family::Poisson: {
      const double kk = static_cast<double>(k);
      return std::exp(kk * std::log(param_) - param_ - std::lgamma(kk + 1.0));
    }
    case Family::Geometric: return (1.0 - param_) * std::pow(param_, static_cast<double>(k));
  }
  return 0.0;
}

double OffspringDistribution::generating_function(double s) const {
  switch (family_) {
    case Family::Finite: {
      double g = 0.0;
      for (auto it = probs_.rbegin(); it != probs_.rend(); ++it) g = g * s + *it;
      return g;
    }
    case Family::Poisson: return std::exp(param_ * (s - 1.0));
    case Family::Geometric: return (1.0 - param_) / (1.0 - param_ * s);
  }
  return 1.0;
}

std::size_t OffspringDistribution::sample(Rng& rng) const {
  switch (family_) {
    case Family::Finite: {
      double u = rng.uniform();
      for (std::size_t k = 0; k < probs_.size(); ++k) {
        if (u < probs_[k]) return k;
        u -= probs_[k];
      }
      // Rounding: fall back to the largest supported value.
      for (std::size_t k = probs_.size(); k-- > 0;) {
        if (probs_[k] > 0.0) return k;
      }
      return 0;
    }
    case Family::Poisson: return std::poisson_distribution<std::size_t>(param_)(rng.engine());
    case Family::Geometric:
      return std::geometric_distribution<std::size_t>(1.0 - param_)(rng.engine());
  }
  return 0;
}

double gw_extinction(const OffspringDistribution& dist, double tol) {
  const double p1 = dist.prob(1);
  if (p1 == 1.0) return 0.0;
  if (dist.mean() <= 1.0) return 1.0;

  auto g = [&](double s) { return dist.generating_function(s); };
  double s = 0.0;
  for (long it = 0; it < 10'000'000; ++it) {
    const double s1 = g(s);
    if (std::abs(s1 - s) < tol) return s1;
    const double s2 = g(s1);
    // Aitken on (s, s1, s2); the iterate stays below q, where g(x) >= x, so
    // an extrapolation is kept only if it keeps that property.
    const double denom = s2 - 2.0 * s1 + s;
    double next = s2;
    if (denom != 0.0) {
      const double acc = s - (s1 - s) * (s1 - s) / denom;
      if (acc > s2 && acc < 1.0 && g(acc) >= acc) next = acc;
    }
    s = next;
  }
  return s;
}

double survival_lower_bound(const OffspringDistribution& dist) {
  const double fm2 = dist.factorial_moment2();
  if (!(fm2 > 0.0)) {
    throw DomainError("survival bound undefined: E[X(X-1)] = 0 (support within {0, 1})");
  }
  return 2.0 * (dist.mean() - 1.0) / fm2;
}

double gw_monte_carlo_extinction(const OffspringDistribution& dist, std::size_t trees,
                                 std::size_t generations, std::size_t survival_size,
                                 const SeedSpec& seed) {
  std::vector<unsigned char> died(trees, 0);
  parallel_for(trees, [&](std::size_t t) {
    Rng rng(seed.with_stream(seed.stream_id + t));
    std::size_t size = 1;
    for (std::size_t gen = 0; gen < generations && size > 0 && size < survival_size; ++gen) {
      std::size_t next = 0;
      for (std::size_t i = 0; i < size; ++i) next += dist.sample(rng);
      size = next;
    }
    died[t] = size == 0 ? 1 : 0;
  });
  const auto n_died = std::accumulate(died.begin(), died.end(), std::size_t{0});
  return static_cast<double>(n_died) / static_cast<double>(trees);
}

std::vector<OffspringDistribution> load_corpus(const nlohmann::json& j) {
  std::vector<OffspringDistribution> out;
  for (const auto& entry : j) out.push_back(OffspringDistribution::finite(entry.get<std::vector<double>>()));
  return out;
}

nlohmann::json corpus_to_json(const std::vector<OffspringDistribution>& corpus) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& d : corpus) j.push_back(d.probabilities());
  return j;
}

}  // namespace bbm
