#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <json.hpp>

#include "bbm/model.hpp"

namespace bbm {

/// Offspring law of a Galton-Watson process: a finite probability vector or
/// one of the analytic families.
class OffspringDistribution {
 public:
  enum class Family { Finite, Poisson, Geometric };

  /// Throws DomainError unless p_k >= 0 and sum p_k = 1 to 1e-12.
  static OffspringDistribution finite(std::vector<double> probs);
  static OffspringDistribution poisson(double mean);
  /// P(X = k) = (1 - p) p^k, k >= 0.
  static OffspringDistribution geometric(double p);

  Family family() const { return family_; }
  const std::vector<double>& probabilities() const { return probs_; }
  double mean() const { return mean_; }
  /// E[X (X - 1)].
  double factorial_moment2() const { return fm2_; }
  double prob(std::size_t k) const;

  /// g(s) = E[s^X].
  double generating_function(double s) const;

  std::size_t sample(Rng& rng) const;

 private:
  Family family_ = Family::Finite;
  std::vector<double> probs_;
  double param_ = 0.0;
  double mean_ = 0.0;
  double fm2_ = 0.0;
};

/// Smallest fixed point of g in [0, 1] by monotone iteration from 0 with
/// guarded Aitken extrapolation. Returns exactly 1 when m <= 1 (unless
/// p_1 = 1, which gives 0).
double gw_extinction(const OffspringDistribution& dist, double tol = 1e-12);

/// 2 (m - 1) / E[X (X - 1)], a lower bound for the survival probability.
double survival_lower_bound(const OffspringDistribution& dist);

/// Monte Carlo extinction frequency over `trees` trees followed for
/// `generations` generations. A tree whose generation size reaches
/// `survival_size` counts as surviving.
double gw_monte_carlo_extinction(const OffspringDistribution& dist, std::size_t trees,
                                 std::size_t generations, std::size_t survival_size,
                                 const SeedSpec& seed);

/// Corpus files are JSON arrays of probability vectors.
std::vector<OffspringDistribution> load_corpus(const nlohmann::json& j);
nlohmann::json corpus_to_json(const std::vector<OffspringDistribution>& corpus);

}  // namespace bbm
