#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <functional>
#include <span>
#include <vector>

namespace bbm {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      carry_ += (sum_ - t) + v;
    } else {
      carry_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

struct MeanStat {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

MeanStat mean_stat(std::span<const double> xs);

/// Asymptotic Kolmogorov survival function with the Stephens small-sample
/// correction; returns P(D_n >= d) under the null.
double ks_pvalue(double d, double effective_n);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample KS test. Samples above `censor` are treated as right-censored:
/// the supremum is taken over t <= censor only.
KsResult ks_one_sample(std::vector<double> samples, const std::function<double(double)>& cdf,
                       double censor = std::numeric_limits<double>::infinity());

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Upper tail of the chi-square distribution.
double chi2_pvalue(double statistic, double dof);

/// Quantile by linear interpolation between order statistics.
double quantile(std::vector<double> xs, double q);

/// Runs body(i) for i in [0, n) over a fixed pool of worker threads. Each
/// index is processed exactly once; callers store results by index so the
/// output never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace bbm
