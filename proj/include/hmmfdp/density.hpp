#ifndef HMMFDP_DENSITY_HPP
#define HMMFDP_DENSITY_HPP

#include <span>
#include <vector>

#include "hmmfdp/emission.hpp"

namespace hmmfdp {

// Observations paired with nonnegative (not necessarily normalized) weights.
struct WeightedSample {
  std::vector<double> values;
  std::vector<double> weights;
};

// Weighted Gaussian-kernel density estimate: centers = values, weights
// normalized, bandwidth h.  Throws EstimationError when the weights sum
// to zero.
EmissionDensity weighted_kde(const WeightedSample& sample, double bandwidth);
EmissionDensity weighted_kde(std::span<const double> values,
                             std::span<const double> weights,
                             double bandwidth);

// h = 0.9 * min(sd, IQR/1.34) * n^{-1/5}.  Throws EstimationError on
// constant input (zero spread).
double bandwidth_silverman(std::span<const double> values);

// Weighted variant: weighted sd, weighted IQR, and Kish effective sample
// size (sum w)^2 / sum w^2 in place of n.
double bandwidth_silverman_weighted(std::span<const double> values,
                                    std::span<const double> weights);

// Step-function null CDF F0(t) = sum_{x_i < t} w_i / sum_i w_i with the
// strict inequality kept deliberately (F0 at the smallest value is 0).
class EmpiricalNullCdf {
public:
  EmpiricalNullCdf(std::span<const double> x, std::span<const double> locfdr0);

  double operator()(double t) const;

private:
  std::vector<double> sorted_x_;
  std::vector<double> cum_;  // cum_[k] = sum of weights of the k+1 smallest x
  double total_;
};

enum class PValueKind { Exact, Empirical };

struct PValueVector {
  std::vector<double> p;
  PValueKind kind = PValueKind::Exact;
};

// One-sided p_i = P(Z >= x_i) under an analytic Gaussian null.
PValueVector exact_pvalues(std::span<const double> x,
                           const EmissionDensity& f0);

// Two-sided p_i = 2 min(1 - F0(x_i), F0(x_i)) under an estimated null CDF.
PValueVector empirical_pvalues(std::span<const double> x,
                               const EmpiricalNullCdf& f0_cdf);

}  // namespace hmmfdp

#endif
