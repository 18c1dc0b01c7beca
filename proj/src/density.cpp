#include "hmmfdp/density.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hmmfdp/errors.hpp"

namespace hmmfdp {

EmissionDensity weighted_kde(std::span<const double> values,
                             std::span<const double> weights,
                             double bandwidth) {
  if (values.size() != weights.size())
    throw InvalidParameterError("weighted_kde: values/weights size mismatch");
  if (values.empty()) throw InvalidParameterError("weighted_kde: empty sample");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw InvalidParameterError("weighted_kde: weights must be nonnegative");
    total += w;
  }
  if (total <= 0.0)
    throw EstimationError("weighted_kde: all weights are zero");
  return EmissionDensity::kernel_mixture(
      std::vector<double>(values.begin(), values.end()),
      std::vector<double>(weights.begin(), weights.end()), bandwidth);
}

EmissionDensity weighted_kde(const WeightedSample& sample, double bandwidth) {
  return weighted_kde(std::span<const double>(sample.values),
                      std::span<const double>(sample.weights), bandwidth);
}

namespace {

// Weighted quantile of sorted (value, weight) pairs at probability p, by
// linear interpolation of the cumulative weight midpoints.
double weighted_quantile(const std::vector<double>& sorted_values,
                         const std::vector<double>& sorted_weights,
                         double total, double p) {
  const std::size_t n = sorted_values.size();
  double cum = 0.0;
  double prev_pos = 0.0;
  double prev_val = sorted_values.front();
  const double target = p * total;
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = cum + 0.5 * sorted_weights[i];
    if (pos >= target) {
      if (i == 0 || pos == prev_pos) return sorted_values[i];
      const double t = (target - prev_pos) / (pos - prev_pos);
      return prev_val + t * (sorted_values[i] - prev_val);
    }
    cum += sorted_weights[i];
    prev_pos = pos;
    prev_val = sorted_values[i];
  }
  return sorted_values.back();
}

double silverman_core(double sd, double iqr, double n_effective) {
  const double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0))
    throw EstimationError("bandwidth: sample has zero spread");
  return 0.9 * spread * std::pow(n_effective, -0.2);
}

}  // namespace

double bandwidth_silverman(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2)
    throw EstimationError("bandwidth: need at least two observations");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> unit(n, 1.0);
  const double q1 =
      weighted_quantile(sorted, unit, static_cast<double>(n), 0.25);
  const double q3 =
      weighted_quantile(sorted, unit, static_cast<double>(n), 0.75);
  return silverman_core(sd, q3 - q1, static_cast<double>(n));
}

double bandwidth_silverman_weighted(std::span<const double> values,
                                    std::span<const double> weights) {
  const std::size_t n = values.size();
  if (n != weights.size())
    throw InvalidParameterError("bandwidth: values/weights size mismatch");
  if (n < 2)
    throw EstimationError("bandwidth: need at least two observations");
  double total = 0.0, total_sq = 0.0;
  for (double w : weights) {
    total += w;
    total_sq += w * w;
  }
  if (total <= 0.0) throw EstimationError("bandwidth: all weights are zero");
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += weights[i] * values[i];
  mean /= total;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    ss += weights[i] * (values[i] - mean) * (values[i] - mean);
  // frequency-weight Bessel correction; reduces to ss/(n-1) under uniform
  // weights
  const double denom = total - total_sq / total;
  const double sd = std::sqrt(ss / (denom > 0.0 ? denom : total));
  const double n_eff = total * total / total_sq;  // Kish effective size

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> sv(n), sw(n);
  for (std::size_t i = 0; i < n; ++i) {
    sv[i] = values[order[i]];
    sw[i] = weights[order[i]];
  }
  const double q1 = weighted_quantile(sv, sw, total, 0.25);
  const double q3 = weighted_quantile(sv, sw, total, 0.75);
  return silverman_core(sd, q3 - q1, n_eff);
}

EmpiricalNullCdf::EmpiricalNullCdf(std::span<const double> x,
                                   std::span<const double> locfdr0) {
  if (x.size() != locfdr0.size())
    throw InvalidParameterError("empirical null cdf: size mismatch");
  if (x.empty()) throw InvalidParameterError("empirical null cdf: empty input");
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  sorted_x_.resize(x.size());
  cum_.resize(x.size());
  double cum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = locfdr0[order[i]];
    if (!(w >= 0.0))
      throw InvalidParameterError("empirical null cdf: negative weight");
    sorted_x_[i] = x[order[i]];
    cum += w;
    cum_[i] = cum;
  }
  total_ = cum;
  if (!(total_ > 0.0))
    throw EstimationError("empirical null cdf: all null weights are zero");
}

double EmpiricalNullCdf::operator()(double t) const {
  // strict inequality: mass of points with x_i < t
  const auto it = std::lower_bound(sorted_x_.begin(), sorted_x_.end(), t);
  if (it == sorted_x_.begin()) return 0.0;
  const std::size_t k = static_cast<std::size_t>(it - sorted_x_.begin());
  return cum_[k - 1] / total_;
}

PValueVector exact_pvalues(std::span<const double> x,
                           const EmissionDensity& f0) {
  if (!f0.is_gaussian())
    throw InvalidParameterError(
        "exact p-values require an analytic Gaussian null");
  PValueVector out;
  out.kind = PValueKind::Exact;
  out.p.resize(x.size());
  const auto& g = f0.gaussian_spec();
  for (std::size_t i = 0; i < x.size(); ++i)
    out.p[i] = norm_sf((x[i] - g.mean) / g.sd);
  return out;
}

PValueVector empirical_pvalues(std::span<const double> x,
                               const EmpiricalNullCdf& f0_cdf) {
  PValueVector out;
  out.kind = PValueKind::Empirical;
  out.p.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = f0_cdf(x[i]);
    out.p[i] = 2.0 * std::min(1.0 - F, F);
  }
  return out;
}

}  // namespace hmmfdp
