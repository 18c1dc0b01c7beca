#include "hmmfdp/emission.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hmmfdp/errors.hpp"
#include "hmmfdp/fastexp.hpp"

namespace hmmfdp {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kInvSqrt2 = 0.70710678118654752440;

// Kernel support radius in bandwidth units; the mass beyond 12 sd is below
// 3e-32 and invisible at the tolerances used anywhere downstream.
constexpr double kKernelRadius = 12.0;

void require(bool ok, const char* what) {
  if (!ok) throw InvalidParameterError(what);
}

}  // namespace

double norm_pdf(double z) {
  return kInvSqrt2Pi * detail::fast_exp(-0.5 * z * z);
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

double norm_sf(double z) { return 0.5 * std::erfc(z * kInvSqrt2); }

EmissionDensity EmissionDensity::gaussian(double mean, double sd) {
  require(std::isfinite(mean), "gaussian emission: mean must be finite");
  require(std::isfinite(sd) && sd > 0.0,
          "gaussian emission: sd must be positive and finite");
  return EmissionDensity(GaussianSpec{mean, sd});
}

EmissionDensity EmissionDensity::kernel_mixture(std::vector<double> centers,
                                                std::vector<double> weights,
                                                double bandwidth) {
  require(!centers.empty(), "kernel mixture: no centers");
  require(centers.size() == weights.size(),
          "kernel mixture: centers/weights size mismatch");
  require(std::isfinite(bandwidth) && bandwidth > 0.0,
          "kernel mixture: bandwidth must be positive");
  double total = 0.0;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    require(std::isfinite(centers[i]), "kernel mixture: non-finite center");
    require(std::isfinite(weights[i]) && weights[i] >= 0.0,
            "kernel mixture: weights must be nonnegative");
    total += weights[i];
  }
  require(total > 0.0, "kernel mixture: weights sum to zero");
  for (auto& w : weights) w /= total;

  KernelMixtureSpec spec;
  spec.bandwidth = bandwidth;
  std::vector<std::size_t> order(centers.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return centers[a] < centers[b];
  });
  spec.sorted_centers.reserve(order.size());
  spec.sorted_weights.reserve(order.size());
  spec.cum_weights.reserve(order.size());
  double cum = 0.0;
  for (std::size_t k : order) {
    spec.sorted_centers.push_back(centers[k]);
    spec.sorted_weights.push_back(weights[k]);
    cum += weights[k];
    spec.cum_weights.push_back(cum);
  }
  spec.centers = std::move(centers);
  spec.weights = std::move(weights);
  return EmissionDensity(std::move(spec));
}

namespace {

double mixture_density_at(const KernelMixtureSpec& k, double x) {
  const double h = k.bandwidth;
  const double radius = kKernelRadius * h;
  const auto lo = std::lower_bound(k.sorted_centers.begin(),
                                   k.sorted_centers.end(), x - radius);
  const auto hi = std::upper_bound(lo, k.sorted_centers.end(), x + radius);
  const std::size_t a = static_cast<std::size_t>(lo - k.sorted_centers.begin());
  const std::size_t b = static_cast<std::size_t>(hi - k.sorted_centers.begin());
  const double inv_h = 1.0 / h;
  // blocked so the exponential vectorizes; the window keeps every argument
  // inside [-72, 0], the unchecked range
  constexpr std::size_t kBlock = 64;
  double buf[kBlock];
  double acc = 0.0;
  for (std::size_t start = a; start < b; start += kBlock) {
    const std::size_t len = std::min(kBlock, b - start);
    for (std::size_t j = 0; j < len; ++j) {
      const double u = (x - k.sorted_centers[start + j]) * inv_h;
      buf[j] = detail::fast_exp_unchecked(-0.5 * u * u);
    }
    for (std::size_t j = 0; j < len; ++j)
      acc += k.sorted_weights[start + j] * buf[j];
  }
  return acc * kInvSqrt2Pi * inv_h;
}

}  // namespace

double EmissionDensity::density(double x) const {
  if (const auto* g = std::get_if<GaussianSpec>(&spec_)) {
    const double z = (x - g->mean) / g->sd;
    return norm_pdf(z) / g->sd;
  }
  return mixture_density_at(std::get<KernelMixtureSpec>(spec_), x);
}

void EmissionDensity::density_many(std::span<const double> xs,
                                   std::span<double> out) const {
  if (const auto* g = std::get_if<GaussianSpec>(&spec_)) {
    const double inv_sd = 1.0 / g->sd;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double z = (xs[i] - g->mean) * inv_sd;
      out[i] = kInvSqrt2Pi * inv_sd * detail::fast_exp(-0.5 * z * z);
    }
    return;
  }
  const auto& k = std::get<KernelMixtureSpec>(spec_);
  for (std::size_t i = 0; i < xs.size(); ++i)
    out[i] = mixture_density_at(k, xs[i]);
}

double EmissionDensity::cdf(double x) const {
  if (const auto* g = std::get_if<GaussianSpec>(&spec_))
    return norm_cdf((x - g->mean) / g->sd);
  const auto& k = std::get<KernelMixtureSpec>(spec_);
  const double inv_h = 1.0 / k.bandwidth;
  double acc = 0.0;
  for (std::size_t i = 0; i < k.sorted_centers.size(); ++i)
    acc += k.sorted_weights[i] * norm_cdf((x - k.sorted_centers[i]) * inv_h);
  return acc;
}

double EmissionDensity::survival(double x) const {
  if (const auto* g = std::get_if<GaussianSpec>(&spec_))
    return norm_sf((x - g->mean) / g->sd);
  const auto& k = std::get<KernelMixtureSpec>(spec_);
  const double inv_h = 1.0 / k.bandwidth;
  double acc = 0.0;
  for (std::size_t i = 0; i < k.sorted_centers.size(); ++i)
    acc += k.sorted_weights[i] * norm_sf((x - k.sorted_centers[i]) * inv_h);
  return acc;
}

double EmissionDensity::mean() const {
  if (const auto* g = std::get_if<GaussianSpec>(&spec_)) return g->mean;
  const auto& k = std::get<KernelMixtureSpec>(spec_);
  double acc = 0.0;
  for (std::size_t i = 0; i < k.sorted_centers.size(); ++i)
    acc += k.sorted_weights[i] * k.sorted_centers[i];
  return acc;
}

double EmissionDensity::sample(Rng& rng) const {
  if (const auto* g = std::get_if<GaussianSpec>(&spec_))
    return g->mean + g->sd * rng.normal();
  const auto& k = std::get<KernelMixtureSpec>(spec_);
  const std::size_t i = rng.categorical(k.cum_weights);
  return k.sorted_centers[i] + k.bandwidth * rng.normal();
}

bool EmissionDensity::identical_to(const EmissionDensity& other) const {
  if (spec_.index() != other.spec_.index()) return false;
  if (const auto* g = std::get_if<GaussianSpec>(&spec_)) {
    const auto& o = std::get<GaussianSpec>(other.spec_);
    return g->mean == o.mean && g->sd == o.sd;
  }
  const auto& k = std::get<KernelMixtureSpec>(spec_);
  const auto& o = std::get<KernelMixtureSpec>(other.spec_);
  return k.bandwidth == o.bandwidth && k.sorted_centers == o.sorted_centers &&
         k.sorted_weights == o.sorted_weights;
}

}  // namespace hmmfdp
