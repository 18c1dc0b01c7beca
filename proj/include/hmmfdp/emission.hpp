#ifndef HMMFDP_EMISSION_HPP
#define HMMFDP_EMISSION_HPP

#include <span>
#include <variant>
#include <vector>

#include "hmmfdp/rng.hpp"

namespace hmmfdp {

struct GaussianSpec {
  double mean;
  double sd;
};

// Gaussian-kernel mixture sum_i w_i N(centers[i], bandwidth^2).  Weights are
// normalized to unit sum at construction.  Evaluation runs over the centers
// within 12 bandwidths of the query (the tail beyond that contributes less
// than 3e-32 of the total mass), so densities of large mixtures stay cheap
// when the query sits in a sparse region.
struct KernelMixtureSpec {
  std::vector<double> centers;
  std::vector<double> weights;  // normalized
  double bandwidth;

  // centers sorted ascending with matching weights and cumulative sums,
  // built once at construction.
  std::vector<double> sorted_centers;
  std::vector<double> sorted_weights;
  std::vector<double> cum_weights;
};

// Observation density of one hidden state: either an analytic Gaussian or a
// Gaussian kernel mixture.  Immutable after construction; evaluation and
// sampling are const and safe to call concurrently.
class EmissionDensity {
public:
  static EmissionDensity gaussian(double mean, double sd);
  static EmissionDensity kernel_mixture(std::vector<double> centers,
                                        std::vector<double> weights,
                                        double bandwidth);

  bool is_gaussian() const {
    return std::holds_alternative<GaussianSpec>(spec_);
  }
  bool is_kernel_mixture() const { return !is_gaussian(); }
  const GaussianSpec& gaussian_spec() const {
    return std::get<GaussianSpec>(spec_);
  }
  const KernelMixtureSpec& mixture_spec() const {
    return std::get<KernelMixtureSpec>(spec_);
  }

  double density(double x) const;
  void density_many(std::span<const double> xs, std::span<double> out) const;

  double cdf(double x) const;
  double survival(double x) const;  // 1 - cdf, accurate in the right tail
  double mean() const;

  double sample(Rng& rng) const;

  // Detectably-identical check used to reject the singular f0 = f1 model.
  bool identical_to(const EmissionDensity& other) const;

private:
  explicit EmissionDensity(GaussianSpec g) : spec_(g) {}
  explicit EmissionDensity(KernelMixtureSpec k) : spec_(std::move(k)) {}

  std::variant<GaussianSpec, KernelMixtureSpec> spec_;
};

// Standard normal density, cdf and survival (shared by emission evaluation
// and p-value computation).
double norm_pdf(double z);
double norm_cdf(double z);
double norm_sf(double z);

}  // namespace hmmfdp

#endif
