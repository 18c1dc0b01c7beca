#ifndef HMMFDP_BOOTSTRAP_HPP
#define HMMFDP_BOOTSTRAP_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hmmfdp/bounds.hpp"
#include "hmmfdp/estimation.hpp"
#include "hmmfdp/selection.hpp"

namespace hmmfdp {

enum class BootVariant { Boot1, Boot2, Boot3, Naive };

struct BootstrapConfig {
  int B = 100;
  double beta = 0.1;
  double delta = 0.5;  // level split for boot1/boot2
  BootVariant variant = BootVariant::Boot1;
  std::uint64_t seed = 0;
  int threads = 1;            // replicate-level parallelism
  bool positive_part = true;  // clamp corrections toward conservatism
  std::size_t replicate_length = 0;  // resampled series length; 0 = |x|
};

// Replicate difference vector (D_i for upper corrections, E_i for lower).
struct ReplicateDiffs {
  std::vector<double> d;
  int variant_index = 1;  // 1, 2 or 3
};

// Empirical (1-gamma)-quantile: ascending order statistic of rank
// ceil((1-gamma) B).
double upper_quantile_correction(const ReplicateDiffs& diffs, double gamma);
// Ascending order statistic of rank floor(gamma B) + 1.
double lower_quantile_correction(const ReplicateDiffs& diffs, double gamma);

// How to refit parameters on resampled data: same EM configuration as the
// original fit, warm-started from the fitted parameters, seeded per
// replicate.
struct EstimationContext {
  EmConfig em;
  bool null_known = true;
  std::optional<EmissionDensity> f0;  // known null (or ignored when warm
                                      // starting the unknown-null fit)

  std::pair<ModelParams, EmTrace> refit(std::span<const double> x,
                                        const ModelParams& warm_start,
                                        std::uint64_t seed) const;
};

struct ReplicateDiagnostics {
  int b = 0;
  double d_value = 0.0;
  int refit_iterations = 0;
  bool refit_converged = false;
  bool failed = false;
};

struct BootstrapBound {
  double bound = 0.0;           // final value, truncated to [0, 1]
  double inner_plugin = 0.0;    // plug-in bound at the inner level
  double raw_correction = 0.0;  // quantile before clamping
  double correction = 0.0;      // after clamping
  double inner_level = 0.0;     // lambda
  double quantile_level = 0.0;  // gamma
  int failures = 0;
  std::vector<ReplicateDiagnostics> replicates;
};

// ---- Single-method entry points ---------------------------------------------
// policy arguments are evaluated as fixed maps (with the parameters they
// carry through the context built at evaluation time); fitted is the model
// the replicates are drawn from and the plug-in bounds are computed at.

BootstrapBound boot1_upper(std::span<const double> x,
                           const SelectionPolicy& policy,
                           const ModelParams& fitted,
                           const EstimationContext& est,
                           const BootstrapConfig& config);
BootstrapBound boot2_upper(std::span<const double> x, const Selection& R,
                           const ModelParams& fitted,
                           const EstimationContext& est,
                           const BootstrapConfig& config);
BootstrapBound boot3_upper(std::span<const double> x,
                           const SelectionPolicy& policy,
                           const ModelParams& fitted,
                           const EstimationContext& est,
                           const BootstrapConfig& config);
BootstrapBound naive_upper(const SelectionPolicy& policy,
                           const ModelParams& fitted,
                           const EstimationContext& est,
                           const BootstrapConfig& config);

BootstrapBound boot1_lower(std::span<const double> x,
                           const SelectionPolicy& policy,
                           const ModelParams& fitted,
                           const EstimationContext& est,
                           const BootstrapConfig& config);
BootstrapBound boot2_lower(std::span<const double> x, const Selection& R,
                           const ModelParams& fitted,
                           const EstimationContext& est,
                           const BootstrapConfig& config);
BootstrapBound boot3_lower(std::span<const double> x,
                           const SelectionPolicy& policy,
                           const ModelParams& fitted,
                           const EstimationContext& est,
                           const BootstrapConfig& config);
BootstrapBound naive_lower(const SelectionPolicy& policy,
                           const ModelParams& fitted,
                           const EstimationContext& est,
                           const BootstrapConfig& config);

// ---- Shared-replicate batch -------------------------------------------------
// One replicate stream (sample, refit, chains) feeding every requested
// (policy, method) pair; this is what the experiment harness uses so that a
// grid pays for each refit once.

struct BootMethodRequest {
  BootVariant variant;
  double delta = 0.5;        // used by boot1/boot2
  double beta_override = 0;  // total level for this entry; 0 = request beta
};

struct BatchCell {
  double upper = 0.0, lower = 0.0;
  double upper_plugin = 0.0, lower_plugin = 0.0;
  double q_upper = 0.0, q_lower = 0.0;  // raw corrections
  ReplicateDiffs d_upper, e_lower;      // empty for naive
};

struct BootstrapBatchRequest {
  std::span<const double> x;
  const ModelParams* fitted = nullptr;
  const EstimationContext* est = nullptr;
  const PolicyContext* ctx = nullptr;  // context of (x, fitted)
  std::vector<SelectionPolicy> policies;
  std::vector<Selection> selections_on_x;  // realized S(x) per policy
  std::vector<BootMethodRequest> methods;
  std::span<const int> theta;  // only consulted by unsafe leak policies
  int B = 100;
  double beta = 0.1;
  std::uint64_t seed = 0;
  int threads = 1;
  bool positive_part = true;
  std::size_t replicate_length = 0;  // 0 = |x|
};

struct BootstrapBatchResult {
  std::vector<std::vector<BatchCell>> cells;  // [policy][method]
  std::vector<ReplicateDiagnostics> replicates;
  int failures = 0;
};

BootstrapBatchResult run_bootstrap_batch(const BootstrapBatchRequest& request);

}  // namespace hmmfdp

#endif
