#ifndef HMMFDP_ESTIMATION_HPP
#define HMMFDP_ESTIMATION_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "hmmfdp/density.hpp"
#include "hmmfdp/hmm.hpp"

namespace hmmfdp {

enum class NullLabelRule { Predominant, MeanClosestToZero };

struct EmConfig {
  int max_iters = 200;
  double tol = 1e-4;           // sup-norm stopping distance
  double storey_lambda = 0.8;  // null-proportion estimator threshold
  NullLabelRule null_label_rule = NullLabelRule::Predominant;
  std::uint64_t seed = 0;      // initialization draw
};

struct EmIterationStat {
  std::array<double, 4> a;  // a00, a01, a10, a11 after this iteration
  double sup_change;        // distance to the previous iterate (NaN at init)
  double log_likelihood;
};

struct EmTrace {
  // iterations[0] describes the initialization; iterations[t] the t-th EM
  // step.
  std::vector<EmIterationStat> iterations;
  std::size_t iteration_count = 0;  // EM steps actually taken
  bool converged = false;
  bool degenerate_init = false;     // alternative weights vanished at init
  std::size_t returned_iteration = 0;  // best-likelihood iterate
  double best_log_likelihood = 0.0;
  std::size_t monotonicity_violations = 0;  // drops beyond 1e-8 slack
};

// Storey null-proportion estimate min(1, #{p_i > lambda} / (m (1-lambda))).
double storey_pi0(const PValueVector& p, double lambda);

// Initial parameter guess: Storey pi0 fixes the stationary mass, a11 is
// drawn uniformly from the compatible range intersected with [0.6, 1), and
// f1 starts from the positive part of (pooled KDE - pi0 f0) renormalized on
// the observations.  f0 is the known null, or the caller's initial null
// estimate when the null is unknown.
ModelParams initialize(std::span<const double> x, const EmConfig& config,
                       const EmissionDensity& f0, bool null_known,
                       EmTrace* trace = nullptr);

// EM for the known-null model (transition matrix + weighted-KDE f1 update).
// Returns the best-likelihood iterate; the trace records every iteration.
std::pair<ModelParams, EmTrace> em_fit_known_f0(std::span<const double> x,
                                                const EmissionDensity& f0,
                                                const EmConfig& config);
// Same, but starting from explicit parameters (warm start).
std::pair<ModelParams, EmTrace> em_fit_known_f0(std::span<const double> x,
                                                const EmissionDensity& f0,
                                                const EmConfig& config,
                                                const ModelParams& init);

// EM with both emission densities re-estimated; after convergence the null
// label is assigned by config.null_label_rule (states swapped if needed).
std::pair<ModelParams, EmTrace> em_fit_unknown_f0(
    std::span<const double> x, const EmConfig& config,
    const EmissionDensity& f0_init);
std::pair<ModelParams, EmTrace> em_fit_unknown_f0(
    std::span<const double> x, const EmConfig& config,
    const EmissionDensity& f0_init, const ModelParams& init);

}  // namespace hmmfdp

#endif
