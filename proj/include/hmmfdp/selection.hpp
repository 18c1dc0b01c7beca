#ifndef HMMFDP_SELECTION_HPP
#define HMMFDP_SELECTION_HPP

#include <optional>
#include <span>
#include <string>
#include <variant>

#include "hmmfdp/bounds.hpp"
#include "hmmfdp/density.hpp"
#include "hmmfdp/hmm.hpp"

namespace hmmfdp {

// ---- Policy variants -------------------------------------------------------

struct PValueThresholdPolicy {
  double threshold;
};

struct SunCaiPolicy {
  double alpha;
};

struct ViterbiPolicy {};

struct TopKPolicy {
  std::size_t k;
};

struct FixedSetPolicy {
  Selection set;
};

// Deliberately invalid policies that read the latent configuration; they
// exist only for the stress experiments and are gated behind an explicit
// unsafe flag everywhere user-facing.
enum class LeakRule {
  TrueAlternatives,        // {i : theta_i = 1}
  TrueNulls,               // {i : theta_i = 0}
  AlternativesBelowP05,    // {i : p_i < 0.05 and theta_i = 1}
};

struct OracleLeakPolicy {
  LeakRule rule;
};

using PolicyVariant =
    std::variant<PValueThresholdPolicy, SunCaiPolicy, ViterbiPolicy,
                 TopKPolicy, FixedSetPolicy, OracleLeakPolicy>;

// A deterministic map from an observation vector (given the model parameters
// the policy carries at evaluation time) to a Selection.
struct SelectionPolicy {
  PolicyVariant variant;
  std::string name;  // label used in records/summaries

  bool requires_theta() const {
    return std::holds_alternative<OracleLeakPolicy>(variant);
  }
  bool requires_model() const {
    return !std::holds_alternative<FixedSetPolicy>(variant);
  }
  // Needs the full map x -> S(x), not just the realized set (everything
  // except FixedSet).
  bool is_full_policy() const {
    return !std::holds_alternative<FixedSetPolicy>(variant);
  }
};

// Everything policy evaluation may need for one (x, params) pair, computed
// once and shared across policies: the posterior chain and the p-values
// (exact one-sided when the null is known analytic, empirical two-sided
// otherwise).
struct PolicyContext {
  std::span<const double> x;
  const ModelParams* params = nullptr;
  PosteriorChain chain;
  PValueVector pvalues;

  static PolicyContext make(std::span<const double> x,
                            const ModelParams& params);
  static PolicyContext make(std::span<const double> x,
                            const ModelParams& params, PosteriorChain chain);
};

Selection evaluate_policy(const SelectionPolicy& policy,
                          const PolicyContext& ctx,
                          std::span<const int> theta = {});

// ---- Individual selection rules --------------------------------------------

// Indices with p_i < t, ascending.
Selection select_pvalue_threshold(const PValueVector& p, double t);

// Largest prefix of the ascending local-fdr order whose mean stays at or
// below alpha; ties in the local fdr broken by index; result re-sorted by
// index.  The returned set satisfies suncai_fdr_estimate(R) <= alpha exactly,
// and adding the next-ranked item pushes the estimate above alpha.
Selection suncai_select(const PosteriorChain& chain, double alpha);

// Mean local fdr over R (0 for an empty selection): the posterior FDR
// estimate of the selected set.
double suncai_fdr_estimate(const PosteriorChain& chain, const Selection& R);

// Indices decoded to state 1 by the Viterbi path at the given parameters.
Selection viterbi_select(const ModelParams& fitted, std::span<const double> x);

// Indices of the k smallest p-values, ties broken by index.
Selection topk_select(const PValueVector& p, std::size_t k);

// Structure-free upper bound on the number of false discoveries in R divided
// by |R|; the count itself is exposed for exact integer comparisons.
std::size_t simes_false_discovery_count(const PValueVector& p,
                                        const Selection& R, double beta);
double simes_bound(const PValueVector& p, const Selection& R, double beta);

// UNSAFE: reads theta.  Only reachable through the unsafe-experiments gate.
Selection oracle_leak_select(std::span<const int> theta,
                             std::span<const double> x, LeakRule rule,
                             const PolicyContext& ctx);

}  // namespace hmmfdp

#endif
