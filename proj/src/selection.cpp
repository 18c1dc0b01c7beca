#include "hmmfdp/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hmmfdp/errors.hpp"

namespace hmmfdp {

PolicyContext PolicyContext::make(std::span<const double> x,
                                  const ModelParams& params) {
  return make(x, params, posterior_chain(params, x));
}

PolicyContext PolicyContext::make(std::span<const double> x,
                                  const ModelParams& params,
                                  PosteriorChain chain) {
  PolicyContext ctx;
  ctx.x = x;
  ctx.params = &params;
  ctx.chain = std::move(chain);
  if (params.null_known && params.f0.is_gaussian()) {
    ctx.pvalues = exact_pvalues(x, params.f0);
  } else {
    const EmpiricalNullCdf cdf(x, ctx.chain.locfdr);
    ctx.pvalues = empirical_pvalues(x, cdf);
  }
  return ctx;
}

Selection select_pvalue_threshold(const PValueVector& p, double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw InvalidParameterError("p-value threshold must lie in [0,1]");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < p.p.size(); ++i)
    if (p.p[i] < t) idx.push_back(i);
  return Selection(std::move(idx));
}

namespace {

// Mean local fdr over a set of indices, summed in index order; this is the
// canonical estimator all postconditions are stated against.
double mean_locfdr(const std::vector<double>& locfdr,
                   const std::vector<std::size_t>& sorted_by_index) {
  double sum = 0.0;
  for (std::size_t i : sorted_by_index) sum += locfdr[i];
  return sum / static_cast<double>(sorted_by_index.size());
}

}  // namespace

Selection suncai_select(const PosteriorChain& chain, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw InvalidParameterError("suncai_select: alpha must lie in (0,1)");
  const auto& l0 = chain.locfdr;
  const std::size_t m = l0.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return l0[a] < l0[b]; });

  // Candidate prefix size from running sums in the sorted order;  the running
  // mean is nondecreasing, so the first exceedance ends the feasible prefix.
  std::size_t k = 0;
  double sum = 0.0;
  while (k < m && (sum + l0[order[k]]) / static_cast<double>(k + 1) <= alpha) {
    sum += l0[order[k]];
    ++k;
  }

  // The estimate the contract is stated against sums in index order, which
  // can differ from the sorted-order running sum by rounding; settle the
  // boundary with the canonical estimator.
  auto canonical = [&](std::size_t size) {
    std::vector<std::size_t> prefix(order.begin(),
                                    order.begin() + static_cast<long>(size));
    std::sort(prefix.begin(), prefix.end());
    return mean_locfdr(l0, prefix);
  };
  while (k > 0 && canonical(k) > alpha) --k;
  while (k < m && canonical(k + 1) <= alpha) ++k;

  std::vector<std::size_t> idx(order.begin(),
                               order.begin() + static_cast<long>(k));
  std::sort(idx.begin(), idx.end());
  return Selection(std::move(idx));
}

double suncai_fdr_estimate(const PosteriorChain& chain, const Selection& R) {
  if (R.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i : R) sum += chain.locfdr[i];
  return sum / static_cast<double>(R.size());
}

Selection viterbi_select(const ModelParams& fitted,
                         std::span<const double> x) {
  const std::vector<int> path = viterbi(fitted, x);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < path.size(); ++i)
    if (path[i] == 1) idx.push_back(i);
  return Selection(std::move(idx));
}

Selection topk_select(const PValueVector& p, std::size_t k) {
  const std::size_t m = p.p.size();
  if (k > m)
    throw InvalidParameterError("topk_select: k exceeds the number of items");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return p.p[a] < p.p[b];
  });
  std::vector<std::size_t> idx(order.begin(),
                               order.begin() + static_cast<long>(k));
  std::sort(idx.begin(), idx.end());
  return Selection(std::move(idx));
}

std::size_t simes_false_discovery_count(const PValueVector& p,
                                        const Selection& R, double beta) {
  if (!(beta > 0.0 && beta < 1.0))
    throw InvalidParameterError("simes bound: beta must lie in (0,1)");
  if (R.empty()) return 0;
  const std::size_t m = p.p.size();
  const std::size_t s = R.size();
  std::vector<double> sel(s);
  for (std::size_t t = 0; t < s; ++t) sel[t] = p.p[R[t]];
  std::sort(sel.begin(), sel.end());

  // min over k of #{i in R : p_i > beta k / m} + k - 1; the count is
  // nonincreasing in k, so one sweep with a monotone cursor suffices.
  std::size_t cursor = 0;  // selected p-values <= current threshold
  std::size_t best = s;    // k = 1 gives at most s + 0
  for (std::size_t k = 1; k <= m; ++k) {
    const double threshold = beta * static_cast<double>(k) / static_cast<double>(m);
    while (cursor < s && sel[cursor] <= threshold) ++cursor;
    const std::size_t value = (s - cursor) + k - 1;
    best = std::min(best, value);
    if (s - cursor == 0) break;  // larger k only adds k - 1
  }
  return std::min(best, s);
}

double simes_bound(const PValueVector& p, const Selection& R, double beta) {
  if (R.empty()) return 0.0;
  return static_cast<double>(simes_false_discovery_count(p, R, beta)) /
         static_cast<double>(R.size());
}

Selection oracle_leak_select(std::span<const int> theta,
                             std::span<const double> x, LeakRule rule,
                             const PolicyContext& ctx) {
  (void)x;
  std::vector<std::size_t> idx;
  switch (rule) {
    case LeakRule::TrueAlternatives:
      for (std::size_t i = 0; i < theta.size(); ++i)
        if (theta[i] == 1) idx.push_back(i);
      break;
    case LeakRule::TrueNulls:
      for (std::size_t i = 0; i < theta.size(); ++i)
        if (theta[i] == 0) idx.push_back(i);
      break;
    case LeakRule::AlternativesBelowP05:
      for (std::size_t i = 0; i < theta.size(); ++i)
        if (theta[i] == 1 && ctx.pvalues.p[i] < 0.05) idx.push_back(i);
      break;
  }
  return Selection(std::move(idx));
}

Selection evaluate_policy(const SelectionPolicy& policy,
                          const PolicyContext& ctx,
                          std::span<const int> theta) {
  return std::visit(
      [&](const auto& v) -> Selection {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, PValueThresholdPolicy>) {
          return select_pvalue_threshold(ctx.pvalues, v.threshold);
        } else if constexpr (std::is_same_v<T, SunCaiPolicy>) {
          return suncai_select(ctx.chain, v.alpha);
        } else if constexpr (std::is_same_v<T, ViterbiPolicy>) {
          return viterbi_select(*ctx.params, ctx.x);
        } else if constexpr (std::is_same_v<T, TopKPolicy>) {
          return topk_select(ctx.pvalues, v.k);
        } else if constexpr (std::is_same_v<T, FixedSetPolicy>) {
          return v.set;
        } else {
          static_assert(std::is_same_v<T, OracleLeakPolicy>);
          if (theta.empty())
            throw InvalidParameterError(
                "oracle-leak policy evaluated without latent states");
          return oracle_leak_select(theta, ctx.x, v.rule, ctx);
        }
      },
      policy.variant);
}

}  // namespace hmmfdp
