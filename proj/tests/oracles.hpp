// Brute-force reference implementations used by the test and acceptance
// suites.  All of them enumerate explicitly (2^m configurations, direct
// convolutions, naive scans) and stay independent of the dynamic programs
// they check; they share only the emission-density evaluation so both sides
// see bit-identical density values.
#ifndef HMMFDP_TESTS_ORACLES_HPP
#define HMMFDP_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "hmmfdp/bounds.hpp"
#include "hmmfdp/density.hpp"
#include "hmmfdp/hmm.hpp"

namespace oracles {

// Posterior probability of every configuration theta in {0,1}^m (m <= 20),
// indexed by bitmask (bit i = theta_i).
inline std::vector<double> posterior_by_enumeration(
    const hmmfdp::ModelParams& params, std::span<const double> x) {
  const std::size_t m = x.size();
  const hmmfdp::EmissionValues vals = hmmfdp::evaluate_emissions(params, x);
  const auto [pi0, pi1] = hmmfdp::stationary_distribution(params.A);
  const std::uint32_t n = 1u << m;
  std::vector<double> logp(n);
  double max_lp = -1e308;
  for (std::uint32_t c = 0; c < n; ++c) {
    int prev = c & 1;
    double lp = std::log(prev == 0 ? pi0 : pi1) +
                std::log(prev == 0 ? vals.f0[0] : vals.f1[0]);
    for (std::size_t i = 1; i < m; ++i) {
      const int cur = (c >> i) & 1;
      lp += std::log(params.A.entry(prev, cur)) +
            std::log(cur == 0 ? vals.f0[i] : vals.f1[i]);
      prev = cur;
    }
    logp[c] = lp;
    max_lp = std::max(max_lp, lp);
  }
  double z = 0.0;
  for (double lp : logp) z += std::exp(lp - max_lp);
  std::vector<double> post(n);
  for (std::uint32_t c = 0; c < n; ++c)
    post[c] = std::exp(logp[c] - max_lp) / z;
  return post;
}

inline double marginal_l(const std::vector<double>& post, std::size_t i,
                         int q) {
  double acc = 0.0;
  for (std::uint32_t c = 0; c < post.size(); ++c)
    if (((c >> i) & 1) == static_cast<std::uint32_t>(q)) acc += post[c];
  return acc;
}

inline double pairwise_l(const std::vector<double>& post, std::size_t i,
                         int q, int qp) {
  double acc = 0.0;
  for (std::uint32_t c = 0; c < post.size(); ++c)
    if (((c >> (i - 1)) & 1) == static_cast<std::uint32_t>(q) &&
        ((c >> i) & 1) == static_cast<std::uint32_t>(qp))
      acc += post[c];
  return acc;
}

// Posterior law of the zero count over the selected positions:
// out[n] = P(#{t : theta_{R_t} = 0} = n | x).
inline std::vector<double> count_law(const std::vector<double>& post,
                                     const hmmfdp::Selection& R) {
  std::vector<double> law(R.size() + 1, 0.0);
  for (std::uint32_t c = 0; c < post.size(); ++c) {
    std::size_t zeros = 0;
    for (std::size_t i : R)
      if (((c >> i) & 1) == 0) ++zeros;
    law[zeros] += post[c];
  }
  return law;
}

// B_{k,l,q} from the enumeration: P(#zeros among first k selected <= l,
// state at position R_{k-1} equals q | x).
inline double table_entry(const std::vector<double>& post,
                          const hmmfdp::Selection& R, std::size_t k,
                          std::size_t l, int q) {
  double acc = 0.0;
  for (std::uint32_t c = 0; c < post.size(); ++c) {
    std::size_t zeros = 0;
    for (std::size_t t = 0; t < k; ++t)
      if (((c >> R[t]) & 1) == 0) ++zeros;
    if (zeros <= l &&
        ((c >> R[k - 1]) & 1) == static_cast<std::uint32_t>(q))
      acc += post[c];
  }
  return acc;
}

// Definitional quantile bounds from the enumerated count law.
inline double upper_from_law(const std::vector<double>& law, double beta) {
  const double s = static_cast<double>(law.size() - 1);
  double cum = 0.0;
  for (std::size_t n = 0; n < law.size(); ++n) {
    cum += law[n];
    if (cum >= 1.0 - beta) return static_cast<double>(n) / std::max(s, 1.0);
  }
  return 1.0;
}

inline double lower_from_law(const std::vector<double>& law, double beta) {
  const double s = static_cast<double>(law.size() - 1);
  // max n with P(count >= n) >= 1 - beta; P(count >= 0) = 1 always
  std::size_t best = 0;
  for (std::size_t n = 1; n < law.size(); ++n) {
    double tail = 0.0;
    for (std::size_t k = n; k < law.size(); ++k) tail += law[k];
    if (tail >= 1.0 - beta) best = n;
  }
  return static_cast<double>(best) / std::max(s, 1.0);
}

// Poisson-binomial CDF by direct convolution: probabilities q_t of drawing a
// zero at step t, returns P(#zeros <= l) for all l.
inline std::vector<double> poisson_binomial_cdf(std::span<const double> q) {
  std::vector<double> pmf{1.0};
  for (double qt : q) {
    std::vector<double> next(pmf.size() + 1, 0.0);
    for (std::size_t k = 0; k < pmf.size(); ++k) {
      next[k] += pmf[k] * (1.0 - qt);
      next[k + 1] += pmf[k] * qt;
    }
    pmf = std::move(next);
  }
  std::vector<double> cdf(pmf.size());
  double cum = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    cum += pmf[k];
    cdf[k] = cum;
  }
  return cdf;
}

// Exhaustive most-likely path (for Viterbi checks), ties toward the
// lexicographically smaller configuration (state 0 first).
inline std::vector<int> best_path_by_enumeration(
    const hmmfdp::ModelParams& params, std::span<const double> x) {
  const std::size_t m = x.size();
  const hmmfdp::EmissionValues vals = hmmfdp::evaluate_emissions(params, x);
  const auto [pi0, pi1] = hmmfdp::stationary_distribution(params.A);
  const std::uint32_t n = 1u << m;
  double best_lp = -1e308;
  std::uint32_t best_c = 0;
  for (std::uint32_t c = 0; c < n; ++c) {
    int prev = c & 1;
    double lp = std::log(prev == 0 ? pi0 : pi1) +
                std::log(prev == 0 ? vals.f0[0] : vals.f1[0]);
    for (std::size_t i = 1; i < m; ++i) {
      const int cur = (c >> i) & 1;
      lp += std::log(params.A.entry(prev, cur)) +
            std::log(cur == 0 ? vals.f0[i] : vals.f1[i]);
      prev = cur;
    }
    if (lp > best_lp) {
      best_lp = lp;
      best_c = c;
    }
  }
  std::vector<int> path(m);
  for (std::size_t i = 0; i < m; ++i) path[i] = (best_c >> i) & 1;
  return path;
}

// Direct scan of the structure-free bound definition.
inline std::size_t simes_count_naive(const std::vector<double>& p,
                                     const hmmfdp::Selection& R, double beta,
                                     std::size_t m) {
  if (R.empty()) return 0;
  std::size_t best = R.size();
  for (std::size_t k = 1; k <= m; ++k) {
    std::size_t above = 0;
    for (std::size_t i : R)
      if (p[i] > beta * static_cast<double>(k) / static_cast<double>(m))
        ++above;
    best = std::min(best, above + k - 1);
  }
  return std::min(best, R.size());
}

// Full-sort empirical quantiles used to cross-check the order-statistic
// rules.
inline double quantile_upper_naive(std::vector<double> d, double gamma) {
  std::sort(d.begin(), d.end());
  const std::size_t b = d.size();
  std::size_t rank = static_cast<std::size_t>(
      std::ceil((1.0 - gamma) * static_cast<double>(b)));
  rank = std::min(std::max<std::size_t>(rank, 1), b);
  return d[rank - 1];
}

inline double quantile_lower_naive(std::vector<double> d, double gamma) {
  std::sort(d.begin(), d.end());
  const std::size_t b = d.size();
  std::size_t rank =
      static_cast<std::size_t>(std::floor(gamma * static_cast<double>(b))) + 1;
  rank = std::min(rank, b);
  return d[rank - 1];
}

}  // namespace oracles

#endif
