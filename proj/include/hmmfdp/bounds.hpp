#ifndef HMMFDP_BOUNDS_HPP
#define HMMFDP_BOUNDS_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "hmmfdp/hmm.hpp"

namespace hmmfdp {

// An ordered set of selected hypothesis indices, 0-based and strictly
// increasing.  May be empty.  File formats use 1-based indices; conversion
// happens at the I/O boundary.
class Selection {
public:
  Selection() = default;
  // Validates strict monotonicity; if m > 0 also checks indices < m.
  explicit Selection(std::vector<std::size_t> indices, std::size_t m = 0);

  static Selection from_mask(const std::vector<bool>& mask);

  std::size_t size() const { return idx_.size(); }
  bool empty() const { return idx_.empty(); }
  std::size_t operator[](std::size_t t) const { return idx_[t]; }
  const std::vector<std::size_t>& indices() const { return idx_; }
  auto begin() const { return idx_.begin(); }
  auto end() const { return idx_.end(); }

private:
  std::vector<std::size_t> idx_;
};

// FDP(theta, R) = #{i in R : theta_i = 0} / max(|R|, 1).
double fdp(std::span<const int> theta, const Selection& R);

// The posterior chain restricted to the selected positions: initial
// distribution at j_1 and transition matrices that are products of the
// per-step matrices across each gap (rows renormalized after every factor
// to keep long products stochastic).
struct RestrictedChain {
  double init0 = 0.0, init1 = 0.0;
  std::vector<Mat2> transitions;  // size s-1

  std::size_t size() const { return transitions.size() + 1; }
};

RestrictedChain restrict_chain(const PosteriorChain& chain, const Selection& R);

// Distribution of the running null count along the restricted chain:
// b0[l][k-1] = P(#zeros among first k selected <= l, state at k is 0 | X),
// b1 likewise with state 1.  Columns are materialized left to right and,
// in the early-stopped variant, only until the cumulative at k = s crosses
// the requested threshold.
struct CountDistributionTables {
  std::size_t s = 0;
  std::vector<std::vector<double>> b0;  // [column l][position k-1]
  std::vector<std::vector<double>> b1;

  std::size_t columns() const { return b0.size(); }
  // B_{s,l,0} + B_{s,l,1} = P(#zeros <= l | X).
  double cumulative(std::size_t l) const { return b0[l][s - 1] + b1[l][s - 1]; }
};

// Early-stopped tables for an upper bound at level beta: columns stop once
// cumulative(l) >= 1 - beta.
CountDistributionTables count_tables(const RestrictedChain& rc, double beta);
// All s+1 columns.
CountDistributionTables count_tables_full(const RestrictedChain& rc);

// Posterior quantile bounds on the selected null count, as proportions of
// |R|.  Empty selections give 0 (the FDP of an empty selection is 0).
double upper_bound_from_chain(const PosteriorChain& chain, const Selection& R,
                              double beta);
double lower_bound_from_chain(const PosteriorChain& chain, const Selection& R,
                              double beta);
double upper_bound(const ModelParams& params, std::span<const double> x,
                   const Selection& R, double beta);
double lower_bound(const ModelParams& params, std::span<const double> x,
                   const Selection& R, double beta);

// Two-sided FDP interval [L_{alpha*gamma}, U_{alpha*(1-gamma)}].
struct FdpInterval {
  double lower = 0.0;
  double upper = 0.0;
  double beta_total = 0.0;   // alpha
  double gamma_split = 0.0;  // gamma
};

FdpInterval posterior_interval_from_chain(const PosteriorChain& chain,
                                          const Selection& R, double alpha,
                                          double gamma);
FdpInterval posterior_interval(const ModelParams& params,
                               std::span<const double> x, const Selection& R,
                               double alpha, double gamma);

// Plug-in bounds are the oracle bounds evaluated at fitted parameters; the
// aliases exist so call sites say what they mean.
inline double plugin_upper(std::span<const double> x, const Selection& R,
                           double beta, const ModelParams& fitted) {
  return upper_bound(fitted, x, R, beta);
}
inline double plugin_lower(std::span<const double> x, const Selection& R,
                           double beta, const ModelParams& fitted) {
  return lower_bound(fitted, x, R, beta);
}
inline FdpInterval plugin_interval(std::span<const double> x,
                                   const Selection& R, double alpha,
                                   double gamma, const ModelParams& fitted) {
  return posterior_interval(fitted, x, R, alpha, gamma);
}

}  // namespace hmmfdp

#endif
