#include "hmmfdp/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hmmfdp/errors.hpp"

namespace hmmfdp {

Selection::Selection(std::vector<std::size_t> indices, std::size_t m)
    : idx_(std::move(indices)) {
  for (std::size_t t = 1; t < idx_.size(); ++t)
    if (idx_[t] <= idx_[t - 1])
      throw InvalidParameterError(
          "selection: indices must be strictly increasing");
  if (m > 0 && !idx_.empty() && idx_.back() >= m)
    throw InvalidParameterError("selection: index " +
                                std::to_string(idx_.back() + 1) +
                                " exceeds the number of hypotheses");
}

Selection Selection::from_mask(const std::vector<bool>& mask) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) idx.push_back(i);
  return Selection(std::move(idx));
}

double fdp(std::span<const int> theta, const Selection& R) {
  if (R.empty()) return 0.0;
  std::size_t nulls = 0;
  for (std::size_t i : R)
    if (theta[i] == 0) ++nulls;
  return static_cast<double>(nulls) / static_cast<double>(R.size());
}

RestrictedChain restrict_chain(const PosteriorChain& chain,
                               const Selection& R) {
  if (R.empty())
    throw EmptySelectionError("restrict_chain: empty selection");
  RestrictedChain rc;
  rc.init0 = chain.locfdr[R[0]];
  rc.init1 = 1.0 - rc.init0;
  rc.transitions.reserve(R.size() - 1);
  for (std::size_t t = 1; t < R.size(); ++t) {
    Mat2 prod = chain.transitions[R[t - 1]];
    for (std::size_t i = R[t - 1] + 1; i < R[t]; ++i) {
      prod = prod.times(chain.transitions[i]);
      prod.normalize_rows();
    }
    rc.transitions.push_back(prod);
  }
  return rc;
}

namespace {

// Appends the next count-distribution column.  Column l holds
// B_{k,l,q} for k = 1..s at positions [k-1].
void append_column(const RestrictedChain& rc, CountDistributionTables& t) {
  const std::size_t s = t.s;
  const std::size_t l = t.b0.size();
  std::vector<double> col0(s), col1(s);
  if (l == 0) {
    col0[0] = 0.0;
    col1[0] = rc.init1;
    for (std::size_t k = 1; k < s; ++k) {
      col0[k] = 0.0;
      col1[k] = col1[k - 1] * rc.transitions[k - 1].m11;
    }
  } else {
    const auto& prev0 = t.b0[l - 1];
    const auto& prev1 = t.b1[l - 1];
    col0[0] = rc.init0;
    col1[0] = rc.init1;
    for (std::size_t k = 1; k < s; ++k) {
      const Mat2& pi = rc.transitions[k - 1];
      col0[k] = prev0[k - 1] * pi.m00 + prev1[k - 1] * pi.m10;
      col1[k] = col0[k - 1] * pi.m01 + col1[k - 1] * pi.m11;
    }
  }
  t.b0.push_back(std::move(col0));
  t.b1.push_back(std::move(col1));
}

CountDistributionTables make_tables(const RestrictedChain& rc,
                                    std::size_t max_columns,
                                    double stop_at_cumulative) {
  CountDistributionTables t;
  t.s = rc.size();
  while (t.b0.size() < max_columns) {
    append_column(rc, t);
    if (t.cumulative(t.b0.size() - 1) >= stop_at_cumulative) break;
  }
  return t;
}

}  // namespace

CountDistributionTables count_tables(const RestrictedChain& rc, double beta) {
  if (!(beta > 0.0 && beta < 1.0))
    throw InvalidParameterError("count_tables: beta must lie in (0,1)");
  return make_tables(rc, rc.size() + 1, 1.0 - beta);
}

CountDistributionTables count_tables_full(const RestrictedChain& rc) {
  return make_tables(rc, rc.size() + 1, 2.0);  // unreachable threshold
}

double upper_bound_from_chain(const PosteriorChain& chain, const Selection& R,
                              double beta) {
  if (!(beta > 0.0 && beta < 1.0))
    throw InvalidParameterError("upper_bound: beta must lie in (0,1)");
  if (R.empty()) return 0.0;
  const RestrictedChain rc = restrict_chain(chain, R);
  const double s = static_cast<double>(rc.size());
  CountDistributionTables t;
  t.s = rc.size();
  for (std::size_t n = 0; n <= rc.size(); ++n) {
    if (n == rc.size()) return 1.0;  // cumulative at s is 1 by construction
    append_column(rc, t);
    if (t.cumulative(n) >= 1.0 - beta)
      return static_cast<double>(n) / s;
  }
  return 1.0;
}

double lower_bound_from_chain(const PosteriorChain& chain, const Selection& R,
                              double beta) {
  if (!(beta > 0.0 && beta < 1.0))
    throw InvalidParameterError("lower_bound: beta must lie in (0,1)");
  if (R.empty()) return 0.0;
  const RestrictedChain rc = restrict_chain(chain, R);
  const double s = static_cast<double>(rc.size());
  // L = max{n : B_{s,n-1,0} + B_{s,n-1,1} <= beta} with B_{s,-1,.} = 0,
  // so n = 0 is always feasible and the answer is the first column whose
  // cumulative exceeds beta.
  CountDistributionTables t;
  t.s = rc.size();
  for (std::size_t l = 0; l < rc.size(); ++l) {
    append_column(rc, t);
    if (t.cumulative(l) > beta) return static_cast<double>(l) / s;
  }
  return 1.0;
}

double upper_bound(const ModelParams& params, std::span<const double> x,
                   const Selection& R, double beta) {
  if (R.empty()) return 0.0;
  return upper_bound_from_chain(posterior_chain(params, x), R, beta);
}

double lower_bound(const ModelParams& params, std::span<const double> x,
                   const Selection& R, double beta) {
  if (R.empty()) return 0.0;
  return lower_bound_from_chain(posterior_chain(params, x), R, beta);
}

FdpInterval posterior_interval_from_chain(const PosteriorChain& chain,
                                          const Selection& R, double alpha,
                                          double gamma) {
  if (!(alpha > 0.0 && alpha < 1.0) || !(gamma > 0.0 && gamma < 1.0))
    throw InvalidParameterError(
        "posterior_interval: alpha and gamma must lie in (0,1)");
  FdpInterval interval;
  interval.beta_total = alpha;
  interval.gamma_split = gamma;
  if (R.empty()) return interval;
  interval.lower = lower_bound_from_chain(chain, R, alpha * gamma);
  interval.upper = upper_bound_from_chain(chain, R, alpha * (1.0 - gamma));
  if (interval.lower > interval.upper) interval.lower = interval.upper;
  return interval;
}

FdpInterval posterior_interval(const ModelParams& params,
                               std::span<const double> x, const Selection& R,
                               double alpha, double gamma) {
  if (R.empty()) {
    FdpInterval interval;
    interval.beta_total = alpha;
    interval.gamma_split = gamma;
    return interval;
  }
  return posterior_interval_from_chain(posterior_chain(params, x), R, alpha,
                                       gamma);
}

}  // namespace hmmfdp
