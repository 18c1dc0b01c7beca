#ifndef HMMFDP_HMM_HPP
#define HMMFDP_HMM_HPP

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "hmmfdp/emission.hpp"
#include "hmmfdp/rng.hpp"

namespace hmmfdp {

// 2x2 row-stochastic transition matrix over states {0 = null, 1 = active}.
// Construction enforces: entries strictly in (0,1), rows summing to 1 within
// 1e-12, and full rank (a00 != a10 beyond 1e-12).
struct TransitionMatrix {
  double a00, a01, a10, a11;

  TransitionMatrix(double a00, double a01, double a10, double a11);

  double entry(int q, int qp) const {
    return q == 0 ? (qp == 0 ? a00 : a01) : (qp == 0 ? a10 : a11);
  }
  double det() const { return a00 * a11 - a01 * a10; }
};

// Stationary distribution (pi0, pi1) = (a10, a01) / (a01 + a10).
std::pair<double, double> stationary_distribution(const TransitionMatrix& A);

// Full HMM parameter: transition matrix plus the two emission densities.
// Rejects detectably identical f0 and f1 (singular model).  null_known
// records whether f0 was given (true) or estimated (false).
struct ModelParams {
  TransitionMatrix A;
  EmissionDensity f0;
  EmissionDensity f1;
  bool null_known = true;

  ModelParams(TransitionMatrix A, EmissionDensity f0, EmissionDensity f1,
              bool null_known = true);
};

// Emission densities evaluated at the observations, floored at 1e-300 so a
// single vanishing density cannot zero out the recursion.  clamp_count is a
// diagnostic: how many values hit the floor.  Throws
// DegenerateLikelihoodError if both densities vanish at the same point.
struct EmissionValues {
  std::vector<double> f0;
  std::vector<double> f1;
  long clamp_count = 0;
};

inline constexpr double kDensityFloor = 1e-300;

EmissionValues evaluate_emissions(const ModelParams& params,
                                  std::span<const double> x);

// Scaled forward-backward pass.  alpha[i] is normalized to unit sum with the
// normalizer logged in log_norm[i]; beta[i] is scaled by the same constants,
// so that sum_q alpha[i][q] * beta[i][q] == 1 for every i and
// log-likelihood = sum(log_norm).
struct ForwardBackward {
  std::vector<std::array<double, 2>> alpha;  // scaled
  std::vector<std::array<double, 2>> beta;   // scaled
  std::vector<double> log_norm;              // log c_i
  std::vector<double> cum_log_norm;          // prefix sums of log_norm
  double log_likelihood = 0.0;

  std::size_t size() const { return alpha.size(); }
  double log_alpha(std::size_t i, int q) const;
  double log_beta(std::size_t i, int q) const;
};

ForwardBackward forward_backward(const TransitionMatrix& A,
                                 std::pair<double, double> init,
                                 const EmissionValues& vals);
ForwardBackward forward_backward(const ModelParams& params,
                                 std::span<const double> x);

// Row-stochastic 2x2 matrix (posterior transition).
struct Mat2 {
  double m00, m01, m10, m11;

  // (r0, r1) * M for a row vector.
  std::pair<double, double> apply_left(double r0, double r1) const {
    return {r0 * m00 + r1 * m10, r0 * m01 + r1 * m11};
  }
  Mat2 times(const Mat2& o) const {
    return {m00 * o.m00 + m01 * o.m10, m00 * o.m01 + m01 * o.m11,
            m10 * o.m00 + m11 * o.m10, m10 * o.m01 + m11 * o.m11};
  }
  void normalize_rows() {
    const double s0 = m00 + m01, s1 = m10 + m11;
    m00 /= s0;
    m01 = 1.0 - m00;
    m10 /= s1;
    m11 = 1.0 - m10;
  }
};

// Law of theta given X: a heterogeneous Markov chain started at
// P(theta_1 = 1 | X) = init_prob_state1 with per-step transition matrices
// transitions[i] mapping position i to i+1 (0-based).  locfdr[i] is the
// local fdr P(theta_i = 0 | X).
struct PosteriorChain {
  double init_prob_state1 = 0.0;
  std::vector<Mat2> transitions;  // size m-1
  std::vector<double> locfdr;     // size m

  std::size_t size() const { return locfdr.size(); }
};

PosteriorChain posterior_chain(const ModelParams& params,
                               std::span<const double> x);
PosteriorChain posterior_chain_from(const ForwardBackward& fb,
                                    const TransitionMatrix& A,
                                    const EmissionValues& vals);

// Pairwise posterior P(theta_{i-1} = q, theta_i = q' | X) for i >= 1
// (0-based), returned as {l00, l01, l10, l11} normalized to unit sum.
std::array<double, 4> pairwise_posterior(const ForwardBackward& fb,
                                         const TransitionMatrix& A,
                                         const EmissionValues& vals,
                                         std::size_t i);

// Draws a stationary chain theta of length m and observations x ~ f_theta.
std::pair<std::vector<int>, std::vector<double>> sample_hmm(
    const ModelParams& params, std::size_t m, Rng& rng);
std::pair<std::vector<int>, std::vector<double>> sample_hmm(
    const ModelParams& params, std::size_t m, std::uint64_t seed);

// Maximum a posteriori state path; ties broken toward state 0 so decoding
// never over-claims discoveries.
std::vector<int> viterbi(const TransitionMatrix& A,
                         std::pair<double, double> init,
                         const EmissionValues& vals);
std::vector<int> viterbi(const ModelParams& params, std::span<const double> x);

}  // namespace hmmfdp

#endif
