#include "hmmfdp/hmm.hpp"

#include <cmath>
#include <string>

#include "hmmfdp/errors.hpp"

namespace hmmfdp {

namespace {

void check_row(double a, double b, const char* row) {
  if (!(std::isfinite(a) && std::isfinite(b)))
    throw InvalidParameterError(std::string("transition matrix: non-finite row ") + row);
  if (a <= 0.0 || a >= 1.0 || b <= 0.0 || b >= 1.0)
    throw InvalidParameterError(
        std::string("transition matrix: entries of row ") + row +
        " must lie strictly inside (0,1)");
  if (std::abs(a + b - 1.0) > 1e-12)
    throw InvalidParameterError(std::string("transition matrix: row ") + row +
                                " does not sum to 1");
}

}  // namespace

TransitionMatrix::TransitionMatrix(double a00, double a01, double a10,
                                   double a11)
    : a00(a00), a01(a01), a10(a10), a11(a11) {
  check_row(a00, a01, "0");
  check_row(a10, a11, "1");
  if (std::abs(a00 - a10) <= 1e-12)
    throw InvalidParameterError(
        "transition matrix: rank deficient (a00 == a10), hidden states are "
        "not identifiable");
}

std::pair<double, double> stationary_distribution(const TransitionMatrix& A) {
  const double denom = A.a01 + A.a10;
  const double pi0 = A.a10 / denom;
  return {pi0, 1.0 - pi0};
}

ModelParams::ModelParams(TransitionMatrix A, EmissionDensity f0,
                         EmissionDensity f1, bool null_known)
    : A(A), f0(std::move(f0)), f1(std::move(f1)), null_known(null_known) {
  if (this->f0.identical_to(this->f1))
    throw InvalidParameterError(
        "model: f0 and f1 are identical, the model is singular");
}

EmissionValues evaluate_emissions(const ModelParams& params,
                                  std::span<const double> x) {
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]))
      throw DataError("observation " + std::to_string(i + 1) +
                      " is not finite");
  EmissionValues vals;
  vals.f0.resize(x.size());
  vals.f1.resize(x.size());
  params.f0.density_many(x, vals.f0);
  params.f1.density_many(x, vals.f1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (vals.f0[i] <= 0.0 && vals.f1[i] <= 0.0)
      throw DegenerateLikelihoodError(
          i, "both emission densities vanish at observation " +
                 std::to_string(i + 1));
    if (vals.f0[i] < kDensityFloor) {
      vals.f0[i] = kDensityFloor;
      ++vals.clamp_count;
    }
    if (vals.f1[i] < kDensityFloor) {
      vals.f1[i] = kDensityFloor;
      ++vals.clamp_count;
    }
  }
  return vals;
}

double ForwardBackward::log_alpha(std::size_t i, int q) const {
  return std::log(alpha[i][static_cast<std::size_t>(q)]) + cum_log_norm[i];
}

double ForwardBackward::log_beta(std::size_t i, int q) const {
  return std::log(beta[i][static_cast<std::size_t>(q)]) + log_likelihood -
         cum_log_norm[i];
}

ForwardBackward forward_backward(const TransitionMatrix& A,
                                 std::pair<double, double> init,
                                 const EmissionValues& vals) {
  const std::size_t m = vals.f0.size();
  if (m == 0) throw DataError("empty observation vector");

  ForwardBackward fb;
  fb.alpha.resize(m);
  fb.beta.resize(m);
  fb.log_norm.resize(m);

  double a0 = init.first * vals.f0[0];
  double a1 = init.second * vals.f1[0];
  double c = a0 + a1;
  if (c <= 0.0) throw DegenerateLikelihoodError(0, "forward recursion underflow");
  fb.alpha[0] = {a0 / c, a1 / c};
  fb.log_norm[0] = std::log(c);

  for (std::size_t i = 1; i < m; ++i) {
    const auto& prev = fb.alpha[i - 1];
    a0 = vals.f0[i] * (prev[0] * A.a00 + prev[1] * A.a10);
    a1 = vals.f1[i] * (prev[0] * A.a01 + prev[1] * A.a11);
    c = a0 + a1;
    if (c <= 0.0)
      throw DegenerateLikelihoodError(i, "forward recursion underflow");
    fb.alpha[i] = {a0 / c, a1 / c};
    fb.log_norm[i] = std::log(c);
  }

  fb.beta[m - 1] = {1.0, 1.0};
  for (std::size_t i = m - 1; i-- > 0;) {
    const auto& next = fb.beta[i + 1];
    const double inv_c = std::exp(-fb.log_norm[i + 1]);
    const double e0 = vals.f0[i + 1] * next[0];
    const double e1 = vals.f1[i + 1] * next[1];
    fb.beta[i] = {(A.a00 * e0 + A.a01 * e1) * inv_c,
                  (A.a10 * e0 + A.a11 * e1) * inv_c};
  }

  fb.cum_log_norm.resize(m);
  double ll = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    ll += fb.log_norm[i];
    fb.cum_log_norm[i] = ll;
  }
  fb.log_likelihood = ll;
  return fb;
}

ForwardBackward forward_backward(const ModelParams& params,
                                 std::span<const double> x) {
  return forward_backward(params.A, stationary_distribution(params.A),
                          evaluate_emissions(params, x));
}

PosteriorChain posterior_chain_from(const ForwardBackward& fb,
                                    const TransitionMatrix& A,
                                    const EmissionValues& vals) {
  const std::size_t m = fb.size();
  PosteriorChain chain;
  chain.locfdr.resize(m);
  chain.transitions.reserve(m > 0 ? m - 1 : 0);

  for (std::size_t i = 0; i < m; ++i) {
    const double p0 = fb.alpha[i][0] * fb.beta[i][0];
    const double p1 = fb.alpha[i][1] * fb.beta[i][1];
    chain.locfdr[i] = p0 / (p0 + p1);
  }
  chain.init_prob_state1 = 1.0 - chain.locfdr[0];

  for (std::size_t i = 1; i < m; ++i) {
    const double inv_c = std::exp(-fb.log_norm[i]);
    const double e0 = vals.f0[i] * fb.beta[i][0] * inv_c;
    const double e1 = vals.f1[i] * fb.beta[i][1] * inv_c;
    Mat2 pi{A.a00 * e0 / fb.beta[i - 1][0], A.a01 * e1 / fb.beta[i - 1][0],
            A.a10 * e0 / fb.beta[i - 1][1], A.a11 * e1 / fb.beta[i - 1][1]};
    pi.normalize_rows();
    chain.transitions.push_back(pi);
  }
  return chain;
}

PosteriorChain posterior_chain(const ModelParams& params,
                               std::span<const double> x) {
  const EmissionValues vals = evaluate_emissions(params, x);
  const ForwardBackward fb =
      forward_backward(params.A, stationary_distribution(params.A), vals);
  return posterior_chain_from(fb, params.A, vals);
}

std::array<double, 4> pairwise_posterior(const ForwardBackward& fb,
                                         const TransitionMatrix& A,
                                         const EmissionValues& vals,
                                         std::size_t i) {
  const double inv_c = std::exp(-fb.log_norm[i]);
  const double e0 = vals.f0[i] * fb.beta[i][0] * inv_c;
  const double e1 = vals.f1[i] * fb.beta[i][1] * inv_c;
  std::array<double, 4> l{fb.alpha[i - 1][0] * A.a00 * e0,
                          fb.alpha[i - 1][0] * A.a01 * e1,
                          fb.alpha[i - 1][1] * A.a10 * e0,
                          fb.alpha[i - 1][1] * A.a11 * e1};
  const double total = l[0] + l[1] + l[2] + l[3];
  for (auto& v : l) v /= total;
  return l;
}

std::pair<std::vector<int>, std::vector<double>> sample_hmm(
    const ModelParams& params, std::size_t m, Rng& rng) {
  if (m == 0) throw DataError("sample_hmm: m must be at least 1");
  const auto [pi0, pi1] = stationary_distribution(params.A);
  std::vector<int> theta(m);
  theta[0] = rng.uniform() < pi1 ? 1 : 0;
  for (std::size_t i = 1; i < m; ++i) {
    const double p1 = theta[i - 1] == 0 ? params.A.a01 : params.A.a11;
    theta[i] = rng.uniform() < p1 ? 1 : 0;
  }
  std::vector<double> x(m);
  for (std::size_t i = 0; i < m; ++i)
    x[i] = (theta[i] == 0 ? params.f0 : params.f1).sample(rng);
  return {std::move(theta), std::move(x)};
}

std::pair<std::vector<int>, std::vector<double>> sample_hmm(
    const ModelParams& params, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  return sample_hmm(params, m, rng);
}

std::vector<int> viterbi(const TransitionMatrix& A,
                         std::pair<double, double> init,
                         const EmissionValues& vals) {
  const std::size_t m = vals.f0.size();
  if (m == 0) throw DataError("empty observation vector");

  const double la00 = std::log(A.a00), la01 = std::log(A.a01);
  const double la10 = std::log(A.a10), la11 = std::log(A.a11);

  std::vector<std::array<unsigned char, 2>> back(m);
  double d0 = std::log(init.first) + std::log(vals.f0[0]);
  double d1 = std::log(init.second) + std::log(vals.f1[0]);
  for (std::size_t i = 1; i < m; ++i) {
    const double t00 = d0 + la00, t10 = d1 + la10;
    const double t01 = d0 + la01, t11 = d1 + la11;
    // ties resolved toward predecessor state 0
    const double b0 = std::max(t00, t10);
    const double b1 = std::max(t01, t11);
    back[i][0] = t10 > t00 ? 1 : 0;
    back[i][1] = t11 > t01 ? 1 : 0;
    d0 = b0 + std::log(vals.f0[i]);
    d1 = b1 + std::log(vals.f1[i]);
  }
  std::vector<int> path(m);
  path[m - 1] = d1 > d0 ? 1 : 0;  // tie -> state 0
  for (std::size_t i = m - 1; i-- > 0;)
    path[i] = back[i + 1][static_cast<std::size_t>(path[i + 1])];
  return path;
}

std::vector<int> viterbi(const ModelParams& params,
                         std::span<const double> x) {
  return viterbi(params.A, stationary_distribution(params.A),
                 evaluate_emissions(params, x));
}

}  // namespace hmmfdp
