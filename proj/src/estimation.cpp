#include "hmmfdp/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hmmfdp/errors.hpp"
#include "hmmfdp/rng.hpp"

namespace hmmfdp {

double storey_pi0(const PValueVector& p, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0))
    throw InvalidParameterError("storey_pi0: lambda must lie in (0,1)");
  std::size_t count = 0;
  for (double v : p.p)
    if (v > lambda) ++count;
  const double m = static_cast<double>(p.p.size());
  return std::min(1.0, static_cast<double>(count) / (m * (1.0 - lambda)));
}

namespace {

PValueVector null_pvalues(std::span<const double> x,
                          const EmissionDensity& f0) {
  if (f0.is_gaussian()) return exact_pvalues(x, f0);
  PValueVector out;
  out.kind = PValueKind::Exact;
  out.p.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out.p[i] = f0.survival(x[i]);
  return out;
}

TransitionMatrix initial_transition(double pi0, Rng& rng) {
  // a11 uniform over the range keeping the implied a01 inside (0,1),
  // intersected with [0.6, 1).
  double lo = 0.6;
  if (pi0 < 0.5) lo = std::max(lo, 1.0 - pi0 / (1.0 - pi0));
  const double hi = 1.0 - 1e-9;
  const double a11 = lo + (hi - lo) * rng.uniform();
  const auto build = [&](double a11v) {
    const double a10 = 1.0 - a11v;
    const double a01 = (1.0 - pi0) * a10 / pi0;
    return TransitionMatrix(1.0 - a01, a01, a10, a11v);
  };
  try {
    return build(a11);
  } catch (const InvalidParameterError&) {
    // a00 == a10 can collide for one unlucky draw; nudge once.
    return build(a11 > lo + 1e-6 ? a11 - 1e-6 : a11 + 1e-6);
  }
}

double weighted_bandwidth_or(std::span<const double> x,
                             std::span<const double> w, double fallback) {
  try {
    return bandwidth_silverman_weighted(x, w);
  } catch (const EstimationError&) {
    return fallback;  // weight mass collapsed onto (nearly) one point
  }
}

ModelParams swap_states(const ModelParams& p) {
  return ModelParams(
      TransitionMatrix(p.A.a11, p.A.a10, p.A.a01, p.A.a00), p.f1, p.f0,
      p.null_known);
}

}  // namespace

ModelParams initialize(std::span<const double> x, const EmConfig& config,
                       const EmissionDensity& f0, bool null_known,
                       EmTrace* trace) {
  const std::size_t m = x.size();
  if (m < 2) throw EstimationError("initialize: need at least 2 observations");

  const PValueVector p = null_pvalues(x, f0);
  const double pi0 = storey_pi0(p, config.storey_lambda);
  if (pi0 <= 0.0 || pi0 >= 1.0)
    throw EstimationError(
        "initialize: degenerate null proportion estimate (pi0 = " +
        std::to_string(pi0) + ")");

  Rng rng(derive_seed(config.seed, stream::kEmInit));
  const TransitionMatrix A0 = initial_transition(pi0, rng);

  // Alternative start: positive part of (pooled KDE - pi0 f0), renormalized
  // over the observations.
  const double pooled_h = bandwidth_silverman(x);
  const EmissionDensity pooled =
      weighted_kde(x, std::vector<double>(m, 1.0), pooled_h);
  std::vector<double> pooled_vals(m), null_vals(m);
  pooled.density_many(x, pooled_vals);
  f0.density_many(x, null_vals);
  std::vector<double> w(m);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    w[i] = std::max(0.0, pooled_vals[i] - pi0 * null_vals[i]);
    total += w[i];
  }
  if (total <= 0.0) {
    // no detectable signal: flat remainder over all observations
    std::fill(w.begin(), w.end(), 1.0);
    if (trace) trace->degenerate_init = true;
  }
  const double h1 = weighted_bandwidth_or(x, w, pooled_h);
  EmissionDensity f1_init = weighted_kde(x, w, h1);
  return ModelParams(A0, f0, std::move(f1_init), null_known);
}

namespace {

struct EmOutcome {
  ModelParams params;
  EmTrace trace;
};

EmOutcome em_loop(std::span<const double> x, const EmConfig& config,
                  ModelParams init, bool update_f0, EmTrace trace) {
  const std::size_t m = x.size();
  if (m < 2) throw EstimationError("EM: need at least 2 observations");

  ModelParams cur = std::move(init);
  EmissionValues vals = evaluate_emissions(cur, x);
  ForwardBackward fb =
      forward_backward(cur.A, stationary_distribution(cur.A), vals);
  double ll = fb.log_likelihood;
  trace.iterations.push_back(
      {{cur.A.a00, cur.A.a01, cur.A.a10, cur.A.a11},
       std::numeric_limits<double>::quiet_NaN(),
       ll});

  ModelParams best = cur;
  double best_ll = ll;
  std::size_t best_iter = 0;

  std::vector<double> w1(m), w0(m);
  int t = 0;
  for (t = 1; t <= config.max_iters; ++t) {
    // E-step quantities at the current parameters.
    for (std::size_t i = 0; i < m; ++i) {
      const double p0 = fb.alpha[i][0] * fb.beta[i][0];
      const double p1 = fb.alpha[i][1] * fb.beta[i][1];
      w1[i] = p1 / (p0 + p1);
      w0[i] = 1.0 - w1[i];
    }
    double n00 = 0.0, n01 = 0.0, n10 = 0.0, n11 = 0.0;
    for (std::size_t i = 1; i < m; ++i) {
      const auto l = pairwise_posterior(fb, cur.A, vals, i);
      n00 += l[0];
      n01 += l[1];
      n10 += l[2];
      n11 += l[3];
    }
    const auto clamp_unit = [](double v) {
      return std::min(1.0 - 1e-14, std::max(1e-14, v));
    };
    const double a00 = clamp_unit(n00 / (n00 + n01));
    const double a10 = clamp_unit(n10 / (n10 + n11));
    TransitionMatrix A_next(a00, 1.0 - a00, a10, 1.0 - a10);

    const double h1 = weighted_bandwidth_or(
        x, w1, cur.f1.is_kernel_mixture() ? cur.f1.mixture_spec().bandwidth
                                          : bandwidth_silverman(x));
    EmissionDensity f1_next = weighted_kde(x, w1, h1);
    EmissionDensity f0_next = cur.f0;
    if (update_f0) {
      const double h0 = weighted_bandwidth_or(
          x, w0, cur.f0.is_kernel_mixture() ? cur.f0.mixture_spec().bandwidth
                                            : bandwidth_silverman(x));
      f0_next = weighted_kde(x, w0, h0);
    }

    ModelParams next(A_next, std::move(f0_next), std::move(f1_next),
                     cur.null_known);
    EmissionValues next_vals = evaluate_emissions(next, x);
    ForwardBackward next_fb =
        forward_backward(next.A, stationary_distribution(next.A), next_vals);
    const double next_ll = next_fb.log_likelihood;

    double change = std::max(
        std::max(std::abs(next.A.a00 - cur.A.a00),
                 std::abs(next.A.a01 - cur.A.a01)),
        std::max(std::abs(next.A.a10 - cur.A.a10),
                 std::abs(next.A.a11 - cur.A.a11)));
    for (std::size_t i = 0; i < m; ++i) {
      change = std::max(change, std::abs(next_vals.f1[i] - vals.f1[i]));
      if (update_f0)
        change = std::max(change, std::abs(next_vals.f0[i] - vals.f0[i]));
    }

    trace.iterations.push_back(
        {{next.A.a00, next.A.a01, next.A.a10, next.A.a11}, change, next_ll});
    if (next_ll < ll - 1e-8) ++trace.monotonicity_violations;
    if (next_ll > best_ll) {
      best = next;
      best_ll = next_ll;
      best_iter = static_cast<std::size_t>(t);
    }

    cur = std::move(next);
    vals = std::move(next_vals);
    fb = std::move(next_fb);
    ll = next_ll;

    if (change < config.tol) {
      trace.converged = true;
      break;
    }
  }
  trace.iteration_count =
      static_cast<std::size_t>(std::min(t, config.max_iters));
  trace.returned_iteration = best_iter;
  trace.best_log_likelihood = best_ll;
  return {std::move(best), std::move(trace)};
}

}  // namespace

std::pair<ModelParams, EmTrace> em_fit_known_f0(std::span<const double> x,
                                                const EmissionDensity& f0,
                                                const EmConfig& config) {
  EmTrace trace;
  ModelParams init = initialize(x, config, f0, true, &trace);
  auto out = em_loop(x, config, std::move(init), false, std::move(trace));
  return {std::move(out.params), std::move(out.trace)};
}

std::pair<ModelParams, EmTrace> em_fit_known_f0(std::span<const double> x,
                                                const EmissionDensity& f0,
                                                const EmConfig& config,
                                                const ModelParams& init) {
  (void)f0;
  auto out = em_loop(x, config, init, false, EmTrace{});
  return {std::move(out.params), std::move(out.trace)};
}

std::pair<ModelParams, EmTrace> em_fit_unknown_f0(
    std::span<const double> x, const EmConfig& config,
    const EmissionDensity& f0_init) {
  EmTrace trace;
  ModelParams init = initialize(x, config, f0_init, false, &trace);
  auto out = em_loop(x, config, std::move(init), true, std::move(trace));
  ModelParams labeled = out.params;
  const auto [pi0, pi1] = stationary_distribution(labeled.A);
  const bool swap = config.null_label_rule == NullLabelRule::Predominant
                        ? pi1 > pi0
                        : std::abs(labeled.f1.mean()) <
                              std::abs(labeled.f0.mean());
  if (swap) labeled = swap_states(labeled);
  return {std::move(labeled), std::move(out.trace)};
}

std::pair<ModelParams, EmTrace> em_fit_unknown_f0(
    std::span<const double> x, const EmConfig& config,
    const EmissionDensity& f0_init, const ModelParams& init) {
  (void)f0_init;
  auto out = em_loop(x, config, init, true, EmTrace{});
  ModelParams labeled = out.params;
  const auto [pi0, pi1] = stationary_distribution(labeled.A);
  const bool swap = config.null_label_rule == NullLabelRule::Predominant
                        ? pi1 > pi0
                        : std::abs(labeled.f1.mean()) <
                              std::abs(labeled.f0.mean());
  if (swap) labeled = swap_states(labeled);
  return {std::move(labeled), std::move(out.trace)};
}

}  // namespace hmmfdp
