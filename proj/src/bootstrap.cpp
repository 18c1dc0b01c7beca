#include "hmmfdp/bootstrap.hpp"

#include <algorithm>
#include <cmath>

#include "hmmfdp/errors.hpp"
#include "hmmfdp/parallel.hpp"
#include "hmmfdp/rng.hpp"

namespace hmmfdp {

double upper_quantile_correction(const ReplicateDiffs& diffs, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw InvalidParameterError("quantile: gamma must lie in (0,1)");
  if (diffs.d.empty()) throw InvalidParameterError("quantile: no replicates");
  std::vector<double> sorted = diffs.d;
  std::sort(sorted.begin(), sorted.end());
  const double b = static_cast<double>(sorted.size());
  std::size_t rank = static_cast<std::size_t>(std::ceil((1.0 - gamma) * b));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

double lower_quantile_correction(const ReplicateDiffs& diffs, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw InvalidParameterError("quantile: gamma must lie in (0,1)");
  if (diffs.d.empty()) throw InvalidParameterError("quantile: no replicates");
  std::vector<double> sorted = diffs.d;
  std::sort(sorted.begin(), sorted.end());
  const double b = static_cast<double>(sorted.size());
  std::size_t rank = static_cast<std::size_t>(std::floor(gamma * b)) + 1;
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

std::pair<ModelParams, EmTrace> EstimationContext::refit(
    std::span<const double> x, const ModelParams& warm_start,
    std::uint64_t seed) const {
  EmConfig cfg = em;
  cfg.seed = seed;
  if (null_known) {
    const EmissionDensity& null_density = f0 ? *f0 : warm_start.f0;
    return em_fit_known_f0(x, null_density, cfg, warm_start);
  }
  return em_fit_unknown_f0(x, cfg, warm_start.f0, warm_start);
}

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

struct ReplicateSlot {
  bool failed = false;
  int refit_iterations = 0;
  bool refit_converged = false;
  // [policy * n_methods + method]
  std::vector<double> d_upper;
  std::vector<double> e_lower;
  std::vector<double> fdp_star;  // [policy]
};

}  // namespace

BootstrapBatchResult run_bootstrap_batch(const BootstrapBatchRequest& req) {
  if (req.B < 1) throw InvalidParameterError("bootstrap: B must be >= 1");
  if (!(req.beta > 0.0 && req.beta < 1.0))
    throw InvalidParameterError("bootstrap: beta must lie in (0,1)");
  if (req.fitted == nullptr || req.est == nullptr)
    throw InvalidParameterError("bootstrap: fitted model and estimation "
                                "context are required");
  for (const auto& mreq : req.methods) {
    if (mreq.variant != BootVariant::Boot3 && mreq.variant != BootVariant::Naive &&
        !(mreq.delta > 0.0 && mreq.delta < 1.0))
      throw InvalidParameterError("bootstrap: delta must lie in (0,1)");
    if (mreq.beta_override != 0.0 &&
        !(mreq.beta_override > 0.0 && mreq.beta_override < 1.0))
      throw InvalidParameterError("bootstrap: beta must lie in (0,1)");
  }

  const std::size_t n_pol = req.policies.size();
  const std::size_t n_met = req.methods.size();
  const std::size_t m = req.x.empty() ? 0 : req.x.size();

  bool need_refit = false, need_star_ctx = false, need_star_refit = false,
       need_x_refit = false;
  for (const auto& mreq : req.methods) {
    switch (mreq.variant) {
      case BootVariant::Boot1:
        need_refit = need_star_ctx = need_star_refit = true;
        break;
      case BootVariant::Boot2:
        need_refit = need_x_refit = true;
        break;
      case BootVariant::Boot3:
        need_refit = need_star_ctx = need_star_refit = true;
        break;
      case BootVariant::Naive:
        need_star_ctx = true;
        break;
    }
  }
  if (need_x_refit && (m == 0 || req.ctx == nullptr))
    throw InvalidParameterError(
        "bootstrap: boot2 needs the observed data and its context");

  const auto total_of = [&](const BootMethodRequest& mr) {
    return mr.beta_override > 0.0 ? mr.beta_override : req.beta;
  };
  const auto level_of = [&](const BootMethodRequest& mr) {
    const double beta = total_of(mr);
    return mr.variant == BootVariant::Boot3 ? beta : beta * (1.0 - mr.delta);
  };

  // Inner plug-in bounds on the observed data, shared by every replicate.
  std::vector<double> plugin_u(n_pol * n_met, 0.0), plugin_l(n_pol * n_met, 0.0);
  if (req.ctx != nullptr) {
    for (std::size_t p = 0; p < n_pol; ++p) {
      for (std::size_t mi = 0; mi < n_met; ++mi) {
        if (req.methods[mi].variant == BootVariant::Naive) continue;
        const Selection& R = req.selections_on_x[p];
        const double lambda = level_of(req.methods[mi]);
        plugin_u[p * n_met + mi] =
            upper_bound_from_chain(req.ctx->chain, R, lambda);
        plugin_l[p * n_met + mi] =
            lower_bound_from_chain(req.ctx->chain, R, lambda);
      }
    }
  }

  const std::size_t rep_m = req.replicate_length > 0 ? req.replicate_length : m;
  if (rep_m == 0)
    throw InvalidParameterError(
        "bootstrap: replicate length unknown (no observed data and no "
        "explicit replicate_length)");

  std::vector<ReplicateSlot> slots(static_cast<std::size_t>(req.B));
  const ModelParams& fitted = *req.fitted;

  parallel_for(static_cast<std::size_t>(req.B), req.threads, [&](std::size_t b) {
    ReplicateSlot& slot = slots[b];
    slot.d_upper.assign(n_pol * n_met, 0.0);
    slot.e_lower.assign(n_pol * n_met, 0.0);
    slot.fdp_star.assign(n_pol, 0.0);
    try {
      const std::uint64_t rep_seed =
          derive_seed(req.seed, stream::kReplicate, b);
      Rng rng(rep_seed);
      auto [theta_star, x_star] = sample_hmm(fitted, rep_m, rng);

      ModelParams refit = fitted;
      if (need_refit) {
        auto [params, trace] = req.est->refit(x_star, fitted, rep_seed);
        refit = std::move(params);
        slot.refit_iterations = static_cast<int>(trace.iteration_count);
        slot.refit_converged = trace.converged;
      }

      std::optional<PolicyContext> ctx_star;
      std::vector<Selection> sel_star;
      if (need_star_ctx) {
        ctx_star = PolicyContext::make(x_star, fitted);
        sel_star.reserve(n_pol);
        for (const auto& policy : req.policies)
          sel_star.push_back(evaluate_policy(policy, *ctx_star, theta_star));
        for (std::size_t p = 0; p < n_pol; ++p)
          slot.fdp_star[p] = fdp(theta_star, sel_star[p]);
      }

      std::optional<PosteriorChain> chain_star_refit;
      if (need_star_refit) chain_star_refit = posterior_chain(refit, x_star);
      std::optional<PosteriorChain> chain_x_refit;
      if (need_x_refit) chain_x_refit = posterior_chain(refit, req.x);

      for (std::size_t p = 0; p < n_pol; ++p) {
        for (std::size_t mi = 0; mi < n_met; ++mi) {
          const auto& mreq = req.methods[mi];
          const double lambda = level_of(mreq);
          const std::size_t cell = p * n_met + mi;
          switch (mreq.variant) {
            case BootVariant::Boot1: {
              const Selection& S = sel_star[p];
              slot.d_upper[cell] =
                  upper_bound_from_chain(ctx_star->chain, S, lambda) -
                  upper_bound_from_chain(*chain_star_refit, S, lambda);
              slot.e_lower[cell] =
                  lower_bound_from_chain(ctx_star->chain, S, lambda) -
                  lower_bound_from_chain(*chain_star_refit, S, lambda);
              break;
            }
            case BootVariant::Boot2: {
              const Selection& R = req.selections_on_x[p];
              slot.d_upper[cell] =
                  plugin_u[cell] -
                  upper_bound_from_chain(*chain_x_refit, R, lambda);
              slot.e_lower[cell] =
                  plugin_l[cell] -
                  lower_bound_from_chain(*chain_x_refit, R, lambda);
              break;
            }
            case BootVariant::Boot3: {
              const Selection& S = sel_star[p];
              slot.d_upper[cell] =
                  slot.fdp_star[p] -
                  upper_bound_from_chain(*chain_star_refit, S, lambda);
              slot.e_lower[cell] =
                  slot.fdp_star[p] -
                  lower_bound_from_chain(*chain_star_refit, S, lambda);
              break;
            }
            case BootVariant::Naive:
              break;  // fdp_star is all that is needed
          }
        }
      }
    } catch (const std::exception&) {
      slot.failed = true;
    }
  });

  BootstrapBatchResult result;
  result.replicates.reserve(slots.size());
  for (std::size_t b = 0; b < slots.size(); ++b) {
    const auto& slot = slots[b];
    result.replicates.push_back({static_cast<int>(b), 0.0,
                                 slot.refit_iterations, slot.refit_converged,
                                 slot.failed});
    if (slot.failed) ++result.failures;
  }
  if (10 * result.failures > req.B)
    throw EstimationError("bootstrap: more than 10% of replicates failed (" +
                          std::to_string(result.failures) + " of " +
                          std::to_string(req.B) + ")");

  result.cells.assign(n_pol, std::vector<BatchCell>(n_met));
  for (std::size_t p = 0; p < n_pol; ++p) {
    for (std::size_t mi = 0; mi < n_met; ++mi) {
      const auto& mreq = req.methods[mi];
      BatchCell& cell = result.cells[p][mi];
      const std::size_t flat = p * n_met + mi;
      const double beta = total_of(mreq);
      if (mreq.variant == BootVariant::Naive) {
        ReplicateDiffs fdps{{}, 3};
        for (const auto& slot : slots)
          if (!slot.failed) fdps.d.push_back(slot.fdp_star[p]);
        cell.upper = upper_quantile_correction(fdps, beta);
        cell.lower = lower_quantile_correction(fdps, beta);
        continue;
      }
      const double gamma =
          mreq.variant == BootVariant::Boot3 ? beta : beta * mreq.delta;
      cell.upper_plugin = plugin_u[flat];
      cell.lower_plugin = plugin_l[flat];
      cell.d_upper.variant_index = cell.e_lower.variant_index =
          mreq.variant == BootVariant::Boot1   ? 1
          : mreq.variant == BootVariant::Boot2 ? 2
                                               : 3;
      for (const auto& slot : slots) {
        if (slot.failed) continue;
        cell.d_upper.d.push_back(slot.d_upper[flat]);
        cell.e_lower.d.push_back(slot.e_lower[flat]);
      }
      cell.q_upper = upper_quantile_correction(cell.d_upper, gamma);
      cell.q_lower = lower_quantile_correction(cell.e_lower, gamma);
      const double corr_u =
          req.positive_part ? std::max(cell.q_upper, 0.0) : cell.q_upper;
      const double corr_l =
          req.positive_part ? std::min(cell.q_lower, 0.0) : cell.q_lower;
      cell.upper = clamp01(cell.upper_plugin + corr_u);
      cell.lower = clamp01(cell.lower_plugin + corr_l);
    }
  }
  return result;
}

namespace {

BootstrapBound single_method(std::span<const double> x,
                             const SelectionPolicy* policy,
                             const Selection* fixed_set,
                             const ModelParams& fitted,
                             const EstimationContext& est,
                             const BootstrapConfig& config, bool upper) {
  BootstrapBatchRequest req;
  req.x = x;
  req.fitted = &fitted;
  req.est = &est;
  req.B = config.B;
  req.beta = config.beta;
  req.seed = config.seed;
  req.threads = config.threads;
  req.positive_part = config.positive_part;
  req.replicate_length = config.replicate_length;
  req.methods.push_back({config.variant, config.delta});

  std::optional<PolicyContext> ctx;
  if (!x.empty()) {
    ctx = PolicyContext::make(x, fitted);
    req.ctx = &*ctx;
  }
  if (policy != nullptr) {
    req.policies.push_back(*policy);
    if (ctx)
      req.selections_on_x.push_back(evaluate_policy(*policy, *ctx));
    else
      req.selections_on_x.emplace_back();
  } else {
    req.policies.push_back(
        SelectionPolicy{FixedSetPolicy{*fixed_set}, "fixed"});
    req.selections_on_x.push_back(*fixed_set);
  }

  BootstrapBatchResult batch = run_bootstrap_batch(req);
  const BatchCell& cell = batch.cells[0][0];

  BootstrapBound out;
  out.bound = upper ? cell.upper : cell.lower;
  out.inner_plugin = upper ? cell.upper_plugin : cell.lower_plugin;
  out.raw_correction = upper ? cell.q_upper : cell.q_lower;
  out.correction = out.bound - out.inner_plugin;
  out.inner_level = config.variant == BootVariant::Boot3
                        ? config.beta
                        : config.beta * (1.0 - config.delta);
  out.quantile_level = config.variant == BootVariant::Boot3
                           ? config.beta
                           : config.beta * config.delta;
  out.failures = batch.failures;
  out.replicates = std::move(batch.replicates);
  const auto& diffs = upper ? cell.d_upper.d : cell.e_lower.d;
  std::size_t k = 0;
  for (auto& rep : out.replicates)
    if (!rep.failed && k < diffs.size()) rep.d_value = diffs[k++];
  return out;
}

BootstrapConfig with_variant(BootstrapConfig config, BootVariant v) {
  config.variant = v;
  return config;
}

}  // namespace

BootstrapBound boot1_upper(std::span<const double> x,
                           const SelectionPolicy& policy,
                           const ModelParams& fitted,
                           const EstimationContext& est,
                           const BootstrapConfig& config) {
  return single_method(x, &policy, nullptr, fitted, est,
                       with_variant(config, BootVariant::Boot1), true);
}

BootstrapBound boot2_upper(std::span<const double> x, const Selection& R,
                           const ModelParams& fitted,
                           const EstimationContext& est,
                           const BootstrapConfig& config) {
  return single_method(x, nullptr, &R, fitted, est,
                       with_variant(config, BootVariant::Boot2), true);
}

BootstrapBound boot3_upper(std::span<const double> x,
                           const SelectionPolicy& policy,
                           const ModelParams& fitted,
                           const EstimationContext& est,
                           const BootstrapConfig& config) {
  return single_method(x, &policy, nullptr, fitted, est,
                       with_variant(config, BootVariant::Boot3), true);
}

BootstrapBound naive_upper(const SelectionPolicy& policy,
                           const ModelParams& fitted,
                           const EstimationContext& est,
                           const BootstrapConfig& config) {
  return single_method({}, &policy, nullptr, fitted, est,
                       with_variant(config, BootVariant::Naive), true);
}

BootstrapBound boot1_lower(std::span<const double> x,
                           const SelectionPolicy& policy,
                           const ModelParams& fitted,
                           const EstimationContext& est,
                           const BootstrapConfig& config) {
  return single_method(x, &policy, nullptr, fitted, est,
                       with_variant(config, BootVariant::Boot1), false);
}

BootstrapBound boot2_lower(std::span<const double> x, const Selection& R,
                           const ModelParams& fitted,
                           const EstimationContext& est,
                           const BootstrapConfig& config) {
  return single_method(x, nullptr, &R, fitted, est,
                       with_variant(config, BootVariant::Boot2), false);
}

BootstrapBound boot3_lower(std::span<const double> x,
                           const SelectionPolicy& policy,
                           const ModelParams& fitted,
                           const EstimationContext& est,
                           const BootstrapConfig& config) {
  return single_method(x, &policy, nullptr, fitted, est,
                       with_variant(config, BootVariant::Boot3), false);
}

BootstrapBound naive_lower(const SelectionPolicy& policy,
                           const ModelParams& fitted,
                           const EstimationContext& est,
                           const BootstrapConfig& config) {
  return single_method({}, &policy, nullptr, fitted, est,
                       with_variant(config, BootVariant::Naive), false);
}

}  // namespace hmmfdp
