#include "hmmfdp/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>

#include "hmmfdp/errors.hpp"
#include "hmmfdp/parallel.hpp"
#include "hmmfdp/rng.hpp"

namespace hmmfdp {

std::string method_name(BoundMethod method) {
  switch (method) {
    case BoundMethod::Oracle: return "oracle";
    case BoundMethod::Plugin: return "plugin";
    case BoundMethod::Boot1: return "boot1";
    case BoundMethod::Boot2: return "boot2";
    case BoundMethod::Boot3: return "boot3";
    case BoundMethod::Naive: return "naive";
    case BoundMethod::Simes: return "simes";
  }
  return "?";
}

CnData generate_cn_profiles(const CnSpec& spec, std::uint64_t seed) {
  if (spec.regions < 1)
    throw InvalidParameterError("cn profiles: need at least one region");
  if (spec.m < spec.regions)
    throw InvalidParameterError("cn profiles: more regions than loci");
  if (spec.n1 < 1 || spec.n2 < 1)
    throw InvalidParameterError("cn profiles: both groups need samples");
  if (spec.n_differential > spec.regions)
    throw InvalidParameterError(
        "cn profiles: more differential regions than regions");

  Rng rng(derive_seed(seed, stream::kCn));
  CnData data;

  // breakpoints: regions-1 distinct positions in {1, ..., m-1}
  std::vector<std::size_t> positions(spec.m - 1);
  std::iota(positions.begin(), positions.end(), std::size_t{1});
  for (std::size_t k = 0; k + 1 < spec.regions; ++k) {
    const std::size_t j =
        k + static_cast<std::size_t>(rng.integer(positions.size() - k));
    std::swap(positions[k], positions[j]);
  }
  data.breakpoints.assign(positions.begin(),
                          positions.begin() + (spec.regions - 1));
  std::sort(data.breakpoints.begin(), data.breakpoints.end());

  std::vector<double> base_level(spec.regions);
  for (auto& level : base_level)
    level = 1.0 + static_cast<double>(rng.integer(3));

  std::vector<std::size_t> region_order(spec.regions);
  std::iota(region_order.begin(), region_order.end(), std::size_t{0});
  for (std::size_t k = 0; k < spec.n_differential; ++k) {
    const std::size_t j =
        k + static_cast<std::size_t>(rng.integer(region_order.size() - k));
    std::swap(region_order[k], region_order[j]);
  }
  std::vector<bool> differential(spec.regions, false);
  for (std::size_t k = 0; k < spec.n_differential; ++k)
    differential[region_order[k]] = true;

  std::vector<std::size_t> region_of(spec.m);
  std::size_t region = 0;
  for (std::size_t i = 0; i < spec.m; ++i) {
    while (region < data.breakpoints.size() && i >= data.breakpoints[region])
      ++region;
    region_of[i] = region;
  }
  data.theta.resize(spec.m);
  for (std::size_t i = 0; i < spec.m; ++i)
    data.theta[i] = differential[region_of[i]] ? 1 : 0;

  const double shift = spec.mean_shift * spec.snr_scale;
  data.group1.assign(spec.n1, std::vector<double>(spec.m));
  data.group2.assign(spec.n2, std::vector<double>(spec.m));
  for (auto& row : data.group1)
    for (std::size_t i = 0; i < spec.m; ++i)
      row[i] = base_level[region_of[i]] + spec.noise_sd * rng.normal();
  for (auto& row : data.group2)
    for (std::size_t i = 0; i < spec.m; ++i)
      row[i] = base_level[region_of[i]] + (data.theta[i] ? shift : 0.0) +
               spec.noise_sd * rng.normal();
  return data;
}

double wilcoxon_scaled(std::span<const double> group1,
                       std::span<const double> group2) {
  const std::size_t n1 = group1.size(), n2 = group2.size();
  if (n1 < 1 || n2 < 1)
    throw InvalidParameterError("wilcoxon: both groups need observations");
  const std::size_t n = n1 + n2;
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(n);
  for (double v : group1) pooled.emplace_back(v, 1);
  for (double v : group2) pooled.emplace_back(v, 2);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // rank sum of group 1 with midranks for ties
  double rank_sum1 = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && pooled[j + 1].first == pooled[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k)
      if (pooled[k].second == 1) rank_sum1 += midrank;
    i = j + 1;
  }
  const double dn1 = static_cast<double>(n1), dn2 = static_cast<double>(n2);
  const double u = rank_sum1 - dn1 * (dn1 + 1.0) / 2.0;  // Mann-Whitney count
  return (u - dn1 * dn2 / 2.0) /
         std::sqrt(dn1 * dn2 * (dn1 + dn2 + 1.0) / 12.0);
}

std::vector<double> wilcoxon_statistics(const CnData& data) {
  const std::size_t m = data.theta.size();
  std::vector<double> stats(m);
  std::vector<double> g1(data.group1.size()), g2(data.group2.size());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t s = 0; s < data.group1.size(); ++s)
      g1[s] = data.group1[s][i];
    for (std::size_t s = 0; s < data.group2.size(); ++s)
      g2[s] = data.group2[s][i];
    stats[i] = wilcoxon_scaled(g1, g2);
  }
  return stats;
}

double tv_posterior_bruteforce(const ModelParams& params_a,
                               const ModelParams& params_b,
                               std::span<const double> x) {
  const std::size_t m = x.size();
  if (m == 0 || m > 14)
    throw InvalidParameterError(
        "tv_posterior_bruteforce: m must lie in [1, 14]");
  const auto log_joint = [&](const ModelParams& params,
                             const EmissionValues& vals,
                             std::uint32_t config) {
    const auto [pi0, pi1] = stationary_distribution(params.A);
    int prev = config & 1;
    double ll = std::log(prev == 0 ? pi0 : pi1) +
                std::log(prev == 0 ? vals.f0[0] : vals.f1[0]);
    for (std::size_t i = 1; i < m; ++i) {
      const int cur = (config >> i) & 1;
      ll += std::log(params.A.entry(prev, cur)) +
            std::log(cur == 0 ? vals.f0[i] : vals.f1[i]);
      prev = cur;
    }
    return ll;
  };
  const EmissionValues vals_a = evaluate_emissions(params_a, x);
  const EmissionValues vals_b = evaluate_emissions(params_b, x);
  const std::uint32_t n_config = 1u << m;
  std::vector<double> la(n_config), lb(n_config);
  double max_a = -1e308, max_b = -1e308;
  for (std::uint32_t c = 0; c < n_config; ++c) {
    la[c] = log_joint(params_a, vals_a, c);
    lb[c] = log_joint(params_b, vals_b, c);
    max_a = std::max(max_a, la[c]);
    max_b = std::max(max_b, lb[c]);
  }
  double za = 0.0, zb = 0.0;
  for (std::uint32_t c = 0; c < n_config; ++c) {
    za += std::exp(la[c] - max_a);
    zb += std::exp(lb[c] - max_b);
  }
  double tv = 0.0;
  for (std::uint32_t c = 0; c < n_config; ++c)
    tv += std::abs(std::exp(la[c] - max_a) / za - std::exp(lb[c] - max_b) / zb);
  return 0.5 * tv;
}

namespace {

long upper_count(double upper_prop, std::size_t sel_size) {
  return std::lround(upper_prop * static_cast<double>(sel_size));
}

MethodCell make_cell(double upper, double lower, const PolicyRunStats& stats) {
  MethodCell cell;
  cell.upper = upper;
  cell.lower = lower;
  cell.delta_u = upper - stats.fdp;
  cell.delta_l = stats.fdp - lower;
  cell.viol_u = cell.delta_u < 0.0;
  cell.viol_l = cell.delta_l < 0.0;
  cell.u_count = upper_count(upper, stats.sel_size);
  cell.power_conditioned =
      stats.n_h1 != 0 &&
      static_cast<long>(stats.n_h0) <= cell.u_count;
  if (cell.power_conditioned)
    cell.power_term =
        (static_cast<double>(stats.sel_size) - static_cast<double>(cell.u_count)) /
        static_cast<double>(stats.n_h1);
  return cell;
}

}  // namespace

GridResult run_grid(const ExperimentGrid& grid,
                    const std::function<void(const RunContext&)>& inspector) {
  if (grid.n_runs < 1)
    throw InvalidParameterError("grid: n_runs must be >= 1");
  if (!grid.true_model && !grid.cn)
    throw InvalidParameterError("grid: no data generator configured");
  const bool has_truth = grid.true_model.has_value();
  for (const auto& mreq : grid.methods) {
    if ((mreq.method == BoundMethod::Oracle) && !has_truth)
      throw InvalidParameterError(
          "grid: oracle bounds need the true model parameters");
  }
  for (const auto& policy : grid.policies)
    if (policy.requires_theta() && !grid.allow_unsafe_policies)
      throw InvalidParameterError(
          "grid: oracle-leak policies require the unsafe-experiments gate");
  if (grid.unknown_f0 && !grid.f0_init)
    throw InvalidParameterError("grid: unknown-null fits need f0_init");
  if (!grid.unknown_f0 && !has_truth && !grid.known_f0)
    throw InvalidParameterError("grid: known-null fits need a null density");

  const std::size_t n_pol = grid.policies.size();
  const std::size_t n_met = grid.methods.size();

  std::vector<BootMethodRequest> boot_methods;
  std::vector<std::size_t> boot_slot(n_met, static_cast<std::size_t>(-1));
  for (std::size_t mi = 0; mi < n_met; ++mi) {
    const auto& spec = grid.methods[mi];
    BootVariant variant;
    switch (spec.method) {
      case BoundMethod::Boot1: variant = BootVariant::Boot1; break;
      case BoundMethod::Boot2: variant = BootVariant::Boot2; break;
      case BoundMethod::Boot3: variant = BootVariant::Boot3; break;
      case BoundMethod::Naive: variant = BootVariant::Naive; break;
      default: continue;
    }
    boot_slot[mi] = boot_methods.size();
    boot_methods.push_back({variant, spec.delta});
  }

  GridResult result;
  result.records.assign(static_cast<std::size_t>(grid.n_runs), {});
  std::mutex inspector_mutex;

  parallel_for(static_cast<std::size_t>(grid.n_runs), grid.threads,
               [&](std::size_t run) {
    ExperimentRecord& record = result.records[run];
    record.run_id = static_cast<int>(run);
    try {
      const std::uint64_t run_seed =
          derive_seed(grid.master_seed, stream::kRun, run);

      std::vector<int> theta;
      std::vector<double> x;
      if (grid.cn) {
        CnData data =
            generate_cn_profiles(*grid.cn, derive_seed(run_seed, stream::kData));
        theta = std::move(data.theta);
        x = wilcoxon_statistics(data);
      } else {
        Rng rng(derive_seed(run_seed, stream::kData));
        std::tie(theta, x) = sample_hmm(*grid.true_model, grid.m, rng);
      }

      EmConfig em = grid.em;
      em.seed = derive_seed(run_seed, stream::kEmInit);
      ModelParams fitted = [&] {
        if (grid.unknown_f0)
          return em_fit_unknown_f0(x, em, *grid.f0_init).first;
        const EmissionDensity& f0 =
            grid.known_f0 ? *grid.known_f0 : grid.true_model->f0;
        return em_fit_known_f0(x, f0, em).first;
      }();

      const PolicyContext ctx = PolicyContext::make(x, fitted);
      std::vector<Selection> selections;
      selections.reserve(n_pol);
      for (const auto& policy : grid.policies)
        selections.push_back(evaluate_policy(policy, ctx, theta));

      record.policy_stats.resize(n_pol);
      for (std::size_t p = 0; p < n_pol; ++p) {
        PolicyRunStats& stats = record.policy_stats[p];
        stats.sel_size = selections[p].size();
        for (std::size_t i : selections[p])
          theta[i] == 0 ? ++stats.n_h0 : ++stats.n_h1;
        stats.fdp = fdp(theta, selections[p]);
      }

      std::optional<PosteriorChain> chain_true;
      for (const auto& spec : grid.methods)
        if (spec.method == BoundMethod::Oracle && !chain_true)
          chain_true = posterior_chain(*grid.true_model, x);

      std::optional<BootstrapBatchResult> batch;
      if (!boot_methods.empty()) {
        EstimationContext est;
        est.em = grid.em;
        est.null_known = !grid.unknown_f0;
        if (est.null_known)
          est.f0 = grid.known_f0 ? *grid.known_f0 : grid.true_model->f0;
        BootstrapBatchRequest req;
        req.x = x;
        req.fitted = &fitted;
        req.est = &est;
        req.ctx = &ctx;
        req.policies = grid.policies;
        req.selections_on_x = selections;
        req.methods = boot_methods;
        req.theta = theta;
        req.B = grid.B;
        req.beta = grid.beta;
        req.seed = derive_seed(run_seed, stream::kReplicate);
        req.threads = 1;  // parallelism lives at the run level here
        batch = run_bootstrap_batch(req);
      }

      record.cells.assign(n_pol, std::vector<MethodCell>(n_met));
      for (std::size_t p = 0; p < n_pol; ++p) {
        const Selection& R = selections[p];
        const PolicyRunStats& stats = record.policy_stats[p];
        for (std::size_t mi = 0; mi < n_met; ++mi) {
          const auto& spec = grid.methods[mi];
          double upper = 0.0, lower = 0.0;
          switch (spec.method) {
            case BoundMethod::Oracle:
              upper = upper_bound_from_chain(*chain_true, R, grid.beta);
              lower = lower_bound_from_chain(*chain_true, R, grid.beta);
              break;
            case BoundMethod::Plugin:
              upper = upper_bound_from_chain(ctx.chain, R, grid.beta);
              lower = lower_bound_from_chain(ctx.chain, R, grid.beta);
              break;
            case BoundMethod::Simes:
              upper = simes_bound(ctx.pvalues, R, grid.beta);
              lower = 0.0;  // structure-free method: no lower counterpart
              break;
            default: {
              const BatchCell& cell = batch->cells[p][boot_slot[mi]];
              upper = cell.upper;
              lower = cell.lower;
              break;
            }
          }
          record.cells[p][mi] = make_cell(upper, lower, stats);
        }
      }

      if (inspector) {
        const RunContext run_ctx{static_cast<int>(run), x, theta, fitted, ctx,
                                 selections};
        std::lock_guard<std::mutex> lock(inspector_mutex);
        inspector(run_ctx);
      }
    } catch (const std::exception& e) {
      record.failed = true;
      record.error = e.what();
      record.policy_stats.clear();
      record.cells.clear();
    }
  });

  for (const auto& record : result.records)
    if (record.failed) ++result.failures;

  result.summary.assign(n_pol, std::vector<SummaryCell>(n_met));
  for (std::size_t p = 0; p < n_pol; ++p) {
    for (std::size_t mi = 0; mi < n_met; ++mi) {
      SummaryCell& cell = result.summary[p][mi];
      for (const auto& record : result.records) {
        if (record.failed) continue;
        const MethodCell& c = record.cells[p][mi];
        ++cell.n;
        cell.violation_rate_upper += c.viol_u ? 1.0 : 0.0;
        cell.violation_rate_lower += c.viol_l ? 1.0 : 0.0;
        cell.mean_delta_upper += c.delta_u;
        cell.mean_delta_lower += c.delta_l;
        cell.mean_upper += c.upper;
        cell.mean_lower += c.lower;
        if (c.power_conditioned) {
          cell.power += c.power_term;
          ++cell.power_n;
        }
      }
      if (cell.n > 0) {
        const double n = static_cast<double>(cell.n);
        cell.violation_rate_upper /= n;
        cell.violation_rate_lower /= n;
        cell.mean_delta_upper /= n;
        cell.mean_delta_lower /= n;
        cell.mean_upper /= n;
        cell.mean_lower /= n;
      }
      if (cell.power_n > 0) cell.power /= static_cast<double>(cell.power_n);
    }
  }
  return result;
}

double power(std::span<const ExperimentRecord> records, std::size_t policy_idx,
             std::size_t method_idx) {
  double sum = 0.0;
  int n = 0;
  for (const auto& record : records) {
    if (record.failed) continue;
    const MethodCell& cell = record.cells[policy_idx][method_idx];
    if (cell.power_conditioned) {
      sum += cell.power_term;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace hmmfdp
