#ifndef HMMFDP_EXPERIMENTS_HPP
#define HMMFDP_EXPERIMENTS_HPP

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hmmfdp/bootstrap.hpp"

namespace hmmfdp {

enum class BoundMethod { Oracle, Plugin, Boot1, Boot2, Boot3, Naive, Simes };

std::string method_name(BoundMethod method);

struct MethodSpec {
  BoundMethod method;
  double delta = 0.5;  // used by boot1/boot2
};

// Synthetic piecewise-constant copy-number design: m loci split into
// `regions` segments at uniformly drawn breakpoints; `n_differential`
// segments get a mean shift in group 2.  theta_i = 1 on shifted segments.
struct CnSpec {
  std::size_t m = 1000;
  std::size_t regions = 10;
  std::size_t n1 = 50, n2 = 50;
  double mean_shift = 1.0;
  double noise_sd = 1.0;
  std::size_t n_differential = 2;
  double snr_scale = 1.0;  // multiplies mean_shift
};

struct CnData {
  std::vector<int> theta;
  std::vector<std::size_t> breakpoints;           // region starts after 0
  std::vector<std::vector<double>> group1, group2;  // [sample][locus]
};

CnData generate_cn_profiles(const CnSpec& spec, std::uint64_t seed);

// Rank-sum statistic of group 1 centered and scaled by its null limit law;
// ties handled by midranks.
double wilcoxon_scaled(std::span<const double> group1,
                       std::span<const double> group2);

// Per-locus scaled Wilcoxon statistics for a CN data set.
std::vector<double> wilcoxon_statistics(const CnData& data);

// Exact total-variation distance between the posteriors of theta | x under
// two parameter sets, by enumerating all 2^m configurations (m <= 14).
double tv_posterior_bruteforce(const ModelParams& params_a,
                               const ModelParams& params_b,
                               std::span<const double> x);

// ---- Monte Carlo grid -------------------------------------------------------

struct ExperimentGrid {
  std::optional<ModelParams> true_model;  // HMM data generator + oracle truth
  std::optional<CnSpec> cn;               // alternative generator
  std::size_t m = 1000;
  int n_runs = 100;
  double beta = 0.1;
  std::vector<MethodSpec> methods;
  std::vector<SelectionPolicy> policies;
  int B = 100;
  std::uint64_t master_seed = 1;
  int threads = 0;  // 0 = hardware concurrency
  bool unknown_f0 = false;
  std::optional<EmissionDensity> f0_init;   // for the unknown-null fit
  std::optional<EmissionDensity> known_f0;  // overrides true_model.f0 (CN grids)
  EmConfig em;
  bool allow_unsafe_policies = false;
};

struct MethodCell {
  double upper = 0.0, lower = 0.0;
  double delta_u = 0.0;  // upper - fdp
  double delta_l = 0.0;  // fdp - lower
  bool viol_u = false, viol_l = false;
  long u_count = 0;          // round(upper * |S|)
  bool power_conditioned = false;
  double power_term = 0.0;   // (|S| - u_count) / |S cap H1| when conditioned
};

struct PolicyRunStats {
  std::size_t sel_size = 0;
  std::size_t n_h0 = 0, n_h1 = 0;  // selected nulls / alternatives
  double fdp = 0.0;
};

struct ExperimentRecord {
  int run_id = 0;
  bool failed = false;
  std::string error;
  std::vector<PolicyRunStats> policy_stats;        // [policy]
  std::vector<std::vector<MethodCell>> cells;      // [policy][method]
};

struct SummaryCell {
  int n = 0;
  double violation_rate_upper = 0.0, violation_rate_lower = 0.0;
  double mean_delta_upper = 0.0, mean_delta_lower = 0.0;
  double mean_upper = 0.0, mean_lower = 0.0;
  double power = 0.0;
  int power_n = 0;
};

// Hook run once per simulation with full access to the run's internals;
// used by diagnostic suites.  Invoked under a mutex but in no particular
// order, and never influences records.
struct RunContext {
  int run_id;
  std::span<const double> x;
  std::span<const int> theta;
  const ModelParams& fitted;
  const PolicyContext& ctx;
  const std::vector<Selection>& selections;
};

struct GridResult {
  std::vector<ExperimentRecord> records;
  std::vector<std::vector<SummaryCell>> summary;  // [policy][method]
  int failures = 0;
};

GridResult run_grid(const ExperimentGrid& grid,
                    const std::function<void(const RunContext&)>& inspector = {});

// Conditional power estimate for one (policy, method) pair across records.
double power(std::span<const ExperimentRecord> records, std::size_t policy_idx,
             std::size_t method_idx);

}  // namespace hmmfdp

#endif
