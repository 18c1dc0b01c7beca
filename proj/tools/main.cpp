#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hmmfdp/errors.hpp"
#include "hmmfdp/io.hpp"
#include "hmmfdp/parallel.hpp"
#include "hmmfdp/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hmmfdp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool unsafe_experiments = false;
};

int default_threads() {
  if (const char* env = std::getenv("HMMFDP_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return resolve_threads(0);
}

int threads_of(const CommonArgs& args, const json& config) {
  if (args.threads) return *args.threads;
  if (config.contains("threads")) return config["threads"].get<int>();
  return default_threads();
}

std::uint64_t seed_of(const CommonArgs& args, const json& config) {
  if (args.seed) return *args.seed;
  return config.value("seed", std::uint64_t{1});
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

// ---- estimate ---------------------------------------------------------------

int cmd_estimate(const CommonArgs& args) {
  const json config = load_json_file(args.config_path);
  const fs::path base = fs::path(args.config_path).parent_path();
  const auto x =
      read_observations_csv(base / config.at("input").get<std::string>());

  EmConfig em;
  if (config.contains("em")) em = em_config_from_json(config["em"]);
  em.seed = seed_of(args, config);

  const json& null_spec = config.at("null");
  const auto [fitted, trace] = [&] {
    if (null_spec.at("type").get<std::string>() == "unknown") {
      const EmissionDensity f0_init =
          density_from_json(null_spec.at("f0_init"), base);
      return em_fit_unknown_f0(x, em, f0_init);
    }
    return em_fit_known_f0(x, density_from_json(null_spec, base), em);
  }();

  write_model_file(base / config.at("output").get<std::string>(), fitted,
                   &trace);
  std::cerr << "estimate: " << trace.iteration_count << " iterations, "
            << (trace.converged ? "converged" : "not converged") << "\n";
  return kExitOk;
}

// ---- bound ------------------------------------------------------------------

struct BoundMethodConfig {
  std::string name;
  double beta = 0.1;
  double delta = 0.5;
  int B = 100;
  bool is_boot = false;
  BootVariant variant = BootVariant::Boot1;
};

int cmd_bound(const CommonArgs& args) {
  const json config = load_json_file(args.config_path);
  const fs::path base = fs::path(args.config_path).parent_path();
  const auto x =
      read_observations_csv(base / config.at("input").get<std::string>());
  const std::uint64_t seed = seed_of(args, config);
  const int threads = threads_of(args, config);
  const double gamma = config.value("gamma", 0.5);
  if (!(gamma > 0.0 && gamma < 1.0))
    throw DataError("bound: gamma must lie in (0,1)");

  EmConfig em;
  if (config.contains("em")) em = em_config_from_json(config["em"]);
  em.seed = derive_seed(seed, stream::kEmInit);

  // fitted model: from file, or fitted inline on the input series
  std::optional<EmTrace> fit_trace;
  EstimationContext est;
  est.em = em;
  const ModelParams fitted = [&]() -> ModelParams {
    if (config.contains("model")) {
      ModelParams m = read_model_file(base / config.at("model").get<std::string>());
      est.null_known = m.null_known;
      if (m.null_known) est.f0 = m.f0;
      return m;
    }
    const json& fit = config.at("fit");
    const json& null_spec = fit.at("null");
    if (null_spec.at("type").get<std::string>() == "unknown") {
      est.null_known = false;
      auto [m, trace] = em_fit_unknown_f0(
          x, em, density_from_json(null_spec.at("f0_init"), base));
      fit_trace = std::move(trace);
      return m;
    }
    const EmissionDensity f0 = density_from_json(null_spec, base);
    est.null_known = true;
    est.f0 = f0;
    auto [m, trace] = em_fit_known_f0(x, f0, em);
    fit_trace = std::move(trace);
    return m;
  }();

  const SelectionPolicy policy = policy_from_json(
      config.at("policy"), args.unsafe_experiments, base, x.size());
  const PolicyContext ctx = PolicyContext::make(x, fitted);
  const Selection R = evaluate_policy(policy, ctx);

  std::optional<ModelParams> true_model;
  if (config.contains("true_model"))
    true_model = read_model_file(base / config.at("true_model").get<std::string>());

  std::vector<BoundMethodConfig> methods;
  for (const auto& mj : config.at("methods")) {
    BoundMethodConfig mc;
    mc.name = mj.at("name").get<std::string>();
    mc.beta = mj.value("beta", 0.1);
    mc.delta = mj.value("delta", 0.5);
    mc.B = mj.value("B", 100);
    if (!(mc.beta > 0.0 && mc.beta < 1.0))
      throw DataError("bound: beta must lie in (0,1)");
    if (mc.name == "boot1" || mc.name == "boot2" || mc.name == "boot3" ||
        mc.name == "naive") {
      mc.is_boot = true;
      mc.variant = mc.name == "boot1"   ? BootVariant::Boot1
                   : mc.name == "boot2" ? BootVariant::Boot2
                   : mc.name == "boot3" ? BootVariant::Boot3
                                        : BootVariant::Naive;
      const bool needs_full_policy = mc.variant == BootVariant::Boot1 ||
                                     mc.variant == BootVariant::Boot3 ||
                                     mc.variant == BootVariant::Naive;
      if (needs_full_policy && !policy.is_full_policy())
        throw DataError("bound: method '" + mc.name +
                        "' needs the full selection policy, not a fixed set; "
                        "full selection policy required");
    } else if (mc.name != "oracle" && mc.name != "plugin" &&
               mc.name != "simes") {
      throw DataError("unknown bound method '" + mc.name + "'");
    }
    if (mc.name == "oracle" && !true_model)
      throw DataError("bound: oracle method needs a true_model file");
    methods.push_back(mc);
  }

  // one shared replicate stream per distinct B
  struct BatchPlan {
    std::vector<std::size_t> method_idx;  // into methods
    std::vector<BootMethodRequest> requests;
  };
  std::map<int, BatchPlan> plans;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    if (!methods[i].is_boot) continue;
    auto& plan = plans[methods[i].B];
    plan.method_idx.push_back(i);
    // bound at beta, interval endpoints at beta(1-gamma) and beta*gamma
    plan.requests.push_back(
        {methods[i].variant, methods[i].delta, methods[i].beta});
    plan.requests.push_back({methods[i].variant, methods[i].delta,
                             methods[i].beta * (1.0 - gamma)});
    plan.requests.push_back(
        {methods[i].variant, methods[i].delta, methods[i].beta * gamma});
  }
  std::map<std::size_t, std::array<BatchCell, 3>> boot_cells;
  for (auto& [B, plan] : plans) {
    BootstrapBatchRequest req;
    req.x = x;
    req.fitted = &fitted;
    req.est = &est;
    req.ctx = &ctx;
    req.policies = {policy};
    req.selections_on_x = {R};
    req.methods = plan.requests;
    req.B = B;
    req.beta = 0.1;  // every entry carries an explicit override
    req.seed = derive_seed(seed, stream::kReplicate);
    req.threads = threads;
    const BootstrapBatchResult batch = run_bootstrap_batch(req);
    for (std::size_t k = 0; k < plan.method_idx.size(); ++k)
      boot_cells[plan.method_idx[k]] = {batch.cells[0][3 * k],
                                        batch.cells[0][3 * k + 1],
                                        batch.cells[0][3 * k + 2]};
  }

  json out;
  out["schema_version"] = kSchemaVersion;
  out["seed"] = seed;
  out["gamma"] = gamma;
  out["policy"] = policy.name;
  out["selection_size"] = R.size();
  json jmethods = json::array();
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const auto& mc = methods[i];
    json mj;
    mj["name"] = mc.name;
    mj["beta"] = mc.beta;
    mj["seed"] = seed;
    double upper = 0.0, lower = 0.0, int_lower = 0.0, int_upper = 0.0;
    if (mc.name == "oracle" || mc.name == "plugin") {
      const ModelParams& params = mc.name == "oracle" ? *true_model : fitted;
      const PosteriorChain chain = mc.name == "oracle"
                                       ? posterior_chain(params, x)
                                       : ctx.chain;
      upper = upper_bound_from_chain(chain, R, mc.beta);
      lower = lower_bound_from_chain(chain, R, mc.beta);
      const FdpInterval interval =
          posterior_interval_from_chain(chain, R, mc.beta, gamma);
      int_lower = interval.lower;
      int_upper = interval.upper;
    } else if (mc.name == "simes") {
      upper = simes_bound(ctx.pvalues, R, mc.beta);
      int_upper = simes_bound(ctx.pvalues, R, mc.beta * (1.0 - gamma));
    } else {
      const auto& cells = boot_cells.at(i);
      upper = cells[0].upper;
      lower = cells[0].lower;
      int_upper = cells[1].upper;
      int_lower = cells[2].lower;
      mj["delta"] = mc.delta;
      mj["B"] = mc.B;
    }
    mj["upper"] = upper;
    mj["lower"] = lower;
    mj["interval"] = {int_lower, int_upper};
    jmethods.push_back(mj);
  }
  out["methods"] = jmethods;
  if (fit_trace)
    out["em"] = {{"iterations", fit_trace->iteration_count},
                 {"converged", fit_trace->converged}};
  write_json_file(base / config.at("output").get<std::string>(), out);
  return kExitOk;
}

// ---- simulate ---------------------------------------------------------------

int cmd_simulate(const CommonArgs& args) {
  const json config = load_json_file(args.config_path);
  const fs::path base = fs::path(args.config_path).parent_path();
  const fs::path out_dir = base / config.value("output_dir", std::string("."));
  fs::create_directories(out_dir);
  const std::uint64_t seed = seed_of(args, config);
  const std::string type = config.value("type", std::string("hmm"));

  json spec;
  spec["schema_version"] = kSchemaVersion;
  spec["seed"] = seed;
  spec["type"] = type;

  if (type == "hmm") {
    const auto& mj = config.at("model");
    const ModelParams model =
        mj.is_string() ? read_model_file(base / mj.get<std::string>())
                       : model_from_json(mj, base);
    const std::size_t m = config.at("m").get<std::size_t>();
    if (m == 0) throw DataError("simulate: m must be >= 1");
    const auto [theta, x] =
        sample_hmm(model, m, derive_seed(seed, stream::kData));
    write_observations_csv(out_dir / "x.csv", x);
    write_theta_csv(out_dir / "theta.csv", theta);
    spec["m"] = m;
    spec["model"] = model_to_json(model);
  } else if (type == "cn") {
    const auto& c = config.at("cn");
    CnSpec cn;
    cn.m = c.value("m", cn.m);
    cn.regions = c.value("regions", cn.regions);
    cn.n1 = c.value("n1", cn.n1);
    cn.n2 = c.value("n2", cn.n2);
    cn.mean_shift = c.value("mean_shift", cn.mean_shift);
    cn.noise_sd = c.value("noise_sd", cn.noise_sd);
    cn.n_differential = c.value("n_differential", cn.n_differential);
    cn.snr_scale = c.value("snr_scale", cn.snr_scale);
    if (cn.m == 0) throw DataError("simulate: m must be >= 1");
    const CnData data = generate_cn_profiles(cn, seed);
    write_observations_csv(out_dir / "x.csv", wilcoxon_statistics(data));
    write_theta_csv(out_dir / "theta.csv", data.theta);
    spec["cn"] = {{"m", cn.m},
                  {"regions", cn.regions},
                  {"n1", cn.n1},
                  {"n2", cn.n2},
                  {"mean_shift", cn.mean_shift},
                  {"noise_sd", cn.noise_sd},
                  {"n_differential", cn.n_differential},
                  {"snr_scale", cn.snr_scale}};
  } else {
    throw DataError("simulate: unknown type '" + type + "'");
  }
  write_json_file(out_dir / "spec.json", spec);
  return kExitOk;
}

// ---- benchmark --------------------------------------------------------------

int cmd_benchmark(const CommonArgs& args) {
  const json config = load_json_file(args.config_path);
  const fs::path base = fs::path(args.config_path).parent_path();
  const fs::path out_dir = base / config.value("output_dir", std::string("."));
  fs::create_directories(out_dir);

  ExperimentGrid grid = grid_from_json(config, args.unsafe_experiments, base);
  if (args.seed) grid.master_seed = *args.seed;
  grid.threads = threads_of(args, config);

  const GridResult result = run_grid(grid);
  write_records_csv(out_dir / "records.csv", grid, result);
  write_json_file(out_dir / "summary.json", summary_to_json(grid, result));
  std::cerr << "benchmark: " << grid.n_runs << " runs, " << result.failures
            << " failures\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Posterior FDP confidence bounds under a two-state HMM"};
  app.require_subcommand(1);

  CommonArgs args;
  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", args.config_path, "JSON configuration file")
        ->required();
    cmd->add_option("--seed", args.seed, "master seed (overrides config)");
    cmd->add_option("--threads", args.threads,
                    "worker threads (overrides config and HMMFDP_THREADS)");
    cmd->add_flag("--unsafe-experiments", args.unsafe_experiments,
                  "allow selection policies that read the latent states");
  };

  CLI::App* estimate = app.add_subcommand("estimate", "fit model parameters");
  CLI::App* bound = app.add_subcommand("bound", "compute FDP bounds");
  CLI::App* simulate = app.add_subcommand("simulate", "generate datasets");
  CLI::App* benchmark =
      app.add_subcommand("benchmark", "run a Monte Carlo grid");
  for (CLI::App* cmd : {estimate, bound, simulate, benchmark}) add_common(cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (estimate->parsed()) return cmd_estimate(args);
    if (bound->parsed()) return cmd_bound(args);
    if (simulate->parsed()) return cmd_simulate(args);
    return cmd_benchmark(args);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const InvalidParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
