#include "hmmfdp/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hmmfdp/errors.hpp"

namespace hmmfdp {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

double parse_double(const std::string& token, const std::string& file,
                    std::size_t line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(token, &pos);
    while (pos < token.size() &&
           (token[pos] == ' ' || token[pos] == '\t' || token[pos] == '\r'))
      ++pos;
    if (pos != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw DataError(file + ":" + std::to_string(line) +
                    ": cannot parse value '" + token + "'");
  }
}

std::string strip_cr(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t'))
    s.pop_back();
  return s;
}

const json& require_key(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end())
    throw DataError(std::string("missing config key '") + key + "'");
  return *it;
}

}  // namespace

std::vector<double> read_observations_csv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> out;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (lineno == 1) {
      if (line != "x")
        throw DataError(path.string() + ":1: expected header 'x', got '" +
                        line + "'");
      continue;
    }
    if (line.empty()) continue;
    out.push_back(parse_double(line, path.string(), lineno));
  }
  if (out.empty())
    throw DataError(path.string() + ": no observations");
  return out;
}

void write_observations_csv(const std::filesystem::path& path,
                            std::span<const double> x) {
  std::ofstream out = open_output(path);
  out << "x\n";
  for (double v : x) out << format_double(v) << "\n";
}

void write_theta_csv(const std::filesystem::path& path,
                     std::span<const int> theta) {
  std::ofstream out = open_output(path);
  out << "theta\n";
  for (int v : theta) out << v << "\n";
}

std::vector<int> read_theta_csv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<int> out;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (lineno == 1) {
      if (line != "theta")
        throw DataError(path.string() + ":1: expected header 'theta'");
      continue;
    }
    if (line.empty()) continue;
    if (line != "0" && line != "1")
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": theta entries must be 0 or 1");
    out.push_back(line == "1" ? 1 : 0);
  }
  return out;
}

Selection read_selection_file(const std::filesystem::path& path,
                              std::size_t m) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::size_t> idx;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const double v = parse_double(line, path.string(), lineno);
    const long long one_based = static_cast<long long>(v);
    if (static_cast<double>(one_based) != v || one_based < 1)
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": selection indices are positive 1-based integers");
    idx.push_back(static_cast<std::size_t>(one_based - 1));
  }
  try {
    return Selection(std::move(idx), m);
  } catch (const InvalidParameterError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

json density_to_json(const EmissionDensity& density) {
  json j;
  if (density.is_gaussian()) {
    const auto& g = density.gaussian_spec();
    j["type"] = "gaussian";
    j["mean"] = g.mean;
    j["sd"] = g.sd;
  } else {
    const auto& k = density.mixture_spec();
    j["type"] = "kernel_mixture";
    j["bandwidth"] = k.bandwidth;
    j["centers"] = k.centers;
    j["weights"] = k.weights;
  }
  return j;
}

EmissionDensity density_from_json(const json& j,
                                  const std::filesystem::path& base_dir) {
  const std::string type = require_key(j, "type").get<std::string>();
  if (type == "gaussian") {
    return EmissionDensity::gaussian(require_key(j, "mean").get<double>(),
                                     require_key(j, "sd").get<double>());
  }
  if (type == "kernel_mixture") {
    std::vector<double> centers;
    if (j.contains("centers_file")) {
      const auto file =
          base_dir / j["centers_file"].get<std::string>();
      std::ifstream in = open_input(file);
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(line);
        if (line.empty()) continue;
        centers.push_back(parse_double(line, file.string(), lineno));
      }
    } else {
      centers = require_key(j, "centers").get<std::vector<double>>();
    }
    auto weights = require_key(j, "weights").get<std::vector<double>>();
    return EmissionDensity::kernel_mixture(
        std::move(centers), std::move(weights),
        require_key(j, "bandwidth").get<double>());
  }
  throw DataError("unknown density type '" + type + "'");
}

json model_to_json(const ModelParams& params, const EmTrace* trace) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["A"] = {{params.A.a00, params.A.a01}, {params.A.a10, params.A.a11}};
  j["null_known"] = params.null_known;
  j["f0"] = density_to_json(params.f0);
  j["f1"] = density_to_json(params.f1);
  if (trace != nullptr) {
    j["em"] = {{"iterations", trace->iteration_count},
               {"converged", trace->converged},
               {"degenerate_init", trace->degenerate_init},
               {"returned_iteration", trace->returned_iteration},
               {"best_log_likelihood", trace->best_log_likelihood},
               {"monotonicity_violations", trace->monotonicity_violations}};
  }
  return j;
}

ModelParams model_from_json(const json& j,
                            const std::filesystem::path& base_dir) {
  const auto& a = require_key(j, "A");
  if (!a.is_array() || a.size() != 2 || a[0].size() != 2 || a[1].size() != 2)
    throw DataError("model: A must be a 2x2 matrix");
  try {
    TransitionMatrix A(a[0][0].get<double>(), a[0][1].get<double>(),
                       a[1][0].get<double>(), a[1][1].get<double>());
    return ModelParams(A, density_from_json(require_key(j, "f0"), base_dir),
                       density_from_json(require_key(j, "f1"), base_dir),
                       j.value("null_known", true));
  } catch (const InvalidParameterError& e) {
    throw DataError(std::string("model: ") + e.what());
  }
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return j;
}

ModelParams read_model_file(const std::filesystem::path& path) {
  return model_from_json(load_json_file(path), path.parent_path());
}

void write_model_file(const std::filesystem::path& path,
                      const ModelParams& params, const EmTrace* trace) {
  std::ofstream out = open_output(path);
  out << model_to_json(params, trace).dump(2) << "\n";
}

EmConfig em_config_from_json(const json& j) {
  EmConfig config;
  config.max_iters = j.value("max_iters", config.max_iters);
  config.tol = j.value("tol", config.tol);
  config.storey_lambda = j.value("storey_lambda", config.storey_lambda);
  if (j.contains("null_label_rule")) {
    const std::string rule = j["null_label_rule"].get<std::string>();
    if (rule == "predominant")
      config.null_label_rule = NullLabelRule::Predominant;
    else if (rule == "mean_closest_to_zero")
      config.null_label_rule = NullLabelRule::MeanClosestToZero;
    else
      throw DataError("unknown null_label_rule '" + rule + "'");
  }
  if (config.max_iters < 0) throw DataError("em: max_iters must be >= 0");
  if (!(config.tol > 0.0)) throw DataError("em: tol must be positive");
  if (!(config.storey_lambda > 0.0 && config.storey_lambda < 1.0))
    throw DataError("em: storey_lambda must lie in (0,1)");
  return config;
}

SelectionPolicy policy_from_json(const json& j, bool allow_unsafe,
                                 const std::filesystem::path& base_dir,
                                 std::size_t m) {
  const std::string type = require_key(j, "type").get<std::string>();
  SelectionPolicy policy;
  if (type == "pvalue_threshold") {
    const double t = require_key(j, "t").get<double>();
    policy.variant = PValueThresholdPolicy{t};
    policy.name = "pvalue<" + format_double(t);
  } else if (type == "suncai") {
    const double alpha = require_key(j, "alpha").get<double>();
    policy.variant = SunCaiPolicy{alpha};
    policy.name = "suncai(" + format_double(alpha) + ")";
  } else if (type == "viterbi") {
    policy.variant = ViterbiPolicy{};
    policy.name = "viterbi";
  } else if (type == "topk") {
    const std::size_t k = require_key(j, "k").get<std::size_t>();
    policy.variant = TopKPolicy{k};
    policy.name = "top" + std::to_string(k);
  } else if (type == "fixed_set") {
    Selection set;
    if (j.contains("file")) {
      set = read_selection_file(base_dir / j["file"].get<std::string>(), m);
    } else {
      std::vector<std::size_t> idx;
      for (const auto& v : require_key(j, "indices")) {
        const long long one_based = v.get<long long>();
        if (one_based < 1)
          throw DataError("fixed_set: indices are 1-based positive integers");
        idx.push_back(static_cast<std::size_t>(one_based - 1));
      }
      try {
        set = Selection(std::move(idx), m);
      } catch (const InvalidParameterError& e) {
        throw DataError(std::string("fixed_set: ") + e.what());
      }
    }
    policy.variant = FixedSetPolicy{std::move(set)};
    policy.name = "fixed_set";
  } else if (type == "oracle_leak") {
    if (!allow_unsafe)
      throw DataError(
          "oracle_leak policies are disabled; pass --unsafe-experiments to "
          "enable them");
    const std::string rule = require_key(j, "rule").get<std::string>();
    LeakRule leak;
    if (rule == "true_alternatives")
      leak = LeakRule::TrueAlternatives;
    else if (rule == "true_nulls")
      leak = LeakRule::TrueNulls;
    else if (rule == "alternatives_below_p05")
      leak = LeakRule::AlternativesBelowP05;
    else
      throw DataError("unknown oracle_leak rule '" + rule + "'");
    policy.variant = OracleLeakPolicy{leak};
    policy.name = "leak:" + rule;
  } else {
    throw DataError("unknown policy type '" + type + "'");
  }
  if (j.contains("name")) policy.name = j["name"].get<std::string>();
  return policy;
}

namespace {

BoundMethod method_from_name(const std::string& name) {
  if (name == "oracle") return BoundMethod::Oracle;
  if (name == "plugin") return BoundMethod::Plugin;
  if (name == "boot1") return BoundMethod::Boot1;
  if (name == "boot2") return BoundMethod::Boot2;
  if (name == "boot3") return BoundMethod::Boot3;
  if (name == "naive") return BoundMethod::Naive;
  if (name == "simes") return BoundMethod::Simes;
  throw DataError("unknown bound method '" + name + "'");
}

}  // namespace

ExperimentGrid grid_from_json(const json& j, bool allow_unsafe,
                              const std::filesystem::path& base_dir) {
  ExperimentGrid grid;
  if (j.contains("model")) {
    const auto& mj = j["model"];
    grid.true_model = mj.is_string()
                          ? read_model_file(base_dir / mj.get<std::string>())
                          : model_from_json(mj, base_dir);
  }
  if (j.contains("cn")) {
    const auto& c = j["cn"];
    CnSpec spec;
    spec.m = c.value("m", spec.m);
    spec.regions = c.value("regions", spec.regions);
    spec.n1 = c.value("n1", spec.n1);
    spec.n2 = c.value("n2", spec.n2);
    spec.mean_shift = c.value("mean_shift", spec.mean_shift);
    spec.noise_sd = c.value("noise_sd", spec.noise_sd);
    spec.n_differential = c.value("n_differential", spec.n_differential);
    spec.snr_scale = c.value("snr_scale", spec.snr_scale);
    grid.cn = spec;
    grid.m = spec.m;
  }
  if (j.contains("m")) grid.m = j["m"].get<std::size_t>();
  grid.n_runs = require_key(j, "n_runs").get<int>();
  grid.beta = j.value("beta", grid.beta);
  grid.B = j.value("B", grid.B);
  grid.master_seed = j.value("seed", grid.master_seed);
  grid.unknown_f0 = j.value("unknown_f0", false);
  if (j.contains("f0_init"))
    grid.f0_init = density_from_json(j["f0_init"], base_dir);
  if (j.contains("known_f0"))
    grid.known_f0 = density_from_json(j["known_f0"], base_dir);
  if (j.contains("em")) grid.em = em_config_from_json(j["em"]);
  grid.allow_unsafe_policies = allow_unsafe;

  for (const auto& mj : require_key(j, "methods")) {
    MethodSpec spec;
    spec.method = method_from_name(require_key(mj, "name").get<std::string>());
    spec.delta = mj.value("delta", spec.delta);
    grid.methods.push_back(spec);
  }
  for (const auto& pj : require_key(j, "policies"))
    grid.policies.push_back(policy_from_json(pj, allow_unsafe, base_dir, grid.m));
  if (!(grid.beta > 0.0 && grid.beta < 1.0))
    throw DataError("grid: beta must lie in (0,1)");
  return grid;
}

void write_records_csv(const std::filesystem::path& path,
                       const ExperimentGrid& grid, const GridResult& result) {
  std::ofstream out = open_output(path);
  out << "run,policy,method,delta,upper,lower,fdp,delta_upper,delta_lower,"
         "violation_upper,violation_lower,selection_size,selected_nulls,"
         "selected_alternatives,upper_count,power_conditioned,power_term\n";
  for (const auto& record : result.records) {
    if (record.failed) continue;
    for (std::size_t p = 0; p < grid.policies.size(); ++p) {
      for (std::size_t mi = 0; mi < grid.methods.size(); ++mi) {
        const MethodCell& c = record.cells[p][mi];
        const PolicyRunStats& stats = record.policy_stats[p];
        const auto& spec = grid.methods[mi];
        const bool has_delta = spec.method == BoundMethod::Boot1 ||
                               spec.method == BoundMethod::Boot2;
        out << record.run_id << ',' << grid.policies[p].name << ','
            << method_name(spec.method) << ','
            << (has_delta ? format_double(spec.delta) : std::string()) << ','
            << format_double(c.upper) << ',' << format_double(c.lower) << ','
            << format_double(stats.fdp) << ',' << format_double(c.delta_u)
            << ',' << format_double(c.delta_l) << ',' << (c.viol_u ? 1 : 0)
            << ',' << (c.viol_l ? 1 : 0) << ',' << stats.sel_size << ','
            << stats.n_h0 << ',' << stats.n_h1 << ',' << c.u_count << ','
            << (c.power_conditioned ? 1 : 0) << ','
            << format_double(c.power_term) << "\n";
      }
    }
  }
}

json summary_to_json(const ExperimentGrid& grid, const GridResult& result) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["beta"] = grid.beta;
  j["m"] = grid.m;
  j["n_runs"] = grid.n_runs;
  j["B"] = grid.B;
  j["seed"] = grid.master_seed;
  j["failures"] = result.failures;
  json failed = json::array();
  for (const auto& record : result.records)
    if (record.failed)
      failed.push_back({{"run", record.run_id}, {"error", record.error}});
  j["failed_runs"] = failed;
  json cells = json::array();
  for (std::size_t p = 0; p < grid.policies.size(); ++p) {
    for (std::size_t mi = 0; mi < grid.methods.size(); ++mi) {
      const SummaryCell& cell = result.summary[p][mi];
      const auto& spec = grid.methods[mi];
      json c = {{"policy", grid.policies[p].name},
                {"method", method_name(spec.method)},
                {"n", cell.n},
                {"violation_rate_upper", cell.violation_rate_upper},
                {"violation_rate_lower", cell.violation_rate_lower},
                {"mean_delta_upper", cell.mean_delta_upper},
                {"mean_delta_lower", cell.mean_delta_lower},
                {"mean_upper", cell.mean_upper},
                {"mean_lower", cell.mean_lower},
                {"power", cell.power},
                {"power_n", cell.power_n}};
      if (spec.method == BoundMethod::Boot1 ||
          spec.method == BoundMethod::Boot2)
        c["delta"] = spec.delta;
      cells.push_back(c);
    }
  }
  j["cells"] = cells;
  return j;
}

}  // namespace hmmfdp
