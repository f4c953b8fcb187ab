#include "mfuq/run.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace mfuq {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void reject_unknown_keys(const json& j, const char* section,
                         std::initializer_list<const char*> allowed) {
  if (!j.is_object()) return;
  for (const auto& [key, val] : j.items()) {
    (void)val;
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end())
      throw ConfigError(std::string("config: unknown field '") + key + "' in " + section);
  }
}

const json* find_field(const json& j, const char* key) {
  if (!j.is_object()) return nullptr;
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double get_number(const json& j, const char* section, const char* key, double def) {
  const json* f = find_field(j, key);
  if (!f) return def;
  if (!f->is_number())
    throw ConfigError(std::string("config field '") + section + "." + key + "': expected a number");
  return f->get<double>();
}

long get_integer(const json& j, const char* section, const char* key, long def) {
  const json* f = find_field(j, key);
  if (!f) return def;
  if (!f->is_number_integer())
    throw ConfigError(std::string("config field '") + section + "." + key +
                      "': expected an integer");
  return f->get<long>();
}

std::string get_string(const json& j, const char* section, const char* key,
                       const std::string& def) {
  const json* f = find_field(j, key);
  if (!f) return def;
  if (!f->is_string())
    throw ConfigError(std::string("config field '") + section + "." + key + "': expected a string");
  return f->get<std::string>();
}

bool get_bool(const json& j, const char* section, const char* key, bool def) {
  const json* f = find_field(j, key);
  if (!f) return def;
  if (!f->is_boolean())
    throw ConfigError(std::string("config field '") + section + "." + key +
                      "': expected a boolean");
  return f->get<bool>();
}

Eigen::VectorXd get_vector(const json& j, const char* section, const char* key) {
  const json* f = find_field(j, key);
  if (!f || !f->is_array() || f->empty())
    throw ConfigError(std::string("config field '") + section + "." + key +
                      "': expected a non-empty array of numbers");
  Eigen::VectorXd v(f->size());
  for (std::size_t i = 0; i < f->size(); ++i) {
    if (!(*f)[i].is_number())
      throw ConfigError(std::string("config field '") + section + "." + key +
                        "': expected a non-empty array of numbers");
    v[i] = (*f)[i].get<double>();
  }
  return v;
}

std::string method_name(const std::string& m) {
  if (m != "misc" && m != "srbf" && m != "both")
    throw ConfigError("config: method must be one of misc, srbf, both (got '" + m + "')");
  return m;
}

void write_log_jsonl(const std::string& path, const ordered_json& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  for (const auto& entry : log) out << entry.dump() << '\n';
}

ordered_json history_json(const std::vector<ConvergencePoint>& h) {
  ordered_json a = ordered_json::array();
  for (const auto& p : h) {
    ordered_json row;
    row["iteration"] = p.iteration;
    row["cost"] = p.cost;
    row["mean"] = p.mean;
    row["std"] = p.stddev;
    a.push_back(row);
  }
  return a;
}

ordered_json counts_json(const std::map<MultiIndex, long>& counts) {
  ordered_json o = ordered_json::object();
  for (const auto& [alpha, n] : counts) o[to_string(alpha)] = n;
  return o;
}

void write_distribution_outputs(const RunConfig& rc, const std::string& prefix,
                                const ScalarField& field,
                                const std::vector<ConvergencePoint>& history) {
  const fs::path dir(rc.out_dir);
  const QoiDistribution d =
      qoi_distribution(field, rc.spec.domain, rc.dist_samples, rc.seed, rc.dist_bins);
  write_histogram_csv((dir / (prefix + "_histogram.csv")).string(), d);
  write_kde_csv((dir / (prefix + "_kde.csv")).string(), d);
  write_convergence_csv((dir / (prefix + "_convergence.csv")).string(), history);
  if (rc.spec.n_params == 2)
    write_response_surface_csv((dir / (prefix + "_response_surface.csv")).string(), field,
                               rc.spec.domain, rc.surface_per_dim);
  if (rc.svg)
    write_convergence_svg((dir / (prefix + "_convergence.svg")).string(), history,
                          prefix + " estimate vs cost");
}

void run_misc(const RunConfig& rc, ordered_json& summary) {
  Evaluator ev(rc.spec);
  MiscConfig mc = rc.misc;
  mc.budget = rc.budget;
  mc.d_phys = static_cast<int>(rc.spec.fidelity_caps.size());
  MiscEngine eng(ev, mc);
  eng.run();

  const fs::path dir(rc.out_dir);
  write_log_jsonl((dir / "misc_log.jsonl").string(), eng.iteration_log());
  ScalarField field = [&eng](const Eigen::VectorXd& y) { return eng.surrogate_value(y); };
  write_distribution_outputs(rc, "misc", field, eng.history());

  ordered_json m;
  m["status"] = to_string(eng.status());
  m["iterations"] = eng.iteration();
  m["cost"] = eng.cost_spent();
  m["mean"] = eng.estimate();
  m["std"] = eng.std_estimate();
  m["evaluations"] = counts_json(ev.counts_per_fidelity());
  m["history"] = history_json(eng.history());
  summary["methods"]["misc"] = m;
}

void run_srbf(const RunConfig& rc, ordered_json& summary) {
  if (rc.spec.fidelity_caps.size() != 1)
    throw ConfigError("config: the srbf method needs a model with one fidelity direction");
  Evaluator ev(rc.spec);
  SrbfConfig sc = rc.srbf;
  sc.budget = rc.budget;
  SrbfEngine eng(ev, sc);
  eng.run();

  const fs::path dir(rc.out_dir);
  write_log_jsonl((dir / "srbf_log.jsonl").string(), eng.iteration_log());
  const MultiFidelitySurrogate& sur = eng.surrogate();
  ScalarField field = [&sur](const Eigen::VectorXd& y) { return sur.predict(y); };
  write_distribution_outputs(rc, "srbf", field, eng.history());

  ordered_json m;
  m["status"] = to_string(eng.status());
  m["iterations"] = eng.iteration();
  m["cost"] = ev.cost_spent();
  m["mean"] = eng.mean();
  m["std"] = eng.stddev();
  m["max_uncertainty"] = eng.max_uncertainty();
  m["range_estimate"] = eng.range_estimate();
  m["evaluations"] = counts_json(ev.counts_per_fidelity());
  m["history"] = history_json(eng.history());
  summary["methods"]["srbf"] = m;
}

}  // namespace

ModelSpec build_model_spec(const json& m) {
  if (!m.is_object()) throw ConfigError("config: 'model' must be an object");
  const std::string kind = get_string(m, "model", "kind", "builtin");
  if (kind == "builtin") {
    reject_unknown_keys(m, "model", {"kind", "noise_amp", "noise_seed", "bias_amp"});
    const double noise = get_number(m, "model", "noise_amp", 0.01);
    const long seed = get_integer(m, "model", "noise_seed", 0);
    const double bias = get_number(m, "model", "bias_amp", 0.3);
    if (seed < 0) throw ConfigError("config field 'model.noise_seed': expected >= 0");
    return default_benchmark(noise, static_cast<std::uint64_t>(seed), bias);
  }
  if (kind != "external")
    throw ConfigError("config field 'model.kind': expected 'builtin' or 'external'");

  reject_unknown_keys(m, "model", {"kind", "name", "command", "workdir", "lower", "upper",
                                   "fidelity_caps", "cost"});
  ModelSpec spec;
  spec.name = get_string(m, "model", "name", "external");
  ExternalSolver ex;
  ex.command = get_string(m, "model", "command", "");
  if (ex.command.empty())
    throw ConfigError("config field 'model.command': required for an external model");
  ex.workdir = get_string(m, "model", "workdir", "");
  spec.external = ex;
  const Eigen::VectorXd lower = get_vector(m, "model", "lower");
  const Eigen::VectorXd upper = get_vector(m, "model", "upper");
  if (lower.size() != upper.size())
    throw ConfigError("config: 'model.lower' and 'model.upper' must have the same length");
  spec.domain = ParamDomain{lower, upper};
  spec.n_params = static_cast<int>(lower.size());

  const json* caps = find_field(m, "fidelity_caps");
  if (!caps || !caps->is_array() || caps->empty())
    throw ConfigError("config field 'model.fidelity_caps': expected a non-empty integer array");
  for (const auto& c : *caps) {
    if (!c.is_number_integer() || c.get<long>() < 1)
      throw ConfigError("config field 'model.fidelity_caps': entries must be integers >= 1");
    spec.fidelity_caps.push_back(c.get<int>());
  }

  const json* cost = find_field(m, "cost");
  if (!cost || (cost->is_string() && cost->get<std::string>() == "geometric")) {
    spec.cost_fn = geometric_cost;
  } else if (cost->is_array()) {
    if (spec.fidelity_caps.size() != 1)
      throw ConfigError("config field 'model.cost': per-level arrays need one fidelity direction");
    std::vector<double> ladder;
    for (const auto& c : *cost) {
      if (!c.is_number() || !(c.get<double>() > 0))
        throw ConfigError("config field 'model.cost': entries must be positive numbers");
      ladder.push_back(c.get<double>());
    }
    if (ladder.size() != static_cast<std::size_t>(spec.fidelity_caps[0]))
      throw ConfigError("config field 'model.cost': need one entry per fidelity level");
    spec.cost_fn = [ladder](const MultiIndex& alpha) { return ladder.at(alpha.at(0) - 1); };
  } else {
    throw ConfigError("config field 'model.cost': expected 'geometric' or an array");
  }
  spec.validate();
  return spec;
}

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  reject_unknown_keys(j, "the top level",
                      {"schema_version", "method", "budget", "seed", "out", "svg", "model",
                       "misc", "srbf", "pso", "distribution"});
  const json* sv = find_field(j, "schema_version");
  if (!sv) throw ConfigError("config: missing required field 'schema_version'");
  if (!sv->is_number_integer() || sv->get<long>() != 1)
    throw ConfigError("config field 'schema_version': this build reads version 1");

  RunConfig rc;
  rc.method = method_name(get_string(j, "top level", "method", "both"));
  rc.budget = get_number(j, "top level", "budget", rc.budget);
  if (!(rc.budget > 0)) throw ConfigError("config field 'budget': expected > 0");
  const long seed = get_integer(j, "top level", "seed", 0);
  if (seed < 0) throw ConfigError("config field 'seed': expected >= 0");
  rc.seed = static_cast<std::uint64_t>(seed);
  rc.out_dir = get_string(j, "top level", "out", rc.out_dir);
  rc.svg = get_bool(j, "top level", "svg", rc.svg);

  rc.model_echo = find_field(j, "model") ? *find_field(j, "model") : json::object();
  rc.spec = build_model_spec(rc.model_echo);

  if (const json* mi = find_field(j, "misc")) {
    reject_unknown_keys(*mi, "misc", {"max_iterations", "profit_floor", "tensor_point_cap"});
    rc.misc.max_iterations = get_integer(*mi, "misc", "max_iterations", rc.misc.max_iterations);
    rc.misc.profit_floor = get_number(*mi, "misc", "profit_floor", rc.misc.profit_floor);
    rc.misc.tensor_point_cap =
        get_integer(*mi, "misc", "tensor_point_cap", rc.misc.tensor_point_cap);
  }
  if (const json* sr = find_field(j, "srbf")) {
    reject_unknown_keys(*sr, "srbf",
                        {"max_iterations", "infill_batch", "uncertainty_stop_fraction",
                         "initial_design", "quad_per_dim", "tau_count", "tau_min", "tau_max"});
    rc.srbf.max_iterations = get_integer(*sr, "srbf", "max_iterations", rc.srbf.max_iterations);
    rc.srbf.infill_batch =
        static_cast<int>(get_integer(*sr, "srbf", "infill_batch", rc.srbf.infill_batch));
    rc.srbf.uncertainty_stop_fraction = get_number(*sr, "srbf", "uncertainty_stop_fraction",
                                                   rc.srbf.uncertainty_stop_fraction);
    const std::string design = get_string(*sr, "srbf", "initial_design", "corners");
    if (design == "corners")
      rc.srbf.initial_design = SrbfConfig::InitialDesign::center_and_corners;
    else if (design == "axes")
      rc.srbf.initial_design = SrbfConfig::InitialDesign::center_and_axes;
    else
      throw ConfigError("config field 'srbf.initial_design': expected 'corners' or 'axes'");
    rc.srbf.quad_per_dim =
        static_cast<int>(get_integer(*sr, "srbf", "quad_per_dim", rc.srbf.quad_per_dim));
    rc.srbf.taus.count = static_cast<int>(get_integer(*sr, "srbf", "tau_count", rc.srbf.taus.count));
    rc.srbf.taus.tau_min = get_number(*sr, "srbf", "tau_min", rc.srbf.taus.tau_min);
    rc.srbf.taus.tau_max = get_number(*sr, "srbf", "tau_max", rc.srbf.taus.tau_max);
  }
  if (const json* ps = find_field(j, "pso")) {
    reject_unknown_keys(*ps, "pso",
                        {"particles_per_dim", "max_iters", "chi", "c1", "c2",
                         "stagnation_window", "stagnation_rel_tol"});
    PsoConfig& p = rc.srbf.pso;
    p.particles_per_dim =
        static_cast<int>(get_integer(*ps, "pso", "particles_per_dim", p.particles_per_dim));
    p.max_iters = static_cast<int>(get_integer(*ps, "pso", "max_iters", p.max_iters));
    p.chi = get_number(*ps, "pso", "chi", p.chi);
    p.c1 = get_number(*ps, "pso", "c1", p.c1);
    p.c2 = get_number(*ps, "pso", "c2", p.c2);
    p.stagnation_window =
        static_cast<int>(get_integer(*ps, "pso", "stagnation_window", p.stagnation_window));
    p.stagnation_rel_tol = get_number(*ps, "pso", "stagnation_rel_tol", p.stagnation_rel_tol);
  }
  if (const json* di = find_field(j, "distribution")) {
    reject_unknown_keys(*di, "distribution", {"samples", "bins", "surface_per_dim"});
    rc.dist_samples = static_cast<int>(get_integer(*di, "distribution", "samples", rc.dist_samples));
    rc.dist_bins = static_cast<int>(get_integer(*di, "distribution", "bins", rc.dist_bins));
    rc.surface_per_dim =
        static_cast<int>(get_integer(*di, "distribution", "surface_per_dim", rc.surface_per_dim));
  }
  return rc;
}

int run_command(const std::string& config_path, const RunOverrides& ov) {
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open config file: " + config_path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse: ") + e.what());
  }
  RunConfig rc = parse_run_config(j);
  if (!ov.method.empty()) rc.method = method_name(ov.method);
  if (ov.budget >= 0) {
    if (!(ov.budget > 0)) throw ConfigError("--budget: expected > 0");
    rc.budget = ov.budget;
  }
  if (!ov.out_dir.empty()) rc.out_dir = ov.out_dir;
  if (ov.seed >= 0) rc.seed = static_cast<std::uint64_t>(ov.seed);
  rc.svg = rc.svg || ov.svg;

  fs::create_directories(rc.out_dir);
  ordered_json summary;
  summary["schema_version"] = 1;
  summary["model"] = rc.model_echo;
  summary["budget"] = rc.budget;
  summary["seed"] = rc.seed;
  summary["methods"] = ordered_json::object();
  if (rc.method == "misc" || rc.method == "both") run_misc(rc, summary);
  if (rc.method == "srbf" || rc.method == "both") run_srbf(rc, summary);

  const fs::path path = fs::path(rc.out_dir) / "summary.json";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path.string());
  out << summary.dump(2) << '\n';
  return 0;
}

int compare_command(const std::vector<std::string>& summary_paths, long iteration) {
  if (summary_paths.empty()) throw ConfigError("compare: need at least one summary.json path");
  struct Row {
    std::string file, method, kind;
    long iteration;
    double cost, mean, stddev;
  };
  std::vector<Row> rows;
  for (const std::string& path : summary_paths) {
    std::ifstream in(path);
    if (!in) throw ConfigError("compare: cannot open '" + path + "'");
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("compare: '" + path + "': " + e.what());
    }
    const json* sv = find_field(j, "schema_version");
    if (!sv || !sv->is_number_integer() || sv->get<long>() != 1)
      throw ConfigError("compare: '" + path + "': missing or unsupported schema_version");
    const json* methods = find_field(j, "methods");
    if (!methods || !methods->is_object())
      throw ConfigError("compare: '" + path + "': missing 'methods' object");
    for (const auto& [name, m] : methods->items()) {
      const json* hist = find_field(m, "history");
      if (!hist || !hist->is_array() || hist->empty())
        throw ConfigError("compare: '" + path + "': method '" + name + "' has no history");
      auto row_at = [&](std::size_t i, const char* kind) {
        const json& h = (*hist)[i];
        rows.push_back({path, name, kind, get_integer(h, "history", "iteration", 0),
                        get_number(h, "history", "cost", 0), get_number(h, "history", "mean", 0),
                        get_number(h, "history", "std", 0)});
      };
      std::size_t mid = hist->size() / 2;
      if (iteration >= 0) {
        // largest logged iteration not beyond the requested one
        mid = 0;
        for (std::size_t i = 0; i < hist->size(); ++i)
          if (get_integer((*hist)[i], "history", "iteration", 0) <= iteration) mid = i;
      }
      if (mid + 1 < hist->size()) row_at(mid, "intermediate");
      row_at(hist->size() - 1, "final");
    }
  }

  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
  };
  std::vector<std::array<std::string, 7>> cells;
  cells.push_back({"file", "method", "point", "iteration", "cost", "mean", "std"});
  for (const Row& r : rows)
    cells.push_back({r.file, r.method, r.kind, std::to_string(r.iteration), fmt(r.cost),
                     fmt(r.mean), fmt(r.stddev)});
  std::array<std::size_t, 7> width{};
  for (const auto& row : cells)
    for (int c = 0; c < 7; ++c) width[c] = std::max(width[c], row[c].size());
  for (const auto& row : cells) {
    std::string line;
    for (int c = 0; c < 7; ++c) {
      line += row[c];
      if (c < 6) line += std::string(width[c] - row[c].size() + 2, ' ');
    }
    std::cout << line << '\n';
  }
  return 0;
}

}  // namespace mfuq
