#include "mfuq/model.hpp"

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mfuq {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t double_bits(double v) {
  std::uint64_t b;
  std::memcpy(&b, &v, sizeof b);
  return b;
}

}  // namespace

double hash_uniform01(std::uint64_t seed, const MultiIndex& alpha,
                      const std::vector<std::uint64_t>& unit_bits) {
  std::uint64_t h = splitmix64(seed ^ 0x5bf0f5e4a9d3c1b7ULL);
  for (int a : alpha) h = splitmix64(h ^ static_cast<std::uint64_t>(a));
  for (std::uint64_t b : unit_bits) h = splitmix64(h ^ b);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double geometric_cost(const MultiIndex& alpha) {
  double c = 1.0;
  for (int a : alpha) c *= std::pow(8.0, a - 1);
  return c;
}

void ModelSpec::validate() const {
  if (n_params < 1) throw std::invalid_argument("model: n_params must be >= 1");
  domain.validate();
  if (domain.dim() != n_params)
    throw std::invalid_argument("model: domain dimension must equal n_params");
  if (fidelity_caps.empty())
    throw std::invalid_argument("model: needs at least one fidelity direction");
  for (int c : fidelity_caps)
    if (c < 1) throw std::invalid_argument("model: fidelity caps must be >= 1");
  if (!cost_fn) throw std::invalid_argument("model: cost_fn not set");
  const int backends = (benchmark ? 1 : 0) + (external ? 1 : 0);
  if (backends != 1)
    throw std::invalid_argument("model: exactly one backend (builtin or external) required");
}

bool ModelSpec::fidelity_available(const MultiIndex& alpha) const {
  if (alpha.size() != fidelity_caps.size()) return false;
  for (std::size_t i = 0; i < alpha.size(); ++i)
    if (alpha[i] < 1 || alpha[i] > fidelity_caps[i]) return false;
  return true;
}

ParamDomain default_domain() {
  ParamDomain dom;
  dom.lower = Eigen::Vector2d(1.185, 0.2355);
  dom.upper = Eigen::Vector2d(2.567, 0.2878);
  return dom;
}

ModelSpec default_benchmark(double noise_amp, std::uint64_t seed, double bias_amp) {
  ModelSpec spec;
  spec.name = "default";
  spec.n_params = 2;
  spec.domain = default_domain();
  spec.fidelity_caps = {4};
  spec.cost_fn = geometric_cost;

  auto bench = std::make_shared<SyntheticBenchmark>();
  bench->truth = [](const Eigen::VectorXd& t) { return std::exp(t[0]) * std::cos(t[1]); };
  bench->bias = [bias_amp](const MultiIndex& alpha, const Eigen::VectorXd& t) {
    return bias_amp * std::pow(4.0, -alpha[0]) * std::cos(3.0 * t[0] + t[1]);
  };
  bench->noise_amp = noise_amp;
  bench->truth_range = std::exp(1.0) - std::exp(-1.0) * std::cos(1.0);
  bench->seed = seed;
  spec.benchmark = bench;
  return spec;
}

std::string Evaluator::default_cache_path() {
  const char* env = std::getenv("MFUQ_CACHE");
  return env ? std::string(env) : std::string();
}

Evaluator::Evaluator(ModelSpec spec, std::string cache_path)
    : spec_(std::move(spec)), cache_path_(std::move(cache_path)) {
  spec_.validate();
  if (!cache_path_.empty()) load_cache_file();
}

Evaluator::Key Evaluator::make_key(const MultiIndex& alpha,
                                   const Eigen::VectorXd& y) const {
  Key k;
  k.alpha = alpha;
  const Eigen::VectorXd u = spec_.domain.to_unit(y);
  k.ubits.resize(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) k.ubits[i] = double_bits(u[i]);
  return k;
}

double Evaluator::compute(const MultiIndex& alpha, const Eigen::VectorXd& y,
                          double* cost_out) {
  *cost_out = spec_.cost_fn(alpha);
  if (spec_.external) return compute_external(alpha, y, cost_out);

  const auto& b = *spec_.benchmark;
  const Eigen::VectorXd u = spec_.domain.to_unit(y);
  const Eigen::VectorXd t = 2.0 * u - Eigen::VectorXd::Ones(u.size());
  double v = b.truth(t);
  if (b.bias) v += b.bias(alpha, t);
  if (b.noise_amp > 0.0) {
    const double amp = b.noise_amp * std::pow(2.0, -(alpha[0] - 1)) * b.truth_range;
    std::vector<std::uint64_t> ubits(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) ubits[i] = double_bits(u[i]);
    v += amp * (2.0 * hash_uniform01(b.seed, alpha, ubits) - 1.0);
  }
  return v;
}

double Evaluator::compute_external(const MultiIndex& alpha, const Eigen::VectorXd& y,
                                   double* cost_out) {
  namespace fs = std::filesystem;
  const fs::path dir = spec_.external->workdir.empty()
                           ? fs::temp_directory_path()
                           : fs::path(spec_.external->workdir);
  fs::create_directories(dir);
  const std::string id = "mfuq-" + std::to_string(::getpid()) + "-" +
                         std::to_string(++request_counter_);
  const fs::path req = dir / (id + "-request.json");
  const fs::path rep = dir / (id + "-reply.json");
  const fs::path err = dir / (id + "-stderr.txt");

  nlohmann::ordered_json j;
  j["id"] = id;
  j["fidelity"] = alpha;
  j["params"] = std::vector<double>(y.data(), y.data() + y.size());
  {
    std::ofstream out(req);
    out << j.dump() << "\n";
  }

  const std::string cmd = spec_.external->command + " '" + req.string() + "' '" +
                          rep.string() + "' 2> '" + err.string() + "'";
  const int rc = std::system(cmd.c_str());

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  if (rc != 0) {
    throw std::runtime_error("external solver failed (exit status " + std::to_string(rc) +
                             ") for request " + req.string() + "; stderr: " + slurp(err));
  }
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(slurp(rep));
  } catch (const std::exception& e) {
    throw std::runtime_error("external solver reply unreadable (" + rep.string() +
                             "): " + e.what());
  }
  if (!reply.contains("id") || reply["id"].get<std::string>() != id)
    throw std::runtime_error("external solver reply id mismatch for " + rep.string());
  if (!reply.contains("value") || !reply["value"].is_number())
    throw std::runtime_error("external solver reply missing numeric value: " + rep.string());
  const double v = reply["value"].get<double>();
  if (reply.contains("cost")) *cost_out = reply["cost"].get<double>();

  std::error_code ec;
  fs::remove(req, ec);
  fs::remove(rep, ec);
  fs::remove(err, ec);
  return v;
}

EvalRecord Evaluator::evaluate(const MultiIndex& alpha, const Eigen::VectorXd& y) {
  if (!spec_.fidelity_available(alpha))
    throw std::out_of_range("evaluate: fidelity " + to_string(alpha) +
                            " outside the model's caps");
  if (!spec_.domain.contains(y))
    throw std::domain_error("evaluate: point outside the parameter domain");

  const Key key = make_key(alpha, y);
  EvalRecord rec;
  rec.y = y;
  rec.alpha = alpha;

  if (auto it = charged_.find(key); it != charged_.end()) {
    rec.value = it->second.value;
    rec.cost = it->second.cost;
    rec.origin = EvalRecord::Origin::cache;
    return rec;
  }

  Stored s{};
  if (auto it = disk_.find(key); it != disk_.end()) {
    s = it->second;
    disk_.erase(it);
    rec.origin = EvalRecord::Origin::cache;
  } else {
    s.value = compute(alpha, y, &s.cost);
    rec.origin = EvalRecord::Origin::model;
    if (!cache_path_.empty()) append_cache_line(key, y, s);
  }
  charged_.emplace(key, s);
  cost_spent_ += s.cost;
  counts_[alpha] += 1;
  rec.value = s.value;
  rec.cost = s.cost;
  return rec;
}

std::vector<EvalRecord> Evaluator::evaluate_batch(
    const std::vector<std::pair<MultiIndex, Eigen::VectorXd>>& requests) {
  std::vector<EvalRecord> out;
  out.reserve(requests.size());
  for (const auto& [alpha, y] : requests) out.push_back(evaluate(alpha, y));
  return out;
}

double Evaluator::pending_cost(const MultiIndex& alpha, const Eigen::VectorXd& y) const {
  if (!spec_.fidelity_available(alpha))
    throw std::out_of_range("pending_cost: fidelity " + to_string(alpha) +
                            " outside the model's caps");
  const Key key = make_key(alpha, y);
  if (charged_.count(key)) return 0.0;
  if (auto it = disk_.find(key); it != disk_.end()) return it->second.cost;
  return spec_.cost_fn(alpha);
}

void Evaluator::load_cache_file() {
  std::ifstream in(cache_path_);
  if (!in) return;  // nothing to replay
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("cache file " + cache_path_ + " line " +
                               std::to_string(lineno) + ": " + e.what());
    }
    Key k;
    k.alpha = j.at("alpha").get<MultiIndex>();
    for (const auto& s : j.at("ubits"))
      k.ubits.push_back(std::stoull(s.get<std::string>(), nullptr, 16));
    disk_[k] = Stored{j.at("value").get<double>(), j.at("cost").get<double>()};
  }
}

void Evaluator::append_cache_line(const Key& k, const Eigen::VectorXd& y,
                                  const Stored& s) {
  std::ofstream out(cache_path_, std::ios::app);
  nlohmann::ordered_json j;
  j["alpha"] = k.alpha;
  auto ub = nlohmann::ordered_json::array();
  char buf[32];
  for (std::uint64_t b : k.ubits) {
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(b));
    ub.push_back(std::string(buf));
  }
  j["ubits"] = ub;
  j["y"] = std::vector<double>(y.data(), y.data() + y.size());
  j["value"] = s.value;
  j["cost"] = s.cost;
  out << j.dump() << "\n";
}

}  // namespace mfuq
