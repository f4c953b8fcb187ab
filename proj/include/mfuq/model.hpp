#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mfuq/multi_index.hpp"
#include "mfuq/quadrature.hpp"

namespace mfuq {

struct EvalRecord {
  Eigen::VectorXd y;  // domain coordinates
  MultiIndex alpha;   // fidelity index, 1-based per direction
  double value = 0.0;
  double cost = 0.0;
  bool provisional = false;
  enum class Origin { model, cache, surrogate } origin = Origin::model;
};

// Closed-form test model: truth plus a fidelity-dependent bias that decays
// geometrically, plus deterministic pseudo-noise seeded per (seed, alpha, y).
// truth/bias are evaluated on the box mapped to [-1,1]^N.
struct SyntheticBenchmark {
  std::function<double(const Eigen::VectorXd&)> truth;
  std::function<double(const MultiIndex&, const Eigen::VectorXd&)> bias;
  double noise_amp = 0.0;    // fraction of truth_range at the coarsest level
  double truth_range = 1.0;  // scales the noise
  std::uint64_t seed = 0;
};

struct ExternalSolver {
  // invoked as: command <request.json> <reply.json>; exit 0 means success
  std::string command;
  std::string workdir;  // empty -> system temp dir
};

struct ModelSpec {
  std::string name;
  int n_params = 0;
  ParamDomain domain;
  std::vector<int> fidelity_caps;  // one entry per fidelity direction, >= 1
  std::function<double(const MultiIndex&)> cost_fn;
  std::shared_ptr<SyntheticBenchmark> benchmark;  // exactly one of these
  std::optional<ExternalSolver> external;         // two backends is an error

  void validate() const;
  bool fidelity_available(const MultiIndex& alpha) const;
};

// Geometric cost ladder: unit cost at the coarsest level, factor 8 per
// refinement, multiplied over fidelity directions.
double geometric_cost(const MultiIndex& alpha);

// exp(t1)*cos(t2) truth on the default two-parameter domain, M=4 fidelities.
ModelSpec default_benchmark(double noise_amp = 0.01, std::uint64_t seed = 0,
                            double bias_amp = 0.3);
ParamDomain default_domain();  // speed x draught box of the reference hull study

// Deterministic uniform draw in [0,1) from (seed, alpha, unit coords).
double hash_uniform01(std::uint64_t seed, const MultiIndex& alpha,
                      const std::vector<std::uint64_t>& unit_bits);

// Memoising evaluation front end. A point is identified by the exact bit
// pattern of its unit-cube coordinates together with alpha; each distinct
// record charges its cost to the run ledger exactly once, whether it was
// computed fresh or replayed from the persistent cache file.
class Evaluator {
 public:
  explicit Evaluator(ModelSpec spec, std::string cache_path = default_cache_path());

  EvalRecord evaluate(const MultiIndex& alpha, const Eigen::VectorXd& y);
  std::vector<EvalRecord> evaluate_batch(
      const std::vector<std::pair<MultiIndex, Eigen::VectorXd>>& requests);

  // Ledger cost evaluate() would add for this request right now: zero when
  // already charged this run, the recorded cost when replayable from disk,
  // else the declared cost of alpha.
  double pending_cost(const MultiIndex& alpha, const Eigen::VectorXd& y) const;

  const ModelSpec& spec() const { return spec_; }
  double cost_spent() const { return cost_spent_; }
  std::size_t unique_evaluations() const { return charged_.size(); }
  const std::map<MultiIndex, long>& counts_per_fidelity() const { return counts_; }

  // MFUQ_CACHE environment variable, or empty (no persistence).
  static std::string default_cache_path();

 private:
  struct Key {
    MultiIndex alpha;
    std::vector<std::uint64_t> ubits;
    bool operator<(const Key& o) const {
      return alpha != o.alpha ? alpha < o.alpha : ubits < o.ubits;
    }
  };
  struct Stored {
    double value, cost;
  };

  Key make_key(const MultiIndex& alpha, const Eigen::VectorXd& y) const;
  double compute(const MultiIndex& alpha, const Eigen::VectorXd& y, double* cost_out);
  double compute_external(const MultiIndex& alpha, const Eigen::VectorXd& y,
                          double* cost_out);
  void load_cache_file();
  void append_cache_line(const Key& k, const Eigen::VectorXd& y, const Stored& s);

  ModelSpec spec_;
  std::string cache_path_;
  std::map<Key, Stored> disk_;     // replayed, not yet charged this run
  std::map<Key, Stored> charged_;  // consumed by this run
  std::map<MultiIndex, long> counts_;
  double cost_spent_ = 0.0;
  long request_counter_ = 0;
};

}  // namespace mfuq
