#pragma once

#include <functional>
#include <limits>
#include <map>

#include <json.hpp>

#include "mfuq/model.hpp"
#include "mfuq/multi_index.hpp"
#include "mfuq/quadrature.hpp"
#include "mfuq/stats.hpp"

namespace mfuq {

// Coefficient of each member's tensor value in the combination-technique sum
// over a downward-closed set: signed count of the member's forward shifts
// that stay inside the set. Zero coefficients are omitted.
std::map<MultiIndex, long> combination_coefficients(const IndexSet& lambda);

// Incremental cost of one tensor grid under nested nodes: per-fidelity cost
// times the number of points the grid adds over its backward neighbours.
double work_contribution(const std::function<double(const MultiIndex&)>& cost_fn,
                         const MultiIndex& alpha, const MultiIndex& beta);

// Tensor quadrature of the model at one (fidelity, level) pair.
double tensor_estimate(Evaluator& ev, const MultiIndex& alpha, const MultiIndex& beta,
                       long point_cap = 1000000);

// Combination-technique estimate over an explicit downward-closed set of
// concatenated [fidelity | level] indices.
double misc_estimate_over(const IndexSet& lambda, Evaluator& ev, int d_phys,
                          long point_cap = 1000000);

struct MiscConfig {
  int d_phys = 1;
  double budget = std::numeric_limits<double>::infinity();
  long max_iterations = 100000;
  double profit_floor = 0.0;  // > 0: stop once the best remaining profit falls below
  long tensor_point_cap = 1000000;
};

enum class MiscStatus { running, budget_exhausted, max_iterations, stalled, profit_floor };
const char* to_string(MiscStatus s);

struct MiscExploration {
  double detail = 0.0;      // mixed difference of the quadrature value
  double detail_sq = 0.0;   // same for the squared integrand
  double error = 0.0;       // |detail|
  double work = 0.0;
  double profit = 0.0;
  bool available = true;    // false: fidelity beyond the model's caps
};

// Adaptive combination-technique driver: keeps a selected set I and an
// explored set G = I + explored reduced margin, steps by promoting the
// highest-profit explored index, estimates over all of G.
class MiscEngine {
 public:
  MiscEngine(Evaluator& ev, MiscConfig cfg);

  bool step();  // explore + select once; false once a stopping rule fired
  void run();

  const IndexSet& selected() const { return I_; }
  const IndexSet& explored_set() const { return G_; }
  const std::map<MultiIndex, MiscExploration>& explored() const { return info_; }
  double estimate() const { return estimate_; }
  double std_estimate() const;
  double cost_spent() const { return ev_.cost_spent(); }
  long iteration() const { return iteration_; }
  MiscStatus status() const { return status_; }

  // Evaluate the combined interpolating surrogate; alpha_view restricts the
  // sum to fidelities at or below the given index.
  double surrogate_value(const Eigen::VectorXd& y,
                         const MultiIndex* alpha_view = nullptr) const;

  const std::vector<ConvergencePoint>& history() const { return history_; }
  const nlohmann::ordered_json& iteration_log() const { return log_; }

 private:
  struct TensorData {
    double q = 0.0, q_sq = 0.0;
    Eigen::VectorXd values;  // model values in tensor_rule point order
  };

  MultiIndex alpha_of(const MultiIndex& combined) const;
  MultiIndex beta_of(const MultiIndex& combined) const;
  bool available(const MultiIndex& combined) const;
  const TensorData& tensor_data(const MultiIndex& combined);
  void mixed_detail(const MultiIndex& combined, double* d, double* d_sq);
  void explore(const MultiIndex& j);
  void push_history();

  Evaluator& ev_;
  MiscConfig cfg_;
  int dim_;  // d_phys + n_params
  IndexSet I_, G_;
  std::set<MultiIndex> R_;
  std::map<MultiIndex, MiscExploration> info_;
  std::map<MultiIndex, TensorData> tensors_;
  double estimate_ = 0.0, estimate_sq_ = 0.0;
  long iteration_ = 0;
  MiscStatus status_ = MiscStatus::running;
  std::vector<ConvergencePoint> history_;
  nlohmann::ordered_json log_ = nlohmann::ordered_json::array();
};

}  // namespace mfuq
