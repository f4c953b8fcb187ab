#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "mfuq/model.hpp"
#include "mfuq/pso.hpp"
#include "mfuq/rbf.hpp"
#include "mfuq/stats.hpp"

namespace mfuq {

// stalled: a refinement round produced no new model data (every candidate
// point already evaluated at every fidelity), so further rounds cannot help.
enum class SrbfStatus { running, budget_exhausted, uncertainty_target, max_iterations, stalled };
std::string to_string(SrbfStatus s);

struct SrbfConfig {
  TauGrid taus;
  double budget = std::numeric_limits<double>::infinity();
  long max_iterations = 1000;
  int infill_batch = 4;  // provisional refinements per iteration
  // Stop once the peak surrogate uncertainty falls below this fraction of the
  // response range seen in the initial design.
  double uncertainty_stop_fraction = 0.05;
  enum class InitialDesign { center_and_corners, center_and_axes } initial_design =
      InitialDesign::center_and_corners;
  int quad_per_dim = 100;  // cell-center rule for the per-iteration moments
  long quad_point_cap = 10000000;
  std::vector<double> per_fidelity_cost;  // optional override, else taken from the model
  PsoConfig pso;
  int scan_fallback_per_dim = 32;  // grid sweep when the swarm sees only non-finite values
  // An infill candidate closer than this (unit-cube distance) to existing
  // training data adds nothing new there; it is snapped onto that point so the
  // escalation rule can spend the round on a higher fidelity instead.
  double snap_radius = 0.02;
};

// Additive surrogate chain: a base fit of the coarsest fidelity plus one
// error-correction fit per fidelity gap. Level L prediction sums the first
// L terms; uncertainties combine in quadrature.
class MultiFidelitySurrogate {
 public:
  MultiFidelitySurrogate() = default;
  MultiFidelitySurrogate(ParamDomain dom, SrbfSurrogate base,
                         std::vector<SrbfSurrogate> level_errors);

  int levels() const { return 1 + static_cast<int>(errors_.size()); }
  const ParamDomain& domain() const { return dom_; }
  const SrbfSurrogate& base() const { return base_; }
  const SrbfSurrogate& level_error(int gap) const;  // gap in [1, levels()-1]

  double predict(const Eigen::VectorXd& y) const;  // top level
  double predict_level(int level, const Eigen::VectorXd& y) const;
  double uncertainty(const Eigen::VectorXd& y) const;
  Eigen::VectorXd component_uncertainties(const Eigen::VectorXd& y) const;

  // Unit-cube variants; the adaptive loop and the optimizer work in [0,1]^N.
  double predict_level_unit(int level, const Eigen::VectorXd& u) const;
  Eigen::VectorXd predict_batch_unit(const Eigen::MatrixXd& us) const;  // top level
  double uncertainty_unit(const Eigen::VectorXd& u) const;
  Eigen::VectorXd component_uncertainties_unit(const Eigen::VectorXd& u) const;

 private:
  ParamDomain dom_;
  SrbfSurrogate base_;
  std::vector<SrbfSurrogate> errors_;
};

// Which fidelity to refine: largest uncertainty per unit cost, ties resolved
// toward the cheaper (lower) fidelity. Returns a 1-based fidelity.
int choose_fidelity(const Eigen::VectorXd& component_uncertainties,
                    const std::vector<double>& cost_per_fidelity);

struct SrbfTrainingSet {
  Eigen::MatrixXd points_unit;  // J x N
  Eigen::VectorXd values;
  std::vector<bool> provisional;
  long find(const Eigen::VectorXd& u) const;  // exact coordinate match, -1 if absent
  void append(const Eigen::VectorXd& u, double value, bool provisional_flag);
  void remove_row(long i);
  long size() const { return points_unit.rows(); }
};

class SrbfEngine {
 public:
  SrbfEngine(Evaluator& evaluator, SrbfConfig config);

  // First step evaluates the initial design at every fidelity; later steps run
  // one refinement round (tune, provisional infill, real evaluations, stats).
  // Returns true while the run should continue.
  bool step();
  void run();

  SrbfStatus status() const { return status_; }
  long iteration() const { return iteration_; }
  double mean() const { return mean_; }
  double stddev() const { return stddev_; }
  double max_uncertainty() const { return max_uncertainty_; }
  double range_estimate() const { return range_estimate_; }
  const MultiFidelitySurrogate& surrogate() const { return surrogate_; }
  const std::vector<ConvergencePoint>& history() const { return history_; }
  const nlohmann::ordered_json& iteration_log() const { return log_; }
  const SrbfTrainingSet& training_set(int fidelity) const;  // 1-based
  const std::vector<double>& fidelity_costs() const { return gamma_; }

 private:
  void initial_design();
  bool retune();  // leave-one-out size selection; true if any fit size changed
  // Refit the surrogate chain from the current sets. Mid-iteration refits that
  // only steer infill placement run on a thinned tau grid; the grid passed to
  // the final refit of an iteration is always the configured one.
  void rebuild(const TauGrid& taus);
  void rebuild() { rebuild(cfg_.taus); }
  TauGrid guide_taus() const;
  PsoResult locate_peak();  // maximize uncertainty over the unit cube
  void refine();            // one full infill round
  void finish_iteration(nlohmann::json iteration_entry);
  bool insert_provisional(const Eigen::VectorXd& u, int up_to_fidelity);
  void snap_to_record(Eigen::VectorXd& u) const;   // reuse a nearby training point
  bool saturated(const Eigen::VectorXd& u) const;  // present in every training set
  // Replace a saturated peak by the best lattice cell that can still grow a
  // set; sampling a point the sets already hold everywhere cannot reduce
  // anything. Returns false only when every cell is saturated too.
  bool redirect_to_growable(PsoResult& peak) const;
  void drop_provisionals();
  int fit_size(int fidelity, long available) const;  // K for the next fit
  const Eigen::MatrixXd& moment_grid_unit(int per_dim);  // cached cell-center rule

  Evaluator& ev_;
  SrbfConfig cfg_;
  int n_ = 0;  // parameters
  int m_ = 0;  // fidelities
  std::vector<double> gamma_;
  std::vector<SrbfTrainingSet> sets_;  // index 0 = fidelity 1
  std::vector<int> k_star_;            // selected fit sizes, -1 before first tuning
  std::vector<bool> interpolate_;      // per fidelity: fit size tracks the set size
  std::vector<double> noise_rmse_;     // last leave-one-out RMSE, -1 when not tuned
  std::vector<long> tuned_at_;         // set size at the last tuning, -1 before
  MultiFidelitySurrogate surrogate_;
  bool have_peak_ = false;
  PsoResult peak_;  // argmax carried into the next round's first infill
  std::map<int, Eigen::MatrixXd> moment_grids_;  // per-dim count -> unit-cube points

  SrbfStatus status_ = SrbfStatus::running;
  long iteration_ = 0;
  double range_estimate_ = 0.0;
  double mean_ = 0.0, stddev_ = 0.0, max_uncertainty_ = 0.0;
  std::vector<ConvergencePoint> history_;
  nlohmann::ordered_json log_ = nlohmann::ordered_json::array();
};

}  // namespace mfuq
