#include "mfuq/srbf_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mfuq {

namespace {

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (long i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

long interpolation_cap(int n_params) {
  long cap = 1;
  for (int d = 0; d < n_params; ++d) {
    if (cap > std::numeric_limits<long>::max() / 5) return std::numeric_limits<long>::max();
    cap *= 5;
  }
  return cap;
}

}  // namespace

std::string to_string(SrbfStatus s) {
  switch (s) {
    case SrbfStatus::running: return "running";
    case SrbfStatus::budget_exhausted: return "budget_exhausted";
    case SrbfStatus::uncertainty_target: return "uncertainty_target";
    case SrbfStatus::max_iterations: return "max_iterations";
    case SrbfStatus::stalled: return "stalled";
  }
  return "unknown";
}

MultiFidelitySurrogate::MultiFidelitySurrogate(ParamDomain dom, SrbfSurrogate base,
                                               std::vector<SrbfSurrogate> level_errors)
    : dom_(std::move(dom)), base_(std::move(base)), errors_(std::move(level_errors)) {
  dom_.validate();
}

const SrbfSurrogate& MultiFidelitySurrogate::level_error(int gap) const {
  if (gap < 1 || gap > static_cast<int>(errors_.size()))
    throw std::out_of_range("level_error: gap outside [1, levels()-1]");
  return errors_[gap - 1];
}

double MultiFidelitySurrogate::predict_level_unit(int level, const Eigen::VectorXd& u) const {
  if (level < 1 || level > levels())
    throw std::out_of_range("predict_level: level outside [1, levels()]");
  double v = base_.predict(u);
  for (int i = 1; i < level; ++i) v += errors_[i - 1].predict(u);
  return v;
}

Eigen::VectorXd MultiFidelitySurrogate::predict_batch_unit(const Eigen::MatrixXd& us) const {
  Eigen::VectorXd v = base_.predict_batch(us);
  for (const SrbfSurrogate& e : errors_) v += e.predict_batch(us);
  return v;
}

Eigen::VectorXd MultiFidelitySurrogate::component_uncertainties_unit(
    const Eigen::VectorXd& u) const {
  Eigen::VectorXd c(levels());
  c[0] = base_.uncertainty(u);
  for (std::size_t i = 0; i < errors_.size(); ++i) c[i + 1] = errors_[i].uncertainty(u);
  return c;
}

double MultiFidelitySurrogate::uncertainty_unit(const Eigen::VectorXd& u) const {
  return component_uncertainties_unit(u).norm();
}

double MultiFidelitySurrogate::predict(const Eigen::VectorXd& y) const {
  return predict_level_unit(levels(), dom_.to_unit(y));
}

double MultiFidelitySurrogate::predict_level(int level, const Eigen::VectorXd& y) const {
  return predict_level_unit(level, dom_.to_unit(y));
}

double MultiFidelitySurrogate::uncertainty(const Eigen::VectorXd& y) const {
  return uncertainty_unit(dom_.to_unit(y));
}

Eigen::VectorXd MultiFidelitySurrogate::component_uncertainties(const Eigen::VectorXd& y) const {
  return component_uncertainties_unit(dom_.to_unit(y));
}

int choose_fidelity(const Eigen::VectorXd& component_uncertainties,
                    const std::vector<double>& cost_per_fidelity) {
  const long m = component_uncertainties.size();
  if (m == 0 || static_cast<long>(cost_per_fidelity.size()) != m)
    throw std::invalid_argument("choose_fidelity: component/cost size mismatch");
  int best = 0;
  double best_ratio = -std::numeric_limits<double>::infinity();
  for (long i = 0; i < m; ++i) {
    if (!(cost_per_fidelity[i] > 0.0))
      throw std::invalid_argument("choose_fidelity: costs must be positive");
    const double r = component_uncertainties[i] / cost_per_fidelity[i];
    if (r > best_ratio) {
      best_ratio = r;
      best = static_cast<int>(i);
    }
  }
  return best + 1;
}

long SrbfTrainingSet::find(const Eigen::VectorXd& u) const {
  for (long i = 0; i < points_unit.rows(); ++i) {
    bool same = true;
    for (long d = 0; d < points_unit.cols(); ++d)
      if (points_unit(i, d) != u[d]) {  // exact bits: points are reused, never re-derived
        same = false;
        break;
      }
    if (same) return i;
  }
  return -1;
}

void SrbfTrainingSet::append(const Eigen::VectorXd& u, double value, bool provisional_flag) {
  const long j = points_unit.rows();
  points_unit.conservativeResize(j + 1, u.size());
  points_unit.row(j) = u.transpose();
  values.conservativeResize(j + 1);
  values[j] = value;
  provisional.push_back(provisional_flag);
}

void SrbfTrainingSet::remove_row(long i) {
  const long j = points_unit.rows();
  for (long r = i; r + 1 < j; ++r) {
    points_unit.row(r) = points_unit.row(r + 1);
    values[r] = values[r + 1];
    provisional[r] = provisional[r + 1];
  }
  points_unit.conservativeResize(j - 1, points_unit.cols());
  values.conservativeResize(j - 1);
  provisional.pop_back();
}

SrbfEngine::SrbfEngine(Evaluator& evaluator, SrbfConfig config)
    : ev_(evaluator), cfg_(std::move(config)) {
  const ModelSpec& spec = ev_.spec();
  spec.validate();
  if (spec.fidelity_caps.size() != 1)
    throw std::invalid_argument(
        "srbf engine drives a single fidelity ladder; expected exactly one fidelity direction");
  m_ = spec.fidelity_caps[0];
  n_ = spec.n_params;
  if (cfg_.infill_batch < 1)
    throw std::invalid_argument("srbf engine: infill_batch must be >= 1");
  if (!(cfg_.uncertainty_stop_fraction >= 0.0))
    throw std::invalid_argument("srbf engine: uncertainty_stop_fraction must be >= 0");
  if (cfg_.taus.count < 1) throw std::invalid_argument("srbf engine: empty tau grid");
  if (cfg_.max_iterations < 1)
    throw std::invalid_argument("srbf engine: max_iterations must be >= 1");
  gamma_ = cfg_.per_fidelity_cost;
  if (gamma_.empty()) {
    gamma_.resize(m_);
    for (int a = 1; a <= m_; ++a) gamma_[a - 1] = spec.cost_fn(MultiIndex{a});
  }
  if (static_cast<int>(gamma_.size()) != m_)
    throw std::invalid_argument("srbf engine: per_fidelity_cost size must match the fidelity count");
  for (double g : gamma_)
    if (!(g > 0.0) || !std::isfinite(g))
      throw std::invalid_argument("srbf engine: fidelity costs must be positive and finite");
  sets_.resize(m_);
  k_star_.assign(m_, -1);
  interpolate_.assign(m_, true);
  noise_rmse_.assign(m_, -1.0);
  tuned_at_.assign(m_, -1);
}

const SrbfTrainingSet& SrbfEngine::training_set(int fidelity) const {
  if (fidelity < 1 || fidelity > m_)
    throw std::out_of_range("training_set: fidelity outside [1, M]");
  return sets_[fidelity - 1];
}

bool SrbfEngine::step() {
  if (status_ != SrbfStatus::running) return false;
  if (iteration_ == 0) {
    initial_design();
    return status_ == SrbfStatus::running;
  }
  if (iteration_ >= cfg_.max_iterations) {
    status_ = SrbfStatus::max_iterations;
    return false;
  }
  if (ev_.cost_spent() >= cfg_.budget) {
    status_ = SrbfStatus::budget_exhausted;
    return false;
  }
  refine();
  return status_ == SrbfStatus::running;
}

void SrbfEngine::run() {
  while (step()) {
  }
}

void SrbfEngine::initial_design() {
  iteration_ = 1;
  const ParamDomain& dom = ev_.spec().domain;
  std::vector<Eigen::VectorXd> pts;
  pts.push_back(Eigen::VectorXd::Constant(n_, 0.5));
  if (cfg_.initial_design == SrbfConfig::InitialDesign::center_and_corners) {
    if (n_ > 24) throw std::invalid_argument("corner design explodes beyond 24 parameters");
    for (long mask = 0; mask < (1L << n_); ++mask) {
      Eigen::VectorXd u(n_);
      for (int d = 0; d < n_; ++d) u[d] = ((mask >> d) & 1) ? 1.0 : 0.0;
      pts.push_back(u);
    }
  } else {
    for (int d = 0; d < n_; ++d)
      for (double v : {0.0, 1.0}) {
        Eigen::VectorXd u = Eigen::VectorXd::Constant(n_, 0.5);
        u[d] = v;
        pts.push_back(u);
      }
  }
  // The bootstrap sample is unconditional: every fidelity sees the whole
  // design, cheapest level first, even if that overshoots a tiny budget.
  for (int a = 1; a <= m_; ++a)
    for (const auto& u : pts) {
      const EvalRecord rec = ev_.evaluate(MultiIndex{a}, dom.from_unit(u));
      sets_[a - 1].append(u, rec.value, false);
    }
  const auto& top = sets_[m_ - 1].values;
  range_estimate_ = top.maxCoeff() - top.minCoeff();

  retune();
  rebuild(guide_taus());
  nlohmann::json entry;
  entry["design_points"] = static_cast<long>(pts.size());
  finish_iteration(std::move(entry));
}

int SrbfEngine::fit_size(int fidelity, long available) const {
  const int a = fidelity - 1;
  // Interpolating fits track the (possibly provisionally grown) set size;
  // regression keeps the tuned size. Both are capped by what is available.
  long k = interpolate_[a] ? available : k_star_[a];
  return static_cast<int>(std::max(1L, std::min(k, available)));
}

bool SrbfEngine::retune() {
  bool changed = false;
  const long cap = interpolation_cap(n_);
  for (int a = 0; a < m_; ++a) {
    const long J = sets_[a].size();
    // A set that received no real data since the last tuning would reproduce
    // the same selection; only grown sets are re-searched.
    if (J == tuned_at_[a]) continue;
    tuned_at_[a] = J;
    int k_new;
    bool interp_new;
    if (J <= cap) {
      k_new = static_cast<int>(J);
      interp_new = true;
    } else {
      int lo = k_star_[a] > 0 ? k_star_[a] : n_ + 1;
      lo = static_cast<int>(std::min<long>(lo, J));
      // The candidate window [lo, J] is probed on a geometric ladder (both
      // ends always rungs) instead of exhaustively; probing stops once the
      // error curve has clearly turned upward past the best rung.
      std::vector<int> ladder{lo};
      if (J > lo) {
        const int rungs = 12;
        const double ratio =
            std::pow(static_cast<double>(J) / lo, 1.0 / (rungs - 1));
        double level = lo;
        for (int i = 1; i < rungs; ++i) {
          level *= ratio;
          const int K = std::min<long>(
              J, std::max<long>(ladder.back() + 1, std::llround(level)));
          if (K > ladder.back()) ladder.push_back(K);
          if (K >= J) break;
        }
        if (ladder.back() < J) ladder.push_back(static_cast<int>(J));
      }
      int best_K = -1;
      double best_rmse = std::numeric_limits<double>::infinity();
      int worse_streak = 0;
      for (int K : ladder) {
        const LoocvResult one =
            loocv_select_K(sets_[a].points_unit, sets_[a].values, {K}, cfg_.taus);
        const double rmse = one.rmse_curve.front().second;
        if (rmse < best_rmse) {
          best_rmse = rmse;
          best_K = K;
          worse_streak = 0;
        } else if (++worse_streak >= 2 && K >= 2 * best_K) {
          break;
        }
      }
      k_new = best_K;
      interp_new = (k_new == J);
      noise_rmse_[a] = best_rmse;
    }
    if (k_new != k_star_[a] || interp_new != interpolate_[a]) changed = true;
    k_star_[a] = k_new;
    interpolate_[a] = interp_new;
  }
  return changed;
}

TauGrid SrbfEngine::guide_taus() const {
  TauGrid t = cfg_.taus;
  t.count = std::min(t.count, 125);
  return t;
}

void SrbfEngine::rebuild(const TauGrid& taus) {
  const ParamDomain& dom = ev_.spec().domain;
  SrbfSurrogate base = build_surrogate(sets_[0].points_unit, sets_[0].values,
                                       fit_size(1, sets_[0].size()), taus);
  MultiFidelitySurrogate chain(dom, std::move(base), {});
  std::vector<SrbfSurrogate> errors;
  for (int a = 2; a <= m_; ++a) {
    // Error data lives on the shared points of the two neighbouring sets.
    const SrbfTrainingSet& fine = sets_[a - 1];
    const SrbfTrainingSet& coarse = sets_[a - 2];
    std::vector<long> rows;
    for (long i = 0; i < fine.size(); ++i)
      if (coarse.find(fine.points_unit.row(i).transpose()) >= 0) rows.push_back(i);
    SrbfSurrogate err = SrbfSurrogate::zero(n_);
    if (!rows.empty()) {
      Eigen::MatrixXd P(rows.size(), n_);
      Eigen::VectorXd r(rows.size());
      for (std::size_t j = 0; j < rows.size(); ++j) {
        P.row(j) = fine.points_unit.row(rows[j]);
        r[j] = fine.values[rows[j]] -
               chain.predict_level_unit(a - 1, P.row(j).transpose());
      }
      err = build_surrogate(P, r, fit_size(a, static_cast<long>(rows.size())), taus);
    }
    errors.push_back(std::move(err));
    chain = MultiFidelitySurrogate(dom, chain.base(), errors);
  }
  surrogate_ = std::move(chain);
  have_peak_ = false;
}

PsoResult SrbfEngine::locate_peak() {
  const ParamDomain box = ParamDomain::unit(n_);
  auto objective = [this](const Eigen::VectorXd& u) { return surrogate_.uncertainty_unit(u); };
  PsoResult r = pso_maximize(objective, box, cfg_.pso);
  if (std::isfinite(r.value)) return r;
  // Swarm starved on non-finite values: sweep a coarse grid instead.
  const int per = std::max(2, cfg_.scan_fallback_per_dim);
  long total = 1;
  for (int d = 0; d < n_; ++d) {
    if (total > 2000000 / per) throw std::runtime_error("uncertainty scan grid too large");
    total *= per;
  }
  std::vector<int> idx(n_, 0);
  Eigen::VectorXd u(n_);
  bool found = false;
  for (long p = 0; p < total; ++p) {
    for (int d = 0; d < n_; ++d) u[d] = (idx[d] + 0.5) / per;
    const double v = objective(u);
    if (std::isfinite(v) && (!found || v > r.value)) {
      r.y = u;
      r.value = v;
      found = true;
    }
    for (int d = n_ - 1; d >= 0; --d) {
      if (++idx[d] < per) break;
      idx[d] = 0;
    }
  }
  if (!found) throw std::runtime_error("surrogate uncertainty is nowhere finite");
  r.any_nonfinite = true;
  return r;
}

bool SrbfEngine::insert_provisional(const Eigen::VectorXd& u, int up_to_fidelity) {
  bool any = false;
  for (int a = 1; a <= up_to_fidelity; ++a) {
    if (sets_[a - 1].find(u) >= 0) continue;
    sets_[a - 1].append(u, surrogate_.predict_level_unit(a, u), true);
    any = true;
  }
  return any;
}

bool SrbfEngine::saturated(const Eigen::VectorXd& u) const {
  for (int a = 0; a < m_; ++a)
    if (sets_[a].find(u) < 0) return false;
  return true;
}

void SrbfEngine::snap_to_record(Eigen::VectorXd& u) const {
  if (!(cfg_.snap_radius > 0.0)) return;
  const double r2 = cfg_.snap_radius * cfg_.snap_radius;
  double best = r2;
  const SrbfTrainingSet* best_set = nullptr;
  long best_row = -1;
  for (int a = 0; a < m_; ++a)
    for (long i = 0; i < sets_[a].size(); ++i) {
      const double d = (sets_[a].points_unit.row(i).transpose() - u).squaredNorm();
      if (d < best) {  // ties keep the earlier (cheaper level, older row) hit
        best = d;
        best_set = &sets_[a];
        best_row = i;
      }
    }
  if (best_set) u = best_set->points_unit.row(best_row).transpose();
}

bool SrbfEngine::redirect_to_growable(PsoResult& peak) const {
  const int per = std::max(2, cfg_.scan_fallback_per_dim);
  std::vector<int> idx(n_, 0);
  Eigen::VectorXd u(n_);
  long total = 1;
  for (int d = 0; d < n_; ++d) total *= per;
  bool found = false;
  for (long p = 0; p < total; ++p) {
    for (int d = 0; d < n_; ++d) u[d] = (idx[d] + 0.5) / per;
    if (!saturated(u)) {
      const double v = surrogate_.uncertainty_unit(u);
      if (std::isfinite(v) && (!found || v > peak.value)) {
        peak.y = u;
        peak.value = v;
        found = true;
      }
    }
    for (int d = n_ - 1; d >= 0; --d) {
      if (++idx[d] < per) break;
      idx[d] = 0;
    }
  }
  return found;
}

void SrbfEngine::drop_provisionals() {
  for (auto& set : sets_)
    for (long i = set.size() - 1; i >= 0; --i)
      if (set.provisional[i]) set.remove_row(i);
}

void SrbfEngine::refine() {
  ++iteration_;
  const ParamDomain& dom = ev_.spec().domain;
  const bool tuning_changed = retune();
  if (tuning_changed || !have_peak_) rebuild(guide_taus());

  struct Infill {
    Eigen::VectorXd u;
    int fidelity;
    double peak_uncertainty;
  };
  std::vector<Infill> batch;
  nlohmann::json infill_log = nlohmann::json::array();

  for (int b = 0; b < cfg_.infill_batch; ++b) {
    PsoResult peak = (b == 0 && have_peak_) ? peak_ : locate_peak();
    // A fresh sample right next to existing data duplicates it; reusing the
    // stored point lets the escalation below push the round up the ladder.
    snap_to_record(peak.y);
    // In regression mode the tau members may disagree most at a point the
    // sets already hold everywhere; data there is spent, so hand the round
    // to the lattice sweep instead of proposing a dead point.
    if (saturated(peak.y) && !redirect_to_growable(peak)) break;
    const Eigen::VectorXd comp = surrogate_.component_uncertainties_unit(peak.y);
    int k = choose_fidelity(comp, gamma_);
    bool grew = insert_provisional(peak.y, k);
    if (!grew) {
      // Candidate already realised up to k: push it to the next absent level.
      int k2 = 0;
      for (int a = k + 1; a <= m_; ++a)
        if (sets_[a - 1].find(peak.y) < 0) {
          k2 = a;
          break;
        }
      if (k2 == 0) break;  // unreachable after the redirect, kept as a guard
      k = k2;
      grew = insert_provisional(peak.y, k);
    }
    batch.push_back({peak.y, k, peak.value});
    nlohmann::json e;
    e["u"] = vector_to_json(peak.y);
    e["y"] = vector_to_json(dom.from_unit(peak.y));
    e["fidelity"] = k;
    e["uncertainty"] = peak.value;
    e["components"] = vector_to_json(comp);
    infill_log.push_back(e);
    // The next sub-round must see the provisional values; after the last one
    // the batch goes straight to realization.
    if (b + 1 < cfg_.infill_batch) rebuild(guide_taus());
  }

  // Realise the batch against the model, cheapest-first within each point,
  // stopping before any evaluation that would break the budget.
  long realised = 0;
  for (const Infill& inf : batch) {
    const Eigen::VectorXd y = dom.from_unit(inf.u);
    double addition = 0.0;
    for (int a = 1; a <= inf.fidelity; ++a) addition += ev_.pending_cost(MultiIndex{a}, y);
    if (ev_.cost_spent() + addition > cfg_.budget) {
      status_ = SrbfStatus::budget_exhausted;
      break;
    }
    for (int a = 1; a <= inf.fidelity; ++a) {
      const EvalRecord rec = ev_.evaluate(MultiIndex{a}, y);
      const long row = sets_[a - 1].find(inf.u);
      if (row < 0) throw std::logic_error("refine: provisional row vanished");
      sets_[a - 1].values[row] = rec.value;
      sets_[a - 1].provisional[row] = false;
    }
    ++realised;
  }
  drop_provisionals();
  rebuild(guide_taus());

  if (realised == 0 && status_ == SrbfStatus::running) status_ = SrbfStatus::stalled;

  nlohmann::json entry;
  entry["infill"] = infill_log;
  entry["realised"] = realised;
  finish_iteration(std::move(entry));
}

const Eigen::MatrixXd& SrbfEngine::moment_grid_unit(int per_dim) {
  if (per_dim < 1) throw std::invalid_argument("srbf engine: quad_per_dim must be >= 1");
  auto hit = moment_grids_.find(per_dim);
  if (hit != moment_grids_.end()) return hit->second;
  long total = 1;
  for (int d = 0; d < n_; ++d) {
    if (total > cfg_.quad_point_cap / per_dim)
      throw std::invalid_argument("srbf engine: moment grid exceeds the point cap");
    total *= per_dim;
  }
  Eigen::MatrixXd grid(total, n_);
  std::vector<int> idx(n_, 0);
  for (long p = 0; p < total; ++p) {
    for (int d = 0; d < n_; ++d) grid(p, d) = (idx[d] + 0.5) / per_dim;
    for (int d = n_ - 1; d >= 0; --d) {
      if (++idx[d] < per_dim) break;
      idx[d] = 0;
    }
  }
  return moment_grids_[per_dim] = std::move(grid);
}

void SrbfEngine::finish_iteration(nlohmann::json entry) {
  // Same cell-center rule as moments_midpoint, evaluated through the batched
  // predictor; the surrogate works in unit coordinates and the density is
  // uniform, so plain averages are the moments. While the run is still going
  // the lattice is thinned; the stopping iteration redoes the numbers on the
  // configured grid so the reported results never come from the cheap pass.
  auto compute_moments = [this](int per_dim) {
    const Eigen::VectorXd qv = surrogate_.predict_batch_unit(moment_grid_unit(per_dim));
    mean_ = qv.mean();
    stddev_ = std::sqrt(std::max(0.0, qv.array().square().mean() - mean_ * mean_));
  };
  compute_moments(std::min(cfg_.quad_per_dim, 50));
  peak_ = locate_peak();
  have_peak_ = true;
  max_uncertainty_ = peak_.value;

  if (status_ == SrbfStatus::running) {
    if (max_uncertainty_ <= cfg_.uncertainty_stop_fraction * range_estimate_)
      status_ = SrbfStatus::uncertainty_target;
    else if (ev_.cost_spent() >= cfg_.budget)
      status_ = SrbfStatus::budget_exhausted;
    else if (iteration_ >= cfg_.max_iterations)
      status_ = SrbfStatus::max_iterations;
  }
  if (status_ != SrbfStatus::running) {
    rebuild(cfg_.taus);
    compute_moments(cfg_.quad_per_dim);
    peak_ = locate_peak();
    have_peak_ = true;
    max_uncertainty_ = peak_.value;
  }

  history_.push_back({iteration_, ev_.cost_spent(), mean_, stddev_});

  nlohmann::json sizes = nlohmann::json::array(), ks = nlohmann::json::array(),
                 modes = nlohmann::json::array(), noise = nlohmann::json::array();
  for (int a = 0; a < m_; ++a) {
    sizes.push_back(sets_[a].size());
    ks.push_back(k_star_[a]);
    modes.push_back(interpolate_[a] ? "interpolation" : "regression");
    noise.push_back(noise_rmse_[a]);
  }
  nlohmann::ordered_json row;
  row["iteration"] = iteration_;
  row["cost"] = ev_.cost_spent();
  row["mean"] = mean_;
  row["std"] = stddev_;
  row["max_uncertainty"] = max_uncertainty_;
  if (range_estimate_ > 0.0)
    row["max_uncertainty_fraction"] = max_uncertainty_ / range_estimate_;
  else
    row["max_uncertainty_fraction"] = nullptr;
  row["set_sizes"] = sizes;
  row["fit_sizes"] = ks;
  row["fit_modes"] = modes;
  row["loocv_rmse"] = noise;
  for (auto& [key, val] : entry.items()) row[key] = val;
  row["status"] = to_string(status_);
  log_.push_back(row);
}

}  // namespace mfuq
