#include "mfuq/misc_engine.hpp"

#include <cmath>
#include <stdexcept>

namespace mfuq {

std::map<MultiIndex, long> combination_coefficients(const IndexSet& lambda) {
  if (!lambda.downward_closed())
    throw std::invalid_argument("combination coefficients need a downward-closed set");
  std::map<MultiIndex, long> out;
  const int D = lambda.dim();
  for (const auto& k : lambda.items()) {
    long c = 0;
    MultiIndex up(D);
    for (unsigned mask = 0; mask < (1u << D); ++mask) {
      up = k;
      int bits = 0;
      for (int d = 0; d < D; ++d)
        if (mask & (1u << d)) {
          ++up[d];
          ++bits;
        }
      if (lambda.contains(up)) c += (bits % 2 == 0) ? 1 : -1;
    }
    if (c != 0) out[k] = c;
  }
  return out;
}

double work_contribution(const std::function<double(const MultiIndex&)>& cost_fn,
                         const MultiIndex& alpha, const MultiIndex& beta) {
  double pts = 1.0;
  for (int b : beta) {
    if (b < 1) throw std::invalid_argument("work_contribution: levels must be >= 1");
    pts *= level_to_nodes(b) - level_to_nodes(b - 1);
  }
  return cost_fn(alpha) * pts;
}

double tensor_estimate(Evaluator& ev, const MultiIndex& alpha, const MultiIndex& beta,
                       long point_cap) {
  const TensorRule rule = tensor_rule(beta, ev.spec().domain, point_cap);
  std::vector<std::pair<MultiIndex, Eigen::VectorXd>> reqs;
  reqs.reserve(rule.size());
  for (Eigen::Index p = 0; p < rule.size(); ++p)
    reqs.emplace_back(alpha, rule.points.row(p).transpose());
  const auto recs = ev.evaluate_batch(reqs);
  double q = 0.0;
  for (Eigen::Index p = 0; p < rule.size(); ++p) q += rule.weights[p] * recs[p].value;
  return q;
}

double misc_estimate_over(const IndexSet& lambda, Evaluator& ev, int d_phys,
                          long point_cap) {
  const int N = ev.spec().n_params;
  if (lambda.dim() != d_phys + N)
    throw std::invalid_argument("misc_estimate_over: index length must be d_phys + n_params");
  double total = 0.0;
  for (const auto& [k, c] : combination_coefficients(lambda)) {
    const MultiIndex alpha(k.begin(), k.begin() + d_phys);
    const MultiIndex beta(k.begin() + d_phys, k.end());
    total += static_cast<double>(c) * tensor_estimate(ev, alpha, beta, point_cap);
  }
  return total;
}

const char* to_string(MiscStatus s) {
  switch (s) {
    case MiscStatus::running: return "running";
    case MiscStatus::budget_exhausted: return "budget_exhausted";
    case MiscStatus::max_iterations: return "max_iterations";
    case MiscStatus::stalled: return "stalled";
    case MiscStatus::profit_floor: return "profit_floor";
  }
  return "?";
}

MiscEngine::MiscEngine(Evaluator& ev, MiscConfig cfg) : ev_(ev), cfg_(cfg) {
  const auto& spec = ev_.spec();
  if (cfg_.d_phys < 1 ||
      cfg_.d_phys != static_cast<int>(spec.fidelity_caps.size()))
    throw std::invalid_argument(
        "misc: d_phys must match the model's fidelity directions");
  dim_ = cfg_.d_phys + spec.n_params;

  const MultiIndex root = unit_index(dim_);
  I_.insert(root);
  G_.insert(root);
  const TensorData& td = tensor_data(root);
  MiscExploration rec;
  rec.detail = td.q;
  rec.detail_sq = td.q_sq;
  rec.error = std::abs(td.q);
  rec.work = work_contribution(spec.cost_fn, alpha_of(root), beta_of(root));
  rec.profit = rec.error / rec.work;
  info_[root] = rec;
  estimate_ = td.q;
  estimate_sq_ = td.q_sq;
  push_history();

  nlohmann::ordered_json entry;
  entry["iteration"] = 0;
  entry["selected"] = root;
  entry["estimate"] = estimate_;
  entry["std"] = std_estimate();
  entry["cost"] = ev_.cost_spent();
  log_.push_back(entry);
}

MultiIndex MiscEngine::alpha_of(const MultiIndex& c) const {
  return MultiIndex(c.begin(), c.begin() + cfg_.d_phys);
}

MultiIndex MiscEngine::beta_of(const MultiIndex& c) const {
  return MultiIndex(c.begin() + cfg_.d_phys, c.end());
}

bool MiscEngine::available(const MultiIndex& c) const {
  return ev_.spec().fidelity_available(alpha_of(c));
}

const MiscEngine::TensorData& MiscEngine::tensor_data(const MultiIndex& c) {
  if (auto it = tensors_.find(c); it != tensors_.end()) return it->second;
  const TensorRule rule =
      tensor_rule(beta_of(c), ev_.spec().domain, cfg_.tensor_point_cap);
  const MultiIndex alpha = alpha_of(c);
  std::vector<std::pair<MultiIndex, Eigen::VectorXd>> reqs;
  reqs.reserve(rule.size());
  for (Eigen::Index p = 0; p < rule.size(); ++p)
    reqs.emplace_back(alpha, rule.points.row(p).transpose());
  const auto recs = ev_.evaluate_batch(reqs);

  TensorData td;
  td.values.resize(rule.size());
  for (Eigen::Index p = 0; p < rule.size(); ++p) td.values[p] = recs[p].value;
  td.q = rule.weights.dot(td.values);
  td.q_sq = rule.weights.dot(td.values.cwiseProduct(td.values));
  return tensors_.emplace(c, std::move(td)).first->second;
}

void MiscEngine::mixed_detail(const MultiIndex& c, double* d, double* d_sq) {
  *d = 0.0;
  *d_sq = 0.0;
  MultiIndex k(dim_);
  for (unsigned mask = 0; mask < (1u << dim_); ++mask) {
    k = c;
    int bits = 0;
    bool vanished = false;
    for (int i = 0; i < dim_ && !vanished; ++i)
      if (mask & (1u << i)) {
        ++bits;
        if (--k[i] == 0) vanished = true;  // backward difference hits the empty rule
      }
    if (vanished) continue;
    const double sign = (bits % 2 == 0) ? 1.0 : -1.0;
    const TensorData& td = tensor_data(k);
    *d += sign * td.q;
    *d_sq += sign * td.q_sq;
  }
}

void MiscEngine::explore(const MultiIndex& j) {
  MiscExploration rec;
  if (!available(j)) {
    rec.available = false;  // beyond the model's fidelity caps: profit pinned to 0
  } else {
    mixed_detail(j, &rec.detail, &rec.detail_sq);
    rec.error = std::abs(rec.detail);
    rec.work = work_contribution(ev_.spec().cost_fn, alpha_of(j), beta_of(j));
    rec.profit = rec.error / rec.work;
    estimate_ += rec.detail;
    estimate_sq_ += rec.detail_sq;
  }
  G_.insert(j);
  R_.insert(j);
  info_[j] = rec;
}

double MiscEngine::std_estimate() const {
  return std::sqrt(std::max(0.0, estimate_sq_ - estimate_ * estimate_));
}

void MiscEngine::push_history() {
  history_.push_back({iteration_, ev_.cost_spent(), estimate_, std_estimate()});
}

bool MiscEngine::step() {
  if (status_ != MiscStatus::running) return false;
  if (ev_.cost_spent() >= cfg_.budget) {
    status_ = MiscStatus::budget_exhausted;
    return false;
  }
  if (iteration_ >= cfg_.max_iterations) {
    status_ = MiscStatus::max_iterations;
    return false;
  }
  ++iteration_;

  auto explored_now = nlohmann::ordered_json::array();
  const IndexSet frontier = reduced_margin(I_);
  for (const auto& j : frontier.items()) {
    if (G_.contains(j)) continue;
    if (available(j)) {
      const double w = work_contribution(ev_.spec().cost_fn, alpha_of(j), beta_of(j));
      if (ev_.cost_spent() + w > cfg_.budget) {
        status_ = MiscStatus::budget_exhausted;  // next grid would overrun
        break;
      }
    }
    explore(j);
    const auto& rec = info_.at(j);
    nlohmann::ordered_json e;
    e["index"] = j;
    e["error"] = rec.error;
    e["work"] = rec.work;
    e["profit"] = rec.profit;
    e["available"] = rec.available;
    explored_now.push_back(e);
  }

  MultiIndex chosen;
  if (status_ == MiscStatus::running) {
    if (R_.empty()) {
      status_ = MiscStatus::stalled;
    } else {
      auto best = R_.begin();
      double best_p = info_.at(*best).profit;
      for (auto it = std::next(R_.begin()); it != R_.end(); ++it)
        if (info_.at(*it).profit > best_p) {  // ties keep the lexicographic first
          best = it;
          best_p = info_.at(*it).profit;
        }
      if (cfg_.profit_floor > 0.0 && best_p < cfg_.profit_floor) {
        status_ = MiscStatus::profit_floor;
      } else {
        chosen = *best;
        I_.insert(chosen);
        R_.erase(best);
      }
    }
  }

  push_history();
  nlohmann::ordered_json entry;
  entry["iteration"] = iteration_;
  if (chosen.empty())
    entry["selected"] = nullptr;
  else
    entry["selected"] = chosen;
  if (!chosen.empty()) {
    const auto& rec = info_.at(chosen);
    entry["error"] = rec.error;
    entry["work"] = rec.work;
    entry["profit"] = rec.profit;
  }
  entry["explored"] = explored_now;
  entry["estimate"] = estimate_;
  entry["std"] = std_estimate();
  entry["cost"] = ev_.cost_spent();
  nlohmann::ordered_json counts;
  for (const auto& [a, n] : ev_.counts_per_fidelity()) counts[to_string(a)] = n;
  entry["evals_per_fidelity"] = counts;
  log_.push_back(entry);

  return status_ == MiscStatus::running;
}

void MiscEngine::run() {
  while (step()) {
  }
}

double MiscEngine::surrogate_value(const Eigen::VectorXd& y,
                                   const MultiIndex* alpha_view) const {
  IndexSet lambda(dim_);
  for (const auto& [k, rec] : info_) {
    if (!rec.available) continue;
    if (alpha_view) {
      const MultiIndex a = alpha_of(k);
      bool within = a.size() == alpha_view->size();
      for (std::size_t i = 0; within && i < a.size(); ++i)
        if (a[i] > (*alpha_view)[i]) within = false;
      if (!within) continue;
    }
    lambda.insert(k);
  }
  double v = 0.0;
  for (const auto& [k, c] : combination_coefficients(lambda)) {
    const TensorRule rule =
        tensor_rule(beta_of(k), ev_.spec().domain, cfg_.tensor_point_cap);
    v += static_cast<double>(c) * tensor_interpolate(rule, tensors_.at(k).values, y);
  }
  return v;
}

}  // namespace mfuq
