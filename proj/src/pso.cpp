#include "mfuq/pso.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace mfuq {

PsoResult pso_maximize(const std::function<double(const Eigen::VectorXd&)>& objective,
                       const ParamDomain& box, const PsoConfig& cfg) {
  box.validate();
  if (cfg.particles_per_dim < 2) throw std::invalid_argument("pso: need >= 2 particles per dim");
  const int N = box.dim();
  const int q = cfg.particles_per_dim;

  // full-factorial lattice over the box corners-inclusive, plus the center
  std::vector<Eigen::VectorXd> start;
  {
    std::vector<int> idx(N, 0);
    while (true) {
      Eigen::VectorXd y(N);
      for (int d = 0; d < N; ++d)
        y[d] = box.lower[d] + idx[d] * (box.upper[d] - box.lower[d]) / (q - 1);
      start.push_back(y);
      int d = N - 1;
      while (d >= 0 && idx[d] == q - 1) idx[d--] = 0;
      if (d < 0) break;
      ++idx[d];
    }
    if (q % 2 == 0) start.push_back(box.center());
  }
  const int P = static_cast<int>(start.size());

  Eigen::MatrixXd pos(P, N), vel = Eigen::MatrixXd::Zero(P, N), pbest_y(P, N);
  Eigen::VectorXd pbest(P);
  std::vector<bool> frozen(P, false);
  PsoResult res;
  res.value = -std::numeric_limits<double>::infinity();

  auto eval = [&](int i, const Eigen::VectorXd& y) {
    const double v = objective(y);
    if (!std::isfinite(v)) {
      res.any_nonfinite = true;
      frozen[i] = true;
      return -std::numeric_limits<double>::infinity();
    }
    return v;
  };

  for (int i = 0; i < P; ++i) {
    pos.row(i) = start[i];
    pbest_y.row(i) = start[i];
    pbest[i] = eval(i, start[i]);
    if (pbest[i] > res.value) {
      res.value = pbest[i];
      res.y = start[i];
    }
  }

  std::vector<double> best_trace{res.value};
  for (int it = 1; it <= cfg.max_iters; ++it) {
    res.iterations = it;
    for (int i = 0; i < P; ++i) {
      if (frozen[i]) continue;
      Eigen::VectorXd v = cfg.chi * (vel.row(i).transpose() +
                                     cfg.c1 * (pbest_y.row(i).transpose() - pos.row(i).transpose()) +
                                     cfg.c2 * (res.y - pos.row(i).transpose()));
      Eigen::VectorXd y = pos.row(i).transpose() + v;
      for (int d = 0; d < N; ++d) {  // clamp to the box, kill wall-normal velocity
        if (y[d] < box.lower[d]) { y[d] = box.lower[d]; v[d] = 0.0; }
        if (y[d] > box.upper[d]) { y[d] = box.upper[d]; v[d] = 0.0; }
      }
      vel.row(i) = v;
      pos.row(i) = y;
      const double f = eval(i, y);
      if (f > pbest[i]) {
        pbest[i] = f;
        pbest_y.row(i) = y;
        if (f > res.value) {
          res.value = f;
          res.y = y;
        }
      }
    }
    best_trace.push_back(res.value);
    if (it >= cfg.stagnation_window && std::isfinite(res.value)) {
      const double before = best_trace[it - cfg.stagnation_window];
      const double gain = res.value - before;
      if (gain < cfg.stagnation_rel_tol * std::max(1.0, std::abs(res.value))) break;
    }
  }
  if (res.y.size() == 0) {  // objective non-finite everywhere
    res.y = box.center();
    res.value = std::numeric_limits<double>::quiet_NaN();
  }
  return res;
}

}  // namespace mfuq
