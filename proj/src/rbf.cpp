#include "mfuq/rbf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace mfuq {

namespace {

constexpr double kCenterCollapseTol = 1e-12;

Eigen::MatrixXd distance_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      d(i, j) = (a.row(i) - b.row(j)).norm();
  return d;
}

Eigen::MatrixXd collapse_close_centers(const Eigen::MatrixXd& centers) {
  const Eigen::Index K = centers.rows();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < K; ++i) {
    bool dup = false;
    for (Eigen::Index j : keep)
      if ((centers.row(i) - centers.row(j)).norm() < kCenterCollapseTol) {
        dup = true;
        break;
      }
    if (!dup) keep.push_back(i);
  }
  if (static_cast<Eigen::Index>(keep.size()) == K) return centers;
  Eigen::MatrixXd out(keep.size(), centers.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) out.row(r) = centers.row(keep[r]);
  return out;
}

// Solve one kernel system: LU for square, normal equations otherwise, with a
// rank-revealing minimum-norm fallback when the cheap path is unreliable.
Eigen::VectorXd solve_kernel_system(const Eigen::MatrixXd& A, const Eigen::VectorXd& f,
                                    bool* condition_warning) {
  const bool square = A.rows() == A.cols();
  Eigen::VectorXd w;
  if (square) {
    w = Eigen::PartialPivLU<Eigen::MatrixXd>(A).solve(f);
    const double resid = (A * w - f).cwiseAbs().maxCoeff();
    const double scale = A.cwiseAbs().maxCoeff() * w.cwiseAbs().maxCoeff() +
                         f.cwiseAbs().maxCoeff();
    if (w.allFinite() && resid <= 1e-8 * std::max(scale, 1e-300)) return w;
  } else {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(A.cols(), A.cols());
    M.selfadjointView<Eigen::Lower>().rankUpdate(A.transpose());
    M.triangularView<Eigen::StrictlyUpper>() = M.transpose();
    const Eigen::VectorXd b = A.transpose() * f;
    w = M.ldlt().solve(b);
    const double resid = (M * w - b).cwiseAbs().maxCoeff();
    const double scale = M.cwiseAbs().maxCoeff() * w.cwiseAbs().maxCoeff() +
                         b.cwiseAbs().maxCoeff();
    if (w.allFinite() && resid <= 1e-8 * std::max(scale, 1e-300)) return w;
  }
  if (condition_warning) *condition_warning = true;
  return A.completeOrthogonalDecomposition().solve(f);  // minimum-norm least squares
}

// Visit D^tau elementwise for every tau sample. Within short chunks the next
// power comes from one multiply by D^step; each chunk restarts from pow() so
// rounding drift stays bounded.
template <class Arr, class F>
void tau_power_sweep(const Arr& base, const TauGrid& g, F&& visit) {
  const int n = g.count;
  if (n < 1) throw std::invalid_argument("tau grid: count must be >= 1");
  const Arr ratio = base.pow(g.step());
  const int chunk = std::max(1, n / 8);
  Arr a;
  for (int s = 0; s < n; s += chunk) {
    a = base.pow(g.tau(s));
    visit(s, a);
    const int e = std::min(n, s + chunk);
    for (int i = s + 1; i < e; ++i) {
      a *= ratio;
      visit(i, a);
    }
  }
}

}  // namespace

Eigen::VectorXd rbf_fit(const Eigen::MatrixXd& points, const Eigen::VectorXd& values,
                        const Eigen::MatrixXd& centers, double tau,
                        bool* condition_warning) {
  if (points.rows() != values.size())
    throw std::invalid_argument("rbf_fit: points/values size mismatch");
  if (points.cols() != centers.cols())
    throw std::invalid_argument("rbf_fit: points/centers dimension mismatch");
  if (points.rows() < centers.rows())
    throw std::invalid_argument("rbf_fit: more centers than points");
  if (!(tau > 0.0)) throw std::invalid_argument("rbf_fit: tau must be positive");
  const Eigen::MatrixXd A =
      distance_matrix(points, centers).array().pow(tau).matrix();
  bool warn = false;
  Eigen::VectorXd w = solve_kernel_system(A, values, &warn);
  if (condition_warning) *condition_warning = warn;
  return w;
}

SrbfSurrogate SrbfSurrogate::fit(const Eigen::MatrixXd& points,
                                 const Eigen::VectorXd& values,
                                 const Eigen::MatrixXd& centers_in, const TauGrid& taus) {
  if (points.rows() != values.size())
    throw std::invalid_argument("srbf fit: points/values size mismatch");
  if (points.rows() == 0) throw std::invalid_argument("srbf fit: empty training set");
  const Eigen::MatrixXd centers = collapse_close_centers(centers_in);
  if (points.rows() < centers.rows())
    throw std::invalid_argument("srbf fit: more centers than points");

  SrbfSurrogate s;
  s.centers_ = centers;
  s.taus_ = taus;
  s.mode_ = centers.rows() == points.rows() ? Mode::interpolation : Mode::regression;
  s.weights_.resize(taus.count, centers.rows());

  const Eigen::ArrayXXd D = distance_matrix(points, centers).array();
  bool warn = false;
  tau_power_sweep(Eigen::ArrayXXd(D), taus, [&](int i, const Eigen::ArrayXXd& a) {
    s.weights_.row(i) = solve_kernel_system(a.matrix(), values, &warn).transpose();
  });
  s.condition_warning_ = warn;
  return s;
}

SrbfSurrogate SrbfSurrogate::zero(int n_dims) {
  SrbfSurrogate s;
  s.centers_.resize(0, n_dims);
  s.weights_.resize(0, 0);
  return s;
}

SrbfSurrogate SrbfSurrogate::from_parts(Eigen::MatrixXd centers, Eigen::MatrixXd weights,
                                        TauGrid taus, Mode mode) {
  SrbfSurrogate s;
  if (weights.cols() != centers.rows() || weights.rows() != taus.count)
    throw std::invalid_argument("srbf from_parts: inconsistent shapes");
  s.centers_ = std::move(centers);
  s.weights_ = std::move(weights);
  s.taus_ = taus;
  s.mode_ = mode;
  return s;
}

Eigen::VectorXd SrbfSurrogate::tau_values(const Eigen::VectorXd& y) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(taus_.count);
  if (n_centers() == 0) return out;
  Eigen::ArrayXd r(n_centers());
  for (int k = 0; k < n_centers(); ++k) r[k] = (y.transpose() - centers_.row(k)).norm();
  tau_power_sweep(Eigen::ArrayXd(r), taus_, [&](int i, const Eigen::ArrayXd& p) {
    out[i] = weights_.row(i).dot(p.matrix());
  });
  return out;
}

double SrbfSurrogate::predict(const Eigen::VectorXd& y) const {
  if (n_centers() == 0) return 0.0;
  return tau_values(y).mean();
}

Eigen::VectorXd SrbfSurrogate::predict_batch(const Eigen::MatrixXd& ys) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(ys.rows());
  if (n_centers() == 0 || ys.rows() == 0) return out;
  const Eigen::Index chunk = 65536;  // bounds the distance-matrix footprint
  for (Eigen::Index s = 0; s < ys.rows(); s += chunk) {
    const Eigen::Index len = std::min(chunk, ys.rows() - s);
    const Eigen::ArrayXXd D = distance_matrix(ys.middleRows(s, len), centers_).array();
    Eigen::VectorXd o = Eigen::VectorXd::Zero(len);
    tau_power_sweep(Eigen::ArrayXXd(D), taus_, [&](int i, const Eigen::ArrayXXd& a) {
      o.noalias() += a.matrix() * weights_.row(i).transpose();
    });
    out.segment(s, len) = o / static_cast<double>(taus_.count);
  }
  return out;
}

double empirical_quantile(const Eigen::VectorXd& samples, double p) {
  const int n = static_cast<int>(samples.size());
  if (n == 0) throw std::invalid_argument("empirical_quantile: empty sample");
  int k = static_cast<int>(std::ceil(p * n));
  k = std::clamp(k, 1, n);
  std::vector<double> v(samples.data(), samples.data() + n);
  std::nth_element(v.begin(), v.begin() + (k - 1), v.end());
  return v[k - 1];
}

double SrbfSurrogate::uncertainty(const Eigen::VectorXd& y) const {
  if (n_centers() == 0) return 0.0;
  const Eigen::VectorXd v = tau_values(y);
  return empirical_quantile(v, 0.975) - empirical_quantile(v, 0.025);
}

SrbfSurrogate build_surrogate(const Eigen::MatrixXd& points, const Eigen::VectorXd& values,
                              int K, const TauGrid& taus) {
  if (K == points.rows())
    return SrbfSurrogate::fit(points, values, points, taus);
  return SrbfSurrogate::fit(points, values, kmeans_centers(points, K), taus);
}

Eigen::MatrixXd kmeans_centers(const Eigen::MatrixXd& points, int K) {
  const Eigen::Index J = points.rows();
  if (K < 1 || K > J) throw std::invalid_argument("kmeans: K must be in [1, |points|]");

  // farthest-point seeding: start from the point farthest from the centroid,
  // then repeatedly take the point farthest from the chosen set
  std::vector<Eigen::Index> chosen;
  {
    const Eigen::RowVectorXd mean = points.colwise().mean();
    Eigen::Index first = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < J; ++i) {
      const double d = (points.row(i) - mean).squaredNorm();
      if (d > best) {
        best = d;
        first = i;
      }
    }
    chosen.push_back(first);
    Eigen::VectorXd dist(J);
    for (Eigen::Index i = 0; i < J; ++i)
      dist[i] = (points.row(i) - points.row(first)).squaredNorm();
    while (static_cast<int>(chosen.size()) < K) {
      Eigen::Index next = 0;
      double far = -1.0;
      for (Eigen::Index i = 0; i < J; ++i)
        if (dist[i] > far) {
          far = dist[i];
          next = i;
        }
      chosen.push_back(next);
      for (Eigen::Index i = 0; i < J; ++i)
        dist[i] = std::min(dist[i], (points.row(i) - points.row(next)).squaredNorm());
    }
  }

  Eigen::MatrixXd centers(K, points.cols());
  for (int k = 0; k < K; ++k) centers.row(k) = points.row(chosen[k]);

  std::vector<int> assign(J, -1);
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool changed = false;
    for (Eigen::Index i = 0; i < J; ++i) {
      int bestk = 0;
      double bestd = (points.row(i) - centers.row(0)).squaredNorm();
      for (int k = 1; k < K; ++k) {
        const double d = (points.row(i) - centers.row(k)).squaredNorm();
        if (d < bestd) {
          bestd = d;
          bestk = k;
        }
      }
      if (assign[i] != bestk) {
        assign[i] = bestk;
        changed = true;
      }
    }
    if (!changed) break;
    for (int k = 0; k < K; ++k) {
      Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(points.cols());
      long cnt = 0;
      for (Eigen::Index i = 0; i < J; ++i)
        if (assign[i] == k) {
          sum += points.row(i);
          ++cnt;
        }
      if (cnt > 0) centers.row(k) = sum / cnt;  // empty clusters keep their center
    }
  }
  return centers;
}

namespace {

// Reference semantics: drop one point, re-derive k-means centers from the
// reduced set, refit over the full tau grid.
double loocv_rmse_exact(const Eigen::MatrixXd& points, const Eigen::VectorXd& values,
                        int Keff, const TauGrid& taus) {
  const Eigen::Index J = points.rows();
  Eigen::MatrixXd reduced(J - 1, points.cols());
  Eigen::VectorXd rvals(J - 1);
  double sq = 0.0;
  for (Eigen::Index i = 0; i < J; ++i) {
    Eigen::Index r = 0;
    for (Eigen::Index j = 0; j < J; ++j) {
      if (j == i) continue;
      reduced.row(r) = points.row(j);
      rvals[r] = values[j];
      ++r;
    }
    const SrbfSurrogate s = build_surrogate(reduced, rvals, Keff, taus);
    const double e = values[i] - s.predict(points.row(i).transpose());
    sq += e * e;
  }
  return std::sqrt(sq / static_cast<double>(J));
}

// Large-J shortcut: centers stay the full-set k-means, the leave-one-out
// residual of each least-squares fit comes from r_i/(1-h_ii), and the tau grid
// is thinned. Only the ranking across candidate K matters at this size.
double loocv_rmse_hat(const Eigen::MatrixXd& points, const Eigen::VectorXd& values,
                      int Keff, const TauGrid& taus) {
  const Eigen::Index J = points.rows();
  const Eigen::MatrixXd centers =
      collapse_close_centers(kmeans_centers(points, Keff));
  const Eigen::ArrayXXd D = distance_matrix(points, centers).array();
  TauGrid sub = taus;
  sub.count = std::min(taus.count, 64);
  Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(J);
  tau_power_sweep(Eigen::ArrayXXd(D), sub, [&](int, const Eigen::ArrayXXd& a) {
    const Eigen::MatrixXd A = a.matrix();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(A.cols(), A.cols());
    G.selfadjointView<Eigen::Lower>().rankUpdate(A.transpose());
    G.triangularView<Eigen::StrictlyUpper>() = G.transpose();
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
    const Eigen::MatrixXd B = ldlt.solve(A.transpose());  // K x J
    const Eigen::VectorXd w = B * values;
    if (!w.allFinite()) {
      acc += std::numeric_limits<double>::infinity();
      return;
    }
    const Eigen::ArrayXd r = (values - A * w).array();
    const Eigen::ArrayXd h = (A.array() * B.transpose().array()).rowwise().sum();
    acc += r / (1.0 - h).max(1e-10);
  });
  const Eigen::ArrayXd e = acc / static_cast<double>(sub.count);
  if (!e.allFinite()) return std::numeric_limits<double>::infinity();
  return std::sqrt(e.square().mean());
}

}  // namespace

LoocvResult loocv_select_K(const Eigen::MatrixXd& points, const Eigen::VectorXd& values,
                           const std::vector<int>& candidates, const TauGrid& taus) {
  const Eigen::Index J = points.rows();
  if (J < 2) throw std::invalid_argument("loocv: need at least two points");
  if (candidates.empty()) throw std::invalid_argument("loocv: empty candidate set");

  LoocvResult res;
  for (int K : candidates) {
    if (K < 1 || K > J) throw std::invalid_argument("loocv: candidate K out of range");
    const int Keff = static_cast<int>(std::min<Eigen::Index>(K, J - 1));
    const double rmse = J <= 16 ? loocv_rmse_exact(points, values, Keff, taus)
                                : loocv_rmse_hat(points, values, Keff, taus);
    res.rmse_curve.emplace_back(K, rmse);
  }
  res.K_star = res.rmse_curve.front().first;
  double best = res.rmse_curve.front().second;
  for (const auto& [K, rmse] : res.rmse_curve) {
    if (rmse < best || (rmse == best && K < res.K_star)) {
      best = rmse;
      res.K_star = K;
    }
  }
  return res;
}

}  // namespace mfuq
