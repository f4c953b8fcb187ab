#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

namespace mfuq {

// Stratified midpoints of [tau_min, tau_max]; the kernel exponent is averaged
// over these samples instead of being drawn at random.
struct TauGrid {
  double tau_min = 1.0;
  double tau_max = 3.0;
  int count = 1000;

  double step() const { return (tau_max - tau_min) / count; }
  double tau(int i) const { return tau_min + (i + 0.5) * step(); }
};

// Weights of f(y) = sum_k w_k ||y - c_k||^tau fitted to (points, values):
// square systems interpolate, rectangular ones are least squares. A
// rank-deficient system falls back to the minimum-norm solution and sets
// *condition_warning.
Eigen::VectorXd rbf_fit(const Eigen::MatrixXd& points, const Eigen::VectorXd& values,
                        const Eigen::MatrixXd& centers, double tau,
                        bool* condition_warning = nullptr);

// Deterministic k-means: farthest-point seeding from the data, Lloyd sweeps
// with lowest-index tie-breaks, at most 100 sweeps. K = |points| returns the
// points themselves; K = 1 returns the centroid.
Eigen::MatrixXd kmeans_centers(const Eigen::MatrixXd& points, int K);

// Power-kernel ensemble surrogate: one weight vector per tau sample; the
// prediction is the ensemble mean and the uncertainty the central 95% band.
class SrbfSurrogate {
 public:
  enum class Mode { interpolation, regression };

  SrbfSurrogate() = default;

  // centers closer than 1e-12 are collapsed before fitting
  static SrbfSurrogate fit(const Eigen::MatrixXd& points, const Eigen::VectorXd& values,
                           const Eigen::MatrixXd& centers, const TauGrid& taus);
  static SrbfSurrogate zero(int n_dims);
  static SrbfSurrogate from_parts(Eigen::MatrixXd centers, Eigen::MatrixXd weights,
                                  TauGrid taus, Mode mode);

  double predict(const Eigen::VectorXd& y) const;
  Eigen::VectorXd predict_batch(const Eigen::MatrixXd& ys) const;  // one row per point
  double uncertainty(const Eigen::VectorXd& y) const;  // quantile band, >= 0
  Eigen::VectorXd tau_values(const Eigen::VectorXd& y) const;

  int n_dims() const { return static_cast<int>(centers_.cols()); }
  int n_centers() const { return static_cast<int>(centers_.rows()); }
  Mode mode() const { return mode_; }
  bool condition_warning() const { return condition_warning_; }
  const TauGrid& taus() const { return taus_; }
  const Eigen::MatrixXd& centers() const { return centers_; }
  const Eigen::MatrixXd& weights() const { return weights_; }

 private:
  Eigen::MatrixXd centers_;  // K x N
  Eigen::MatrixXd weights_;  // count x K
  TauGrid taus_;
  Mode mode_ = Mode::interpolation;
  bool condition_warning_ = false;
};

// K = |points| interpolates on the points; smaller K regresses on k-means
// centers.
SrbfSurrogate build_surrogate(const Eigen::MatrixXd& points, const Eigen::VectorXd& values,
                              int K, const TauGrid& taus);

// ceil(p*n)-th order statistic (empirical CDF inverse with CDF(min) > 0).
double empirical_quantile(const Eigen::VectorXd& samples, double p);

struct LoocvResult {
  int K_star = 0;
  std::vector<std::pair<int, double>> rmse_curve;  // (K, rmse) per candidate
};

// Leave-one-out RMSE per candidate center count; centers are re-derived by
// k-means on each reduced set, K is clamped to the reduced-set size. Ties
// pick the smallest K. Beyond 16 points the refits switch to the closed-form
// least-squares leave-one-out identity on a thinned tau grid; the exact path
// below that size is what the oracle tests pin down.
LoocvResult loocv_select_K(const Eigen::MatrixXd& points, const Eigen::VectorXd& values,
                           const std::vector<int>& candidates, const TauGrid& taus);

}  // namespace mfuq
