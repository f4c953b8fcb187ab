#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mfuq/quadrature.hpp"

namespace mfuq {

using ScalarField = std::function<double(const Eigen::VectorXd&)>;

struct ConvergencePoint {
  long iteration = 0;
  double cost = 0.0, mean = 0.0, stddev = 0.0;
};

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;  // sqrt(E[f^2] - E[f]^2), clamped at 0
};

// Mean/std of f against the uniform density on dom: cell-center rule with
// per_dim cells per direction.
Moments moments_midpoint(const ScalarField& f, const ParamDomain& dom, int per_dim = 100,
                         long point_cap = 10000000);

// Same moments via a nested tensor quadrature of the given per-direction level.
Moments moments_tensor_cc(const ScalarField& f, const ParamDomain& dom, int level = 7,
                          long point_cap = 10000000);

struct QoiDistribution {
  int n_samples = 0;
  double sample_min = 0.0, sample_max = 0.0;
  Eigen::VectorXd bin_edges;  // bins + 1
  Eigen::VectorXi counts;     // per bin
  Eigen::VectorXd density;    // counts / (n * width)
  Eigen::VectorXd kde_x, kde_density;
  bool log_transform = true;  // false: data not positive, kernel applied untransformed
};

// Push f through seeded uniform samples of dom; histogram plus a Gaussian
// kernel density with Silverman bandwidth, fitted on log values when the
// sample is positive and mapped back.
QoiDistribution qoi_distribution(const ScalarField& f, const ParamDomain& dom,
                                 int n = 10000, std::uint64_t seed = 0, int bins = 25,
                                 int kde_points = 256);

// Column layouts are stable: downstream plots parse them by header.
void write_convergence_csv(const std::string& path, const std::vector<ConvergencePoint>& rows);
void write_histogram_csv(const std::string& path, const QoiDistribution& d);
void write_kde_csv(const std::string& path, const QoiDistribution& d);
void write_response_surface_csv(const std::string& path, const ScalarField& f,
                                const ParamDomain& dom, int per_dim = 100);
void write_convergence_svg(const std::string& path, const std::vector<ConvergencePoint>& rows,
                           const std::string& title);

std::string format_float(double v);  // shortest round-trip style, %.17g

}  // namespace mfuq
