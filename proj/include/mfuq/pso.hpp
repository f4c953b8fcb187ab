#pragma once

#include <functional>

#include <Eigen/Core>

#include "mfuq/quadrature.hpp"

namespace mfuq {

// Randomness-free particle swarm: fixed lattice start, constricted velocity
// update, synchronous steps. Identical inputs give identical outputs.
struct PsoConfig {
  double chi = 0.721;
  double c1 = 1.655;
  double c2 = 1.655;
  int particles_per_dim = 4;  // full-factorial start; the box center is added
  int max_iters = 200;
  int stagnation_window = 30;
  double stagnation_rel_tol = 1e-8;
};

struct PsoResult {
  Eigen::VectorXd y;
  double value = 0.0;
  int iterations = 0;
  bool any_nonfinite = false;  // some objective values were NaN/inf
};

PsoResult pso_maximize(const std::function<double(const Eigen::VectorXd&)>& objective,
                       const ParamDomain& box, const PsoConfig& cfg = {});

}  // namespace mfuq
