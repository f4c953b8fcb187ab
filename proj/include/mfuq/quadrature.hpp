#pragma once

#include <vector>

#include <Eigen/Core>

#include "mfuq/multi_index.hpp"

namespace mfuq {

// Axis-aligned box of admissible model parameters.
struct ParamDomain {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int dim() const { return static_cast<int>(lower.size()); }
  void validate() const;  // throws unless lower_i < upper_i for all i

  bool contains(const Eigen::VectorXd& y, double rel_slack = 1e-12) const;
  Eigen::VectorXd to_unit(const Eigen::VectorXd& y) const;
  Eigen::VectorXd from_unit(const Eigen::VectorXd& u) const;
  Eigen::VectorXd center() const { return 0.5 * (lower + upper); }

  static ParamDomain unit(int n);                      // [0,1]^n
  static ParamDomain symmetric(int n, double half = 1.0);  // [-half,half]^n
};

// Nodes-per-level: 0, 1, then 2^(i-1)+1; doubling keeps node sets nested.
int level_to_nodes(int level);

// Extrema-of-cosine nodes on [-1,1], descending from +1; K=1 gives the
// midpoint {0}. Symmetrised so coarser levels subsample finer ones bit-exactly.
Eigen::VectorXd cc_nodes(int K);

// Matching weights against the *uniform* density on [-1,1] (they sum to 1).
// Exact for polynomials of degree <= K-1.
Eigen::VectorXd cc_weights(int K);

struct TensorRule {
  MultiIndex beta;                          // per-direction levels, >= 1
  std::vector<Eigen::VectorXd> axis_nodes;  // domain coordinates
  std::vector<Eigen::VectorXd> axis_weights;
  Eigen::MatrixXd points;   // (prod K_n) x N, last direction varies fastest
  Eigen::VectorXd weights;  // sums to 1

  Eigen::Index size() const { return weights.size(); }
};

// Cartesian product of per-direction rules mapped affinely onto dom.
TensorRule tensor_rule(const MultiIndex& beta, const ParamDomain& dom,
                       long point_cap = 1000000);

// Value at y of the polynomial interpolating `values` on the rule's grid
// (barycentric form, per-direction contraction). values follows rule.points.
double tensor_interpolate(const TensorRule& rule, const Eigen::VectorXd& values,
                          const Eigen::VectorXd& y);

}  // namespace mfuq
