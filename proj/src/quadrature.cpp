#include "mfuq/quadrature.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mfuq {

void ParamDomain::validate() const {
  if (lower.size() != upper.size() || lower.size() == 0)
    throw std::invalid_argument("domain: lower/upper size mismatch or empty");
  for (Eigen::Index i = 0; i < lower.size(); ++i)
    if (!(lower[i] < upper[i]))
      throw std::invalid_argument("domain: requires lower < upper in every direction");
}

bool ParamDomain::contains(const Eigen::VectorXd& y, double rel_slack) const {
  if (y.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double slack = rel_slack * (upper[i] - lower[i]);
    if (y[i] < lower[i] - slack || y[i] > upper[i] + slack) return false;
  }
  return true;
}

Eigen::VectorXd ParamDomain::to_unit(const Eigen::VectorXd& y) const {
  return (y - lower).cwiseQuotient(upper - lower);
}

Eigen::VectorXd ParamDomain::from_unit(const Eigen::VectorXd& u) const {
  return lower + u.cwiseProduct(upper - lower);
}

ParamDomain ParamDomain::unit(int n) {
  return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n)};
}

ParamDomain ParamDomain::symmetric(int n, double half) {
  return {Eigen::VectorXd::Constant(n, -half), Eigen::VectorXd::Constant(n, half)};
}

int level_to_nodes(int level) {
  if (level < 0) throw std::invalid_argument("level_to_nodes: level must be >= 0");
  if (level == 0) return 0;
  if (level == 1) return 1;
  return (1 << (level - 1)) + 1;
}

Eigen::VectorXd cc_nodes(int K) {
  if (K < 1) throw std::invalid_argument("cc_nodes: K must be >= 1");
  Eigen::VectorXd x(K);
  if (K == 1) {
    x[0] = 0.0;  // midpoint convention
    return x;
  }
  const int n = K - 1;
  // generate the upper half and mirror so that symmetric pairs and the
  // midpoint are exact; coarser levels then subsample finer ones bit-exactly
  for (int j = 0; j < K / 2; ++j) {
    x[j] = std::cos(j * M_PI / n);
    x[K - 1 - j] = -x[j];
  }
  if (K % 2 == 1) x[n / 2] = 0.0;
  return x;
}

Eigen::VectorXd cc_weights(int K) {
  if (K < 1) throw std::invalid_argument("cc_weights: K must be >= 1");
  Eigen::VectorXd w(K);
  if (K == 1) {
    w[0] = 1.0;
    return w;
  }
  const int n = K - 1;
  for (int j = 0; j <= n / 2; ++j) {
    double s = 0.0;
    for (int k = 1; k <= n / 2; ++k) {
      const double b = (2 * k == n) ? 1.0 : 2.0;
      s += b * std::cos(2.0 * k * j * M_PI / n) / (4.0 * k * k - 1.0);
    }
    const double c = (j == 0 || j == n) ? 1.0 : 2.0;
    w[j] = c / (2.0 * n) * (1.0 - s);  // the 2n folds in the uniform-density norm
    w[n - j] = w[j];
  }
  return w;
}

TensorRule tensor_rule(const MultiIndex& beta, const ParamDomain& dom, long point_cap) {
  dom.validate();
  const int N = dom.dim();
  if (static_cast<int>(beta.size()) != N)
    throw std::invalid_argument("tensor_rule: beta length must match domain dimension");

  TensorRule rule;
  rule.beta = beta;
  long total = 1;
  std::vector<int> sizes(N);
  for (int d = 0; d < N; ++d) {
    if (beta[d] < 1) throw std::invalid_argument("tensor_rule: levels must be >= 1");
    sizes[d] = level_to_nodes(beta[d]);
    if (total > point_cap / sizes[d])
      throw std::length_error("tensor_rule: grid of " + to_string(beta) +
                              " exceeds point cap " + std::to_string(point_cap));
    total *= sizes[d];
  }

  rule.axis_nodes.resize(N);
  rule.axis_weights.resize(N);
  for (int d = 0; d < N; ++d) {
    const Eigen::VectorXd t = cc_nodes(sizes[d]);
    Eigen::VectorXd mapped(sizes[d]);
    for (int j = 0; j < sizes[d]; ++j)
      mapped[j] = dom.lower[d] + (t[j] + 1.0) * 0.5 * (dom.upper[d] - dom.lower[d]);
    rule.axis_nodes[d] = mapped;
    rule.axis_weights[d] = cc_weights(sizes[d]);
  }

  rule.points.resize(total, N);
  rule.weights.resize(total);
  for (long p = 0; p < total; ++p) {
    long rem = p;
    double wp = 1.0;
    for (int d = N - 1; d >= 0; --d) {
      const int j = static_cast<int>(rem % sizes[d]);
      rem /= sizes[d];
      rule.points(p, d) = rule.axis_nodes[d][j];
      wp *= rule.axis_weights[d][j];
    }
    rule.weights[p] = wp;
  }
  return rule;
}

namespace {

// Barycentric weights for extrema-of-cosine nodes: alternating signs, halved
// at the ends; interval scaling cancels in the quotient form.
Eigen::VectorXd barycentric_basis(const Eigen::VectorXd& x, double y) {
  const int K = static_cast<int>(x.size());
  Eigen::VectorXd b = Eigen::VectorXd::Zero(K);
  if (K == 1) {
    b[0] = 1.0;
    return b;
  }
  for (int j = 0; j < K; ++j) {
    if (y == x[j]) {
      b[j] = 1.0;
      return b;
    }
  }
  double denom = 0.0;
  for (int j = 0; j < K; ++j) {
    double lam = (j % 2 == 0) ? 1.0 : -1.0;
    if (j == 0 || j == K - 1) lam *= 0.5;
    b[j] = lam / (y - x[j]);
    denom += b[j];
  }
  b /= denom;
  return b;
}

}  // namespace

double tensor_interpolate(const TensorRule& rule, const Eigen::VectorXd& values,
                          const Eigen::VectorXd& y) {
  const int N = static_cast<int>(rule.axis_nodes.size());
  if (values.size() != rule.size())
    throw std::invalid_argument("tensor_interpolate: values length mismatch");
  if (y.size() != N)
    throw std::invalid_argument("tensor_interpolate: point dimension mismatch");
  for (int d = 0; d < N; ++d) {
    // Global polynomials blow up off the grid's span; refuse to extrapolate.
    // Single-node directions carry no extent information and are left alone.
    const Eigen::VectorXd& x = rule.axis_nodes[d];
    if (x.size() < 2) continue;
    const double lo = x[x.size() - 1], hi = x[0];  // nodes run high to low
    const double slack = 1e-12 * (hi - lo);
    if (y[d] < lo - slack || y[d] > hi + slack)
      throw std::domain_error("tensor_interpolate: point outside the grid span");
  }

  std::vector<Eigen::VectorXd> basis(N);
  for (int d = 0; d < N; ++d) basis[d] = barycentric_basis(rule.axis_nodes[d], y[d]);

  // contract trailing directions first (they vary fastest in rule.points)
  Eigen::VectorXd work = values;
  for (int d = N - 1; d >= 0; --d) {
    const int K = static_cast<int>(basis[d].size());
    const Eigen::Index rows = work.size() / K;
    Eigen::VectorXd next(rows);
    for (Eigen::Index i = 0; i < rows; ++i)
      next[i] = work.segment(i * K, K).dot(basis[d]);
    work.swap(next);
  }
  return work[0];
}

}  // namespace mfuq
