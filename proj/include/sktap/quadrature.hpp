#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sktap/errors.hpp"

namespace sktap {

// Nodes and weights for E f(Z), Z ~ N(0,1).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const noexcept { return nodes.size(); }

  template <class F>
  double expectation(F&& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
    return s;
  }
};

namespace detail {

// Orthonormal probabilists' Hermite polynomials p_0..p_{count-1} at x:
// returns (p_{count-1}, p_{count-2}) and accumulates sum of squares.
inline void hermite_orthonormal(double x, std::size_t count, double& last, double& prev, double& sum_sq) {
  double p0 = 1.0, p1 = 0.0;
  sum_sq = 1.0;
  prev = 0.0;
  last = p0;
  for (std::size_t k = 1; k < count; ++k) {
    p1 = (x * last - std::sqrt(static_cast<double>(k - 1)) * prev) / std::sqrt(static_cast<double>(k));
    prev = last;
    last = p1;
    sum_sq += p1 * p1;
  }
  (void)p0;
}

}  // namespace detail

// Gauss-Hermite rule for the standard Gaussian (the physicists' rule after
// z = sqrt(2) x, weights / sqrt(pi)). Nodes from the Jacobi matrix, polished
// by Newton on the orthonormal recurrence; weights are Christoffel numbers.
inline QuadratureRule gauss_hermite(std::size_t count) {
  require(count >= 1 && count <= 1000, "gauss_hermite: node count must lie in [1, 1000]");
  QuadratureRule rule;
  rule.nodes.resize(count);
  rule.weights.resize(count);
  if (count == 1) {
    rule.nodes[0] = 0.0;
    rule.weights[0] = 1.0;
    return rule;
  }

  Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(count));
  Eigen::VectorXd sub(static_cast<Eigen::Index>(count - 1));
  for (std::size_t k = 1; k < count; ++k) sub[static_cast<Eigen::Index>(k - 1)] = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("gauss_hermite: eigenvalue solve failed");

  const double root_n = std::sqrt(static_cast<double>(count));
  for (std::size_t i = 0; i < count; ++i) {
    double x = solver.eigenvalues()[static_cast<Eigen::Index>(i)];
    double pn = 0.0, pn1 = 0.0, sum_sq = 0.0;
    for (int iter = 0; iter < 8; ++iter) {
      detail::hermite_orthonormal(x, count + 1, pn, pn1, sum_sq);
      const double dx = pn / (root_n * pn1);
      x -= dx;
      if (std::abs(dx) <= 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    double last = 0.0, prev = 0.0;
    detail::hermite_orthonormal(x, count, last, prev, sum_sq);
    rule.nodes[i] = x;
    rule.weights[i] = 1.0 / sum_sq;
  }

  // Exact symmetry about zero.
  for (std::size_t i = 0; i < count / 2; ++i) {
    const std::size_t j = count - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (count % 2 == 1) rule.nodes[count / 2] = 0.0;
  return rule;
}

}  // namespace sktap
