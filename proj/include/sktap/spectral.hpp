#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sktap/errors.hpp"
#include "sktap/gibbs.hpp"
#include "sktap/model.hpp"

namespace sktap {

// Pieces of Lambda - t A - G - E0, with Lambda_ii = (1 - m_i^2)^{-1},
// A_ij = 2 m_i m_j / n and E0 = -t (1 - q_N).
struct DeformedOperator {
  Eigen::VectorXd lambda_diag;
  Eigen::MatrixXd rank_one;
  Eigen::MatrixXd g;
  double t = 0.0;
  double e0 = 0.0;

  // Lambda - t A - G, without the -E0 shift.
  Eigen::MatrixXd matrix(bool include_rank_one = true) const {
    Eigen::MatrixXd out = -g;
    out.diagonal() += lambda_diag;
    if (include_rank_one) out -= t * rank_one;
    return out;
  }
};

inline DeformedOperator build_deformed(const CouplingMatrix& cm, const ModelParams& params, const GibbsTables& tables) {
  params.validate();
  const std::size_t n = params.n;
  require(cm.size() == n && tables.n == n, "build_deformed: size mismatch");
  const auto ni = static_cast<Eigen::Index>(n);
  DeformedOperator op;
  op.t = params.t;
  op.lambda_diag.resize(ni);
  Eigen::VectorXd m(ni);
  for (std::size_t i = 0; i < n; ++i) {
    const double mi = tables.m[i];
    if (!(std::abs(mi) < 1.0)) throw NumericalError("build_deformed: magnetization saturated, |m_i| = 1 in floating point");
    m[static_cast<Eigen::Index>(i)] = mi;
    op.lambda_diag[static_cast<Eigen::Index>(i)] = 1.0 / (1.0 - mi * mi);
  }
  op.rank_one = (2.0 / static_cast<double>(n)) * m * m.transpose();
  op.g = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(cm.entries().data(),
                                                                                                   ni, ni);
  op.e0 = -params.t * (1.0 - tables.q_n);
  return op;
}

struct ResolventDiagnostics {
  double error = 0.0;           // relative Frobenius error of M against the resolvent
  double min_eigenvalue = 0.0;  // of Lambda - t A - G
  double e0 = 0.0;
  double condition = 0.0;       // of Lambda - t A - G - E0
};

inline constexpr double kSingularCondition = 1e12;

inline ResolventDiagnostics resolvent_diagnostics(const CouplingMatrix& cm, const ModelParams& params,
                                                  const GibbsTables& tables, bool include_rank_one = true) {
  const DeformedOperator op = build_deformed(cm, params, tables);
  const std::size_t n = params.n;
  const auto ni = static_cast<Eigen::Index>(n);
  const Eigen::MatrixXd base = op.matrix(include_rank_one);
  Eigen::MatrixXd h = base;
  h.diagonal().array() -= op.e0;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalError("resolvent: eigenvalue solve failed");
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double smallest = ev.cwiseAbs().minCoeff();
  const double cond = smallest > 0.0 ? ev.cwiseAbs().maxCoeff() / smallest : std::numeric_limits<double>::infinity();
  if (!(cond <= kSingularCondition))
    throw NumericalError("resolvent: operator numerically singular (condition " + std::to_string(cond) + ")");

  Eigen::MatrixXd m(ni, ni);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = tables.pair(i, j);
  const Eigen::MatrixXd resolvent = h.partialPivLu().solve(Eigen::MatrixXd::Identity(ni, ni));

  ResolventDiagnostics d;
  d.error = (m - resolvent).norm() / m.norm();
  d.min_eigenvalue = ev.minCoeff() + op.e0;
  d.e0 = op.e0;
  d.condition = cond;
  return d;
}

inline double resolvent_error(const CouplingMatrix& cm, const ModelParams& params, bool include_rank_one = true,
                              const EnumerationOptions& opts = {}) {
  return resolvent_diagnostics(cm, params, gibbs_tables(cm, params, {}, opts), include_rank_one).error;
}

namespace detail {

// phi(S) = n^{-1} sum 1/(Lambda_ii - e - t S) and X = n^{-1} sum (Lambda_ii - e - t S)^{-2}.
inline std::pair<double, double> s_map(std::span<const double> lambda, double t, double e, double s) {
  double phi = 0.0, x = 0.0;
  for (double l : lambda) {
    const double d = l - e - t * s;
    if (!(d > 0.0)) throw NumericalError("self_consistent_s: iteration left the real branch (e inside the spectrum)");
    phi += 1.0 / d;
    x += 1.0 / (d * d);
  }
  const auto n = static_cast<double>(lambda.size());
  return {phi / n, x / n};
}

}  // namespace detail

// Solves S = n^{-1} sum 1/(Lambda_ii - e - t S) on the branch continuous from t = 0:
// fixed-point iteration from S0 = n^{-1} sum 1/(Lambda_ii - e), then Newton polish.
inline double self_consistent_s(std::span<const double> lambda, double t, double e, double tol = 1e-12,
                                std::size_t max_iter = 100000) {
  require(!lambda.empty(), "self_consistent_s: lambda must be nonempty");
  require(std::isfinite(t) && t >= 0.0 && std::isfinite(e), "self_consistent_s: t must be >= 0 and e finite");
  require(tol > 0.0, "self_consistent_s: tol must be > 0");
  double s = detail::s_map(lambda, 0.0, e, 0.0).first;
  if (t == 0.0) return s;

  bool converged = false;
  for (std::size_t it = 0; it < max_iter; ++it) {
    const double next = detail::s_map(lambda, t, e, s).first;
    const bool done = std::abs(next - s) <= tol;
    s = next;
    if (done) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NumericalError("self_consistent_s: no convergence");

  for (int it = 0; it < 4; ++it) {
    const auto [phi, x] = detail::s_map(lambda, t, e, s);
    const double slope = 1.0 - t * x;
    if (!(slope > 0.0)) break;
    const double next = s - (s - phi) / slope;
    if (next == s) break;
    s = next;
  }
  const double gap = std::abs(s - detail::s_map(lambda, t, e, s).first);
  if (!(gap <= tol)) throw NumericalError("self_consistent_s: fixed point not satisfied");
  return s;
}

// (central difference of S at e0 with the given step, X / (1 - t X)).
inline std::pair<double, double> s_prime_from_lambda(std::span<const double> lambda, double t, double e0,
                                                     double step = 1e-5) {
  require(step > 0.0, "s_prime: step must be > 0");
  const double tight = 1e-15;
  const double fd = (self_consistent_s(lambda, t, e0 + step, tight) - self_consistent_s(lambda, t, e0 - step, tight)) /
                    (2.0 * step);
  const double s = self_consistent_s(lambda, t, e0, tight);
  const double x = detail::s_map(lambda, t, e0, s).second;
  const double denom = 1.0 - t * x;
  if (!(denom > 0.0)) throw NumericalError("s_prime: 1 - t X <= 0");
  return {fd, x / denom};
}

inline std::pair<double, double> s_prime_at_e0(const CouplingMatrix& cm, const ModelParams& params,
                                               double step = 1e-5, const EnumerationOptions& opts = {}) {
  const GibbsTables tables = gibbs_tables(cm, params, {}, opts);
  const DeformedOperator op = build_deformed(cm, params, tables);
  const std::vector<double> lambda(op.lambda_diag.data(), op.lambda_diag.data() + op.lambda_diag.size());
  return s_prime_from_lambda(lambda, params.t, op.e0, step);
}

}  // namespace sktap
