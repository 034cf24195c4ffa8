#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sktap/errors.hpp"
#include "sktap/gibbs.hpp"
#include "sktap/model.hpp"
#include "sktap/parallel.hpp"
#include "sktap/quadrature.hpp"

namespace sktap {

// f(x) = E tanh^2(h + sqrt(t x) Z).
inline double f_map(double x, double t, double h, const QuadratureRule& rule) {
  require(std::isfinite(x) && x >= 0.0, "f_map: x must be >= 0");
  require(std::isfinite(t) && t >= 0.0, "f_map: t must be >= 0");
  const double s = std::sqrt(t * x);
  return rule.expectation([&](double z) {
    const double th = std::tanh(h + s * z);
    return th * th;
  });
}

// f'(x) = t E (1 - 2 sinh^2) / cosh^4 = t E (sech^4 - 2 tanh^2 sech^2).
inline double f_prime(double x, double t, double h, const QuadratureRule& rule) {
  require(std::isfinite(x) && x >= 0.0, "f_prime: x must be >= 0");
  require(std::isfinite(t) && t >= 0.0, "f_prime: t must be >= 0");
  const double s = std::sqrt(t * x);
  return t * rule.expectation([&](double z) {
    const double th = std::tanh(h + s * z);
    const double sech2 = 1.0 - th * th;
    return sech2 * sech2 - 2.0 * th * th * sech2;
  });
}

struct SolveOptions {
  double tol = 1e-12;
  std::size_t max_iter = 10000;
  double damping = 1.0;
  // Permit t >= 1, where the fixed point need not be unique; the iteration
  // still starts from tanh^2(h).
  bool allow_nonunique = false;
};

// Root of q - f(q) on [0, 1] by bisection. g(0) <= 0 <= g(1) always holds.
inline double bisect_q(double t, double h, const QuadratureRule& rule, double width = 1e-15) {
  double lo = 0.0, hi = 1.0;
  if (f_map(0.0, t, h, rule) == 0.0) return 0.0;
  while (hi - lo > width) {
    const double mid = 0.5 * (lo + hi);
    if (mid - f_map(mid, t, h, rule) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Replica-symmetric fixed point q = E tanh^2(sqrt(t q) Z + h).
inline double solve_q(double t, double h, const QuadratureRule& rule, const SolveOptions& opts = {}) {
  require(std::isfinite(t) && t >= 0.0, "solve_q: t must be >= 0");
  require(opts.allow_nonunique || t < 1.0, "solve_q: t must be < 1");
  require(std::isfinite(h), "solve_q: h must be finite");
  require(opts.tol > 0.0 && opts.max_iter >= 1, "solve_q: tol must be > 0 and max_iter >= 1");
  require(opts.damping > 0.0 && opts.damping <= 1.0, "solve_q: damping must lie in (0, 1]");

  const double th = std::tanh(h);
  double q = th * th;
  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    const double fq = f_map(q, t, h, rule);
    if (std::abs(q - fq) <= opts.tol) return q;
    q = std::clamp((1.0 - opts.damping) * q + opts.damping * fq, 0.0, 1.0);
  }
  if (!opts.allow_nonunique) {
    q = bisect_q(t, h, rule);
    if (std::abs(q - f_map(q, t, h, rule)) <= opts.tol) return q;
  }
  throw NumericalError("solve_q: no convergence within " + std::to_string(opts.max_iter) + " iterations (t=" +
                       std::to_string(t) + ", h=" + std::to_string(h) + ")");
}

// |f(x) with `nodes` - f(x) with 2 * nodes|: a runtime adequacy check of the rule.
inline double quadrature_delta(double x, double t, double h, std::size_t nodes) {
  return std::abs(f_map(x, t, h, gauss_hermite(nodes)) - f_map(x, t, h, gauss_hermite(2 * nodes)));
}

namespace detail {

// E sech^4(s z + h), z ~ N(0,1); exact when the Gaussian is degenerate.
inline double mean_sech4(double s, double h, const QuadratureRule& rule) {
  auto g = [h](double x) {
    const double c = std::cosh(x + h);
    return 1.0 / (c * c * c * c);
  };
  if (s == 0.0) return g(0.0);
  return rule.expectation([&](double z) { return g(s * z); });
}

}  // namespace detail

// E t sech^4(sqrt(t q) Z + h); the AT condition asks for a value below 1.
inline double at_value(double t, double h, double q, const QuadratureRule& rule) {
  require(std::isfinite(t) && t >= 0.0, "at_value: t must be >= 0");
  require(q >= 0.0 && q <= 1.0, "at_value: q must lie in [0, 1]");
  return t * detail::mean_sech4(std::sqrt(t * q), h, rule);
}

// Leading-order E m_ij^2: (t/n) [1 - E t sech^4]^{-1} [E sech^4]^2.
inline double predicted_mij_sq(double t, double h, std::size_t n, const QuadratureRule& rule,
                               const SolveOptions& opts = {}) {
  require(n >= 1, "predicted_mij_sq: n must be >= 1");
  const double q = solve_q(t, h, rule, opts);
  const double e4 = detail::mean_sech4(std::sqrt(t * q), h, rule);
  const double denom = 1.0 - t * e4;
  if (!(denom > 0.0)) throw NumericalError("predicted_mij_sq: 1 - E t sech^4 <= 0 (AT condition violated)");
  return t / static_cast<double>(n) / denom * e4 * e4;
}

// ---------------------------------------------------------------------------
// Residuals against exact Gibbs data.

enum class ResidualKind { htap1, htap2, tap1, tap2 };

inline std::string to_string(ResidualKind k) {
  switch (k) {
    case ResidualKind::htap1: return "hTAP1";
    case ResidualKind::htap2: return "hTAP2";
    case ResidualKind::tap1: return "TAP1";
    case ResidualKind::tap2: return "TAP2";
  }
  return "?";
}

struct ResidualEntry {
  std::size_t i = 0;
  std::optional<std::size_t> j;
  double value = 0.0;
};

struct ResidualReport {
  ResidualKind kind = ResidualKind::htap1;
  std::vector<ResidualEntry> entries;
  double mean_square = 0.0;
};

inline ResidualReport make_report(ResidualKind kind, std::vector<ResidualEntry> entries) {
  ResidualReport r{kind, std::move(entries), 0.0};
  double s = 0.0;
  for (const auto& e : r.entries) s += e.value * e.value;
  r.mean_square = r.entries.empty() ? 0.0 : s / static_cast<double>(r.entries.size());
  return r;
}

// m_i - tanh(h_i + sum_j g_ij m_j^(i)).
inline ResidualReport htap1_residuals_from(const CouplingMatrix& cm, const ModelParams& params,
                                           const std::vector<double>& m, const CavityTables& cavity) {
  const std::size_t n = params.n;
  std::vector<ResidualEntry> entries(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x = params.field[i];
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) x += cm(i, j) * cavity.at(i, j);
    entries[i] = {i, std::nullopt, m[i] - std::tanh(x)};
  }
  return make_report(ResidualKind::htap1, std::move(entries));
}

inline ResidualReport htap1_residuals(const CouplingMatrix& cm, const ModelParams& params,
                                      const EnumerationOptions& opts = {}) {
  const ColumnTables full = column_tables(cm, params, {}, std::nullopt, opts);
  if (params.n == 1) return make_report(ResidualKind::htap1, {{0, std::nullopt, full.m[0] - std::tanh(params.field[0])}});
  return htap1_residuals_from(cm, params, full.m, cavity_magnetizations(cm, params, opts));
}

// m_ij - (1 - tanh^2(h_i + sum_k g_ik m_k^(i))) sum_{l != i} g_il m_lj^(i),
// with cavity_m = m^(i) and cavity_col[l] = m_lj^(i) (diagonal 1 - (m_j^(i))^2).
inline double htap2_residual_from(const CouplingMatrix& cm, const ModelParams& params, std::size_t i,
                                  double mij, const std::vector<double>& cavity_m,
                                  const std::vector<double>& cavity_col) {
  double x = params.field[i], y = 0.0;
  for (std::size_t l = 0; l < params.n; ++l) {
    if (l == i) continue;
    x += cm(i, l) * cavity_m[l];
    y += cm(i, l) * cavity_col[l];
  }
  const double th = std::tanh(x);
  return mij - (1.0 - th * th) * y;
}

inline double htap2_residual(const CouplingMatrix& cm, const ModelParams& params, std::size_t i, std::size_t j,
                             const EnumerationOptions& opts = {}) {
  require(i != j && i < params.n && j < params.n, "htap2_residual: need distinct sites in range");
  const ColumnTables full = column_tables(cm, params, {}, j, opts);
  const ColumnTables cav = column_tables(cm, params, ReducedSpec{}.remove(i), j, opts);
  return htap2_residual_from(cm, params, i, full.pair_column[i], cav.m, cav.pair_column);
}

// m_i - tanh(h_i + sum_j g_ij m_j - t (1 - q_N) m_i).
inline ResidualReport tap1_residuals_from(const CouplingMatrix& cm, const ModelParams& params,
                                          const std::vector<double>& m, double q_n) {
  const std::size_t n = params.n;
  const double onsager = params.t * (1.0 - q_n);
  std::vector<ResidualEntry> entries(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x = params.field[i] - onsager * m[i];
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) x += cm(i, j) * m[j];
    entries[i] = {i, std::nullopt, m[i] - std::tanh(x)};
  }
  return make_report(ResidualKind::tap1, std::move(entries));
}

inline ResidualReport tap1_residuals(const CouplingMatrix& cm, const ModelParams& params,
                                     const EnumerationOptions& opts = {}) {
  const ColumnTables full = column_tables(cm, params, {}, std::nullopt, opts);
  return tap1_residuals_from(cm, params, full.m, full.q_n);
}

// m_ij - (1 - m_i^2)(sum_{k != i} g_ik m_kj + (2t/N)(M m)_j m_i - t (1 - q_N) m_ij),
// with col[k] = m_kj (col[j] = 1 - m_j^2).
inline double tap2_residual_from(const CouplingMatrix& cm, const ModelParams& params, std::size_t i,
                                 const std::vector<double>& m, const std::vector<double>& col, double q_n) {
  const std::size_t n = params.n;
  double gm = 0.0, mm = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mm += col[k] * m[k];
    if (k != i) gm += cm(i, k) * col[k];
  }
  const double t = params.t;
  const double inner = gm + 2.0 * t / static_cast<double>(n) * mm * m[i] - t * (1.0 - q_n) * col[i];
  return col[i] - (1.0 - m[i] * m[i]) * inner;
}

inline double tap2_residual(const CouplingMatrix& cm, const ModelParams& params, std::size_t i, std::size_t j,
                            const EnumerationOptions& opts = {}) {
  require(i != j && i < params.n && j < params.n, "tap2_residual: need distinct sites in range");
  const ColumnTables full = column_tables(cm, params, {}, j, opts);
  return tap2_residual_from(cm, params, i, full.m, full.pair_column, full.q_n);
}

// Reports over all ordered pairs i != j, parallel over j.
inline ResidualReport htap2_report(const CouplingMatrix& cm, const ModelParams& params, std::size_t threads = 1) {
  const std::size_t n = params.n;
  require(n >= 2, "htap2_report: need at least two sites");
  const GibbsTables full = gibbs_tables(cm, params);
  std::vector<std::vector<ResidualEntry>> rows(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const GibbsTables cav = gibbs_tables(cm, params, ReducedSpec{}.remove(i));
    std::vector<double> col(n);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      for (std::size_t l = 0; l < n; ++l) col[l] = cav.pair(l, j);
      rows[i].push_back({i, j, htap2_residual_from(cm, params, i, full.pair(i, j), cav.m, col)});
    }
  });
  std::vector<ResidualEntry> entries;
  for (auto& r : rows) entries.insert(entries.end(), r.begin(), r.end());
  return make_report(ResidualKind::htap2, std::move(entries));
}

inline ResidualReport tap2_report(const CouplingMatrix& cm, const ModelParams& params) {
  const std::size_t n = params.n;
  require(n >= 2, "tap2_report: need at least two sites");
  const GibbsTables full = gibbs_tables(cm, params);
  std::vector<ResidualEntry> entries;
  std::vector<double> col(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      for (std::size_t k = 0; k < n; ++k) col[k] = full.pair(k, j);
      entries.push_back({i, j, tap2_residual_from(cm, params, i, full.m, col, full.q_n)});
    }
  return make_report(ResidualKind::tap2, std::move(entries));
}

}  // namespace sktap
