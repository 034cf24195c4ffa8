#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include "sktap/enumeration.hpp"
#include "sktap/errors.hpp"
#include "sktap/model.hpp"

namespace sktap {

// Clamped sites (the set A with spin values tau) and removed sites (the set B).
// Empty spec = the full Gibbs measure.
struct ReducedSpec {
  std::map<std::size_t, int> clamped;
  std::set<std::size_t> removed;

  bool is_clamped(std::size_t i) const { return clamped.count(i) != 0; }
  bool is_removed(std::size_t i) const { return removed.count(i) != 0; }
  bool is_active(std::size_t i) const { return !is_clamped(i) && !is_removed(i); }

  ReducedSpec clamp(std::size_t i, int spin) const {
    ReducedSpec out = *this;
    out.clamped[i] = spin;
    return out;
  }
  ReducedSpec remove(std::size_t i) const {
    ReducedSpec out = *this;
    out.removed.insert(i);
    return out;
  }

  void validate(std::size_t n) const {
    for (const auto& [site, spin] : clamped) {
      require(site < n, "ReducedSpec: clamped site out of range");
      require(spin == 1 || spin == -1, "ReducedSpec: clamped spin must be +1 or -1");
      require(!is_removed(site), "ReducedSpec: site both clamped and removed");
    }
    for (std::size_t site : removed) require(site < n, "ReducedSpec: removed site out of range");
  }

  std::size_t active_count(std::size_t n) const { return n - clamped.size() - removed.size(); }
};

// Exact observables of one (reduced) Gibbs measure.
//   m[i]       magnetization; tau_i at clamped sites, NaN at removed sites
//   pair(i,j)  truncated correlation m_ij; pair(i,i) = 1 - m_i^2
//   q_n        sum of m_k^2 over active sites divided by n
//   q_n_active the same sum divided by the number of active sites
struct GibbsTables {
  std::size_t n = 0;
  double log_z = 0.0;
  std::vector<double> m;
  std::vector<bool> present;
  std::vector<double> pair_matrix;
  double q_n = 0.0;
  double q_n_active = 0.0;

  double pair(std::size_t i, std::size_t j) const { return pair_matrix[i * n + j]; }
};

// Magnetizations plus one column j of the pair matrix.
struct ColumnTables {
  std::size_t n = 0;
  double log_z = 0.0;
  std::vector<double> m;
  std::optional<std::size_t> column;
  std::vector<double> pair_column;  // pair_column[l] = m_lj
  double q_n = 0.0;
  double q_n_active = 0.0;
};

// m_j^(i) for all i != j: magnetizations with site i removed.
struct CavityTables {
  std::size_t n = 0;
  std::vector<double> m;  // row-major, m[i * n + j]; NaN on the diagonal

  double at(std::size_t i, std::size_t j) const { return m[i * n + j]; }
};

namespace detail {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline void check_inputs(const CouplingMatrix& cm, const ModelParams& params, const ReducedSpec& spec) {
  params.validate();
  require(cm.size() == params.n, "coupling matrix size does not match params.n");
  spec.validate(params.n);
  const std::size_t active = spec.active_count(params.n);
  require(active <= params.enum_cap,
          "active site count " + std::to_string(active) + " exceeds enum_cap " + std::to_string(params.enum_cap));
}

inline std::vector<std::ptrdiff_t> local_index(const ActiveSystem& sys, std::size_t n) {
  std::vector<std::ptrdiff_t> local(n, -1);
  for (std::size_t a = 0; a < sys.size(); ++a) local[sys.sites[a]] = static_cast<std::ptrdiff_t>(a);
  return local;
}

// Accumulator that only needs the total weight.
struct NoMoments {
  void add(double, const SpinState&) {}
  void scale(double) {}
  void merge(const NoMoments&) {}
};

inline std::pair<double, double> overlaps(const std::vector<double>& m, const ReducedSpec& spec, std::size_t n) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!spec.is_active(k)) continue;
    sum += m[k] * m[k];
    ++count;
  }
  return {sum / static_cast<double>(n), count ? sum / static_cast<double>(count) : 0.0};
}

inline std::vector<double> spec_magnetizations(const ActiveSystem& sys, const std::vector<double>& first,
                                               double weight, const ReducedSpec& spec, std::size_t n) {
  std::vector<double> m(n, kNaN);
  for (const auto& [site, spin] : spec.clamped) m[site] = spin;
  for (std::size_t a = 0; a < sys.size(); ++a) m[sys.sites[a]] = first[a] / weight;
  return m;
}

}  // namespace detail

// Reduced Hamiltonian restricted to active sites. Removed sites are masked:
// they keep their labels but contribute neither fields nor couplings.
// Couplings between two clamped sites only shift the energy and are dropped.
inline ActiveSystem reduce(const CouplingMatrix& cm, const ModelParams& params, const ReducedSpec& spec) {
  detail::check_inputs(cm, params, spec);
  const std::size_t n = params.n;
  ActiveSystem sys;
  for (std::size_t i = 0; i < n; ++i)
    if (spec.is_active(i)) sys.sites.push_back(i);
  const std::size_t k = sys.size();
  sys.field.resize(k);
  sys.coupling.assign(k * k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    const std::size_t i = sys.sites[a];
    double h = params.field[i];
    for (const auto& [site, spin] : spec.clamped) h += cm(i, site) * spin;
    sys.field[a] = h;
    for (std::size_t b = 0; b < k; ++b) sys.coupling[a * k + b] = cm(i, sys.sites[b]);
  }
  return sys;
}

inline double log_partition(const CouplingMatrix& cm, const ModelParams& params, const ReducedSpec& spec = {},
                            const EnumerationOptions& opts = {}) {
  const ActiveSystem sys = reduce(cm, params, spec);
  return enumerate_states(sys, detail::NoMoments{}, opts).log_z();
}

inline GibbsTables gibbs_tables(const CouplingMatrix& cm, const ModelParams& params, const ReducedSpec& spec = {},
                                const EnumerationOptions& opts = {}) {
  const ActiveSystem sys = reduce(cm, params, spec);
  const std::size_t n = params.n, k = sys.size();
  const auto sum = enumerate_states(sys, PairMoments(k), opts);

  GibbsTables out;
  out.n = n;
  out.log_z = sum.log_z();
  out.m = detail::spec_magnetizations(sys, sum.acc.first(), sum.weight, spec, n);
  out.present.assign(n, true);
  for (std::size_t i : spec.removed) out.present[i] = false;

  out.pair_matrix.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (!out.present[i] || !out.present[j]) out.pair_matrix[i * n + j] = detail::kNaN;
  for (std::size_t a = 0; a < k; ++a) {
    const std::size_t i = sys.sites[a];
    out.pair_matrix[i * n + i] = 1.0 - out.m[i] * out.m[i];
    for (std::size_t b = a + 1; b < k; ++b) {
      const std::size_t j = sys.sites[b];
      const double v = sum.acc.second(a, b) / sum.weight - out.m[i] * out.m[j];
      out.pair_matrix[i * n + j] = v;
      out.pair_matrix[j * n + i] = v;
    }
  }
  std::tie(out.q_n, out.q_n_active) = detail::overlaps(out.m, spec, n);
  return out;
}

// One pass, O(K) work per state: magnetizations and (optionally) column j of
// the pair matrix.
inline ColumnTables column_tables(const CouplingMatrix& cm, const ModelParams& params, const ReducedSpec& spec = {},
                                  std::optional<std::size_t> column = std::nullopt,
                                  const EnumerationOptions& opts = {}) {
  const ActiveSystem sys = reduce(cm, params, spec);
  const std::size_t n = params.n, k = sys.size();
  const auto local = detail::local_index(sys, n);
  std::optional<std::size_t> local_column;
  if (column) {
    require(*column < n && local[*column] >= 0, "column_tables: column must be an active site");
    local_column = static_cast<std::size_t>(local[*column]);
  }
  const auto sum = enumerate_states(sys, FirstMoments(k, local_column), opts);

  ColumnTables out;
  out.n = n;
  out.log_z = sum.log_z();
  out.m = detail::spec_magnetizations(sys, sum.acc.first(), sum.weight, spec, n);
  out.column = column;
  if (column) {
    const std::size_t j = *column;
    out.pair_column.assign(n, detail::kNaN);
    for (const auto& entry : spec.clamped) out.pair_column[entry.first] = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      const std::size_t l = sys.sites[a];
      out.pair_column[l] = l == j ? 1.0 - out.m[j] * out.m[j] : sum.acc.cross()[a] / sum.weight - out.m[l] * out.m[j];
    }
  }
  std::tie(out.q_n, out.q_n_active) = detail::overlaps(out.m, spec, n);
  return out;
}

// Centered third moment <(s_i - m_i)(s_j - m_j)(s_k - m_k)> over active sites.
// Repeated indices are allowed (e.g. m_ill = -2 m_l m_il).
inline double centered_third_moment(const CouplingMatrix& cm, const ModelParams& params, const ReducedSpec& spec,
                                    std::size_t i, std::size_t j, std::size_t k,
                                    const EnumerationOptions& opts = {}) {
  const ActiveSystem sys = reduce(cm, params, spec);
  const auto local = detail::local_index(sys, params.n);
  for (std::size_t s : {i, j, k})
    require(s < params.n && local[s] >= 0, "centered_third_moment: indices must be active sites");
  const TripleMoments proto(static_cast<std::size_t>(local[i]), static_cast<std::size_t>(local[j]),
                            static_cast<std::size_t>(local[k]));
  const auto sum = enumerate_states(sys, proto, opts);
  return sum.acc.centered(sum.weight);
}

inline double triple_correlation(const CouplingMatrix& cm, const ModelParams& params, const ReducedSpec& spec,
                                 std::size_t i, std::size_t j, std::size_t k, const EnumerationOptions& opts = {}) {
  require(i != j && i != k && j != k, "triple_correlation: indices must be distinct");
  return centered_third_moment(cm, params, spec, i, j, k, opts);
}

// Tables of one measure plus the centered third moments m_jkl for all l
// (NaN at removed sites, 0 at clamped ones).
struct TripleColumn {
  GibbsTables tables;
  std::vector<double> third;
};

inline TripleColumn triple_column(const CouplingMatrix& cm, const ModelParams& params, const ReducedSpec& spec,
                                  std::size_t j, std::size_t k, const EnumerationOptions& opts = {}) {
  const ActiveSystem sys = reduce(cm, params, spec);
  const std::size_t n = params.n, size = sys.size();
  const auto local = detail::local_index(sys, n);
  require(j < n && k < n && local[j] >= 0 && local[k] >= 0, "triple_column: j and k must be active sites");
  const auto lj = static_cast<std::size_t>(local[j]), lk = static_cast<std::size_t>(local[k]);
  const auto sum = enumerate_states(sys, PairMoments(size, std::pair{lj, lk}), opts);

  TripleColumn out;
  GibbsTables& t = out.tables;
  t.n = n;
  t.log_z = sum.log_z();
  t.m = detail::spec_magnetizations(sys, sum.acc.first(), sum.weight, spec, n);
  t.present.assign(n, true);
  for (std::size_t i : spec.removed) t.present[i] = false;
  t.pair_matrix.assign(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (!t.present[a] || !t.present[b]) t.pair_matrix[a * n + b] = detail::kNaN;
  auto raw = [&](std::size_t a, std::size_t b) { return sum.acc.second(a, b) / sum.weight; };
  for (std::size_t a = 0; a < size; ++a)
    for (std::size_t b = 0; b < size; ++b) {
      const std::size_t x = sys.sites[a], y = sys.sites[b];
      t.pair_matrix[x * n + y] = a == b ? 1.0 - t.m[x] * t.m[x] : raw(a, b) - t.m[x] * t.m[y];
    }
  std::tie(t.q_n, t.q_n_active) = detail::overlaps(t.m, spec, n);

  out.third.assign(n, detail::kNaN);
  for (const auto& entry : spec.clamped) out.third[entry.first] = 0.0;
  const double mj = t.m[j], mk = t.m[k];
  for (std::size_t a = 0; a < size; ++a) {
    const std::size_t l = sys.sites[a];
    const double ml = t.m[l];
    out.third[l] = sum.acc.third()[a] / sum.weight - mj * raw(lk, a) - mk * raw(lj, a) - ml * raw(lj, lk) +
                   2.0 * mj * mk * ml;
  }
  return out;
}

// delta_i f = 1/2 sum_{s=+-1} s <f>(s_i = s);  eps_i f = 1/2 sum_{s=+-1} <f>(s_i = s).
// The observable is evaluated as observable(cm, params, spec_with_i_clamped).
template <class Observable>
double delta_op(const CouplingMatrix& cm, const ModelParams& params, const ReducedSpec& spec, std::size_t i,
                Observable&& observable) {
  require(i < params.n && spec.is_active(i), "delta_op: site must be neither clamped nor removed");
  const double up = observable(cm, params, spec.clamp(i, +1));
  const double down = observable(cm, params, spec.clamp(i, -1));
  return 0.5 * (up - down);
}

template <class Observable>
double eps_op(const CouplingMatrix& cm, const ModelParams& params, const ReducedSpec& spec, std::size_t i,
              Observable&& observable) {
  require(i < params.n && spec.is_active(i), "eps_op: site must be neither clamped nor removed");
  const double up = observable(cm, params, spec.clamp(i, +1));
  const double down = observable(cm, params, spec.clamp(i, -1));
  return 0.5 * (up + down);
}

// Residual of m_ij^[A] = (1 - (m_i^[A])^2) delta_i m_j^[A+i].
// With k set, the residual of the three-point version
// m_ijk^[A] = (1 - (m_i^[A])^2) delta_i m_jk^[A+i] - 2 m_i^[A] m_ik^[A] delta_i m_j^[A+i].
inline double key_identity_residual(const CouplingMatrix& cm, const ModelParams& params, const ReducedSpec& spec,
                                    std::size_t i, std::size_t j, std::optional<std::size_t> k = std::nullopt,
                                    const EnumerationOptions& opts = {}) {
  require(i != j, "key_identity_residual: i and j must differ");
  require(i < params.n && j < params.n && spec.is_active(i) && spec.is_active(j),
          "key_identity_residual: i and j must be active sites");
  const GibbsTables base = gibbs_tables(cm, params, spec, opts);
  const double mi = base.m[i];
  const double delta_mj = delta_op(cm, params, spec, i, [&](const auto& c, const auto& p, const ReducedSpec& s) {
    return column_tables(c, p, s, std::nullopt, opts).m[j];
  });
  if (!k) return base.pair(i, j) - (1.0 - mi * mi) * delta_mj;

  require(*k != i && *k != j && *k < params.n && spec.is_active(*k),
          "key_identity_residual: k must be a distinct active site");
  const double mijk = triple_correlation(cm, params, spec, i, j, *k, opts);
  const double delta_mjk = delta_op(cm, params, spec, i, [&](const auto& c, const auto& p, const ReducedSpec& s) {
    return column_tables(c, p, s, *k, opts).pair_column[j];
  });
  return mijk - (1.0 - mi * mi) * delta_mjk + 2.0 * mi * base.pair(i, *k) * delta_mj;
}

// Central difference of m_i in the field h_j: approximates m_ij (m_ii = 1 - m_i^2).
inline double susceptibility_fd(const CouplingMatrix& cm, const ModelParams& params, std::size_t i, std::size_t j,
                                double step = 1e-5, const EnumerationOptions& opts = {}) {
  require(step > 0.0, "susceptibility_fd: step must be > 0");
  require(i < params.n && j < params.n, "susceptibility_fd: index out of range");
  ModelParams plus = params, minus = params;
  plus.field[j] += step;
  minus.field[j] -= step;
  const double mp = column_tables(cm, plus, {}, std::nullopt, opts).m[i];
  const double mm = column_tables(cm, minus, {}, std::nullopt, opts).m[i];
  return (mp - mm) / (2.0 * step);
}

// |D(step) - D(2 step)| for the central difference above; small when the
// step sits in the truncation/cancellation sweet spot.
inline double susceptibility_richardson_gap(const CouplingMatrix& cm, const ModelParams& params, std::size_t i,
                                            std::size_t j, double step = 1e-5,
                                            const EnumerationOptions& opts = {}) {
  return std::abs(susceptibility_fd(cm, params, i, j, step, opts) -
                  susceptibility_fd(cm, params, i, j, 2.0 * step, opts));
}

// Finite difference of m_k in the coupling g_il minus m_i m_kl + m_l m_ik + m_ilk.
inline double coupling_derivative_residual(const CouplingMatrix& cm, const ModelParams& params, std::size_t i,
                                           std::size_t l, std::size_t k, double step = 1e-5,
                                           const EnumerationOptions& opts = {}) {
  require(step > 0.0, "coupling_derivative_residual: step must be > 0");
  require(i != l, "coupling_derivative_residual: i and l must differ");
  require(i < params.n && l < params.n && k < params.n, "coupling_derivative_residual: index out of range");
  CouplingMatrix plus = cm, minus = cm;
  plus.set(i, l, cm(i, l) + step);
  minus.set(i, l, cm(i, l) - step);
  const double fd = (column_tables(plus, params, {}, std::nullopt, opts).m[k] -
                     column_tables(minus, params, {}, std::nullopt, opts).m[k]) /
                    (2.0 * step);

  const GibbsTables tables = gibbs_tables(cm, params, {}, opts);
  const double milk = centered_third_moment(cm, params, {}, i, l, k, opts);
  return fd - (tables.m[i] * tables.pair(k, l) + tables.m[l] * tables.pair(i, k) + milk);
}

// All cavity magnetizations from a single pass over the full system.
inline CavityTables cavity_magnetizations(const CouplingMatrix& cm, const ModelParams& params,
                                          const EnumerationOptions& opts = {}) {
  const ActiveSystem sys = reduce(cm, params, {});
  const std::size_t n = params.n;
  require(n >= 2, "cavity_magnetizations: need at least two sites");
  const auto sum = enumerate_states(sys, CavityMoments(sys), opts);
  CavityTables out;
  out.n = n;
  out.m.assign(n * n, detail::kNaN);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) out.m[i * n + j] = sum.acc.magnetization(i, j);
  return out;
}

}  // namespace sktap
