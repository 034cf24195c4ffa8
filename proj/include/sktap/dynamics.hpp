#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "sktap/errors.hpp"
#include "sktap/gibbs.hpp"
#include "sktap/model.hpp"

namespace sktap {

// Which observable is followed along the path of row i.
//   delta_magnetization  delta_i m_j^[A+i]
//   pair_correlation     m_jk^[A+i] with s_i = clamped_spin
//   pair_product         m_k^[A+i] m_jk^[A+i] with s_i = clamped_spin
enum class ItoIdentity { delta_magnetization, pair_correlation, pair_product };

struct ItoCheckConfig {
  std::size_t clamped_site = 0;
  int clamped_spin = 1;
  std::size_t target_site = 1;
  std::size_t partner_site = 2;  // k; used by the two-point variants only
  std::size_t steps = 2;
  ReducedSpec reduced;
  ItoIdentity identity = ItoIdentity::delta_magnetization;

  void validate(std::size_t n) const {
    reduced.validate(n);
    const std::size_t i = clamped_site, j = target_site;
    require(i < n && j < n, "ItoCheckConfig: site out of range");
    require(i != j, "ItoCheckConfig: clamped and target sites must differ");
    require(reduced.is_active(i) && reduced.is_active(j), "ItoCheckConfig: sites must not lie in A or B");
    require(clamped_spin == 1 || clamped_spin == -1, "ItoCheckConfig: clamped_spin must be +1 or -1");
    require(steps >= 2, "ItoCheckConfig: steps must be >= 2");
    if (identity != ItoIdentity::delta_magnetization)
      require(partner_site < n && partner_site != i && reduced.is_active(partner_site),
              "ItoCheckConfig: partner site must be active and differ from the clamped site");
  }
};

// Cumulative quantities at grid point s: lhs = X(s) - X(0) and the partial
// martingale and drift sums over [0, s).
struct ItoStep {
  double s = 0.0;
  double lhs = 0.0;
  double martingale = 0.0;
  double drift = 0.0;
};

namespace detail {

struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

// Observable value and the per-site integrands multiplying dg_il and ds/N.
struct ItoIntegrands {
  double value = 0.0;
  std::vector<double> noise;
  std::vector<double> drift;
};

inline ItoIntegrands ito_integrands(const CouplingMatrix& g, const ModelParams& params, const ItoCheckConfig& cfg,
                                    const std::vector<std::size_t>& sites) {
  const std::size_t i = cfg.clamped_site, j = cfg.target_site, k = cfg.partner_site;
  ItoIntegrands out;
  out.noise.resize(sites.size());
  out.drift.resize(sites.size());

  if (cfg.identity == ItoIdentity::delta_magnetization) {
    const GibbsTables up = gibbs_tables(g, params, cfg.reduced.clamp(i, +1));
    const GibbsTables down = gibbs_tables(g, params, cfg.reduced.clamp(i, -1));
    out.value = 0.5 * (up.m[j] - down.m[j]);
    for (std::size_t a = 0; a < sites.size(); ++a) {
      const std::size_t l = sites[a];
      out.noise[a] = 0.5 * (up.pair(l, j) + down.pair(l, j));
      out.drift[a] = -0.5 * (up.m[l] * up.pair(l, j) - down.m[l] * down.pair(l, j));
    }
    return out;
  }

  const double si = cfg.clamped_spin;
  const TripleColumn tc = triple_column(g, params, cfg.reduced.clamp(i, cfg.clamped_spin), j, k);
  const GibbsTables& t = tc.tables;
  const double mjk = t.pair(j, k), mk = t.m[k];
  const bool product = cfg.identity == ItoIdentity::pair_product;
  out.value = product ? mk * mjk : mjk;
  for (std::size_t a = 0; a < sites.size(); ++a) {
    const std::size_t l = sites[a];
    const double ml = t.m[l], mjkl = tc.third[l], mjl = t.pair(j, l), mkl = t.pair(k, l);
    if (!product) {
      out.noise[a] = si * mjkl;
      out.drift[a] = -(ml * mjkl + mjl * mkl);
    } else {
      out.noise[a] = si * (mjk * mkl + mk * mjkl);
      out.drift[a] = -(ml * mjk * mkl + mk * (ml * mjkl + mjl * mkl)) + mkl * mjkl;
    }
  }
  return out;
}

inline CouplingPath path_for_steps(const CouplingPath& path, std::size_t steps) {
  require(path.steps() % steps == 0, "ito: cfg.steps must divide the path's step count");
  return path.steps() == steps ? path : path.coarsen(path.steps() / steps);
}

}  // namespace detail

// Euler-Ito decomposition of the chosen observable while row i follows the
// path and every other coupling sits at its terminal value. Integrands are
// evaluated at left endpoints.
inline std::vector<ItoStep> ito_decomposition_trace(const CouplingPath& path, const ItoCheckConfig& cfg,
                                                    const ModelParams& params) {
  params.validate();
  require(path.size() == params.n, "ito: path size does not match params.n");
  if (path.steps() == 0) return {ItoStep{}};
  cfg.validate(params.n);
  const CouplingPath grid = detail::path_for_steps(path, cfg.steps);
  const std::size_t i = cfg.clamped_site;

  std::vector<std::size_t> sites;
  for (std::size_t l = 0; l < params.n; ++l)
    if (l != i && cfg.reduced.is_active(l)) sites.push_back(l);

  const double inv_n = 1.0 / static_cast<double>(params.n);
  std::vector<ItoStep> trace;
  trace.reserve(grid.steps() + 1);
  detail::KahanSum mart, drift;
  double start = 0.0;
  for (std::size_t step = 0; step <= grid.steps(); ++step) {
    const auto in = detail::ito_integrands(grid.with_row_at(step, i), params, cfg, sites);
    if (step == 0) start = in.value;
    trace.push_back({grid.grid()[step], in.value - start, mart.sum, drift.sum});
    if (step == grid.steps()) break;
    const double ds = grid.grid()[step + 1] - grid.grid()[step];
    for (std::size_t a = 0; a < sites.size(); ++a) {
      mart.add(in.noise[a] * grid.increment(step, i, sites[a]));
      drift.add(in.drift[a] * ds * inv_n);
    }
  }
  return trace;
}

// |LHS - (martingale + drift)| at the terminal time.
inline double ito_decomposition_residual(const CouplingPath& path, const ItoCheckConfig& cfg,
                                         const ModelParams& params) {
  const auto trace = ito_decomposition_trace(path, cfg, params);
  const ItoStep& last = trace.back();
  return std::abs(last.lhs - (last.martingale + last.drift));
}

// m_j^[i](s) - m_j^(i) along the grid, with s_i = clamped_spin and row i at
// time s; the cavity value uses the terminal couplings.
inline std::vector<double> cavity_difference_path(const CouplingPath& path, const ModelParams& params, std::size_t i,
                                                  std::size_t j, int clamped_spin = 1) {
  params.validate();
  require(path.size() == params.n, "cavity_difference_path: path size does not match params.n");
  require(i < params.n && j < params.n && i != j, "cavity_difference_path: need distinct sites in range");
  require(clamped_spin == 1 || clamped_spin == -1, "cavity_difference_path: spin must be +1 or -1");
  const double cavity = column_tables(path.terminal(), params, ReducedSpec{}.remove(i)).m[j];
  const ReducedSpec spec = ReducedSpec{}.clamp(i, clamped_spin);
  std::vector<double> out(path.steps() + 1);
  for (std::size_t k = 0; k <= path.steps(); ++k)
    out[k] = column_tables(path.with_row_at(k, i), params, spec).m[j] - cavity;
  return out;
}

}  // namespace sktap
