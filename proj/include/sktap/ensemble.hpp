#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sktap/dynamics.hpp"
#include "sktap/errors.hpp"
#include "sktap/gibbs.hpp"
#include "sktap/model.hpp"
#include "sktap/parallel.hpp"
#include "sktap/quadrature.hpp"
#include "sktap/seeding.hpp"
#include "sktap/spectral.hpp"
#include "sktap/tap.hpp"

namespace sktap {

enum class ExperimentKind { htap1, htap2, tap1, tap2, qn_conc, mij_sq, mij_moment, ito, spectral };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::htap1: return "htap1";
    case ExperimentKind::htap2: return "htap2";
    case ExperimentKind::tap1: return "tap1";
    case ExperimentKind::tap2: return "tap2";
    case ExperimentKind::qn_conc: return "qn_conc";
    case ExperimentKind::mij_sq: return "mij_sq";
    case ExperimentKind::mij_moment: return "mij_moment";
    case ExperimentKind::ito: return "ito";
    case ExperimentKind::spectral: return "spectral";
  }
  return "?";
}

inline std::optional<ExperimentKind> parse_experiment(const std::string& s) {
  for (auto k : {ExperimentKind::htap1, ExperimentKind::htap2, ExperimentKind::tap1, ExperimentKind::tap2,
                 ExperimentKind::qn_conc, ExperimentKind::mij_sq, ExperimentKind::mij_moment, ExperimentKind::ito,
                 ExperimentKind::spectral})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct Experiment {
  ExperimentKind kind = ExperimentKind::htap1;
  double p = 2.1;  // MIJ_MOMENT exponent
};

struct EnsembleConfig {
  std::vector<std::size_t> n_values{8, 12, 16, 20};
  std::size_t samples = 500;
  double t = 0.5;
  double h = 0.3;
  std::uint64_t master_seed = 0;
  Experiment experiment;
  std::size_t steps = 256;  // ITO grid
  std::size_t quad_nodes = 61;
  std::size_t threads = 1;
  std::size_t enum_cap = 24;

  void validate() const {
    require(!n_values.empty(), "EnsembleConfig: n_values must be nonempty");
    for (std::size_t a = 0; a < n_values.size(); ++a) {
      require(n_values[a] >= 2, "EnsembleConfig: every n must be >= 2");
      require(n_values[a] <= enum_cap, "EnsembleConfig: n " + std::to_string(n_values[a]) + " exceeds enum_cap");
      if (a > 0) require(n_values[a] > n_values[a - 1], "EnsembleConfig: n_values must be increasing");
    }
    require(samples >= 2, "EnsembleConfig: samples must be >= 2");
    require(std::isfinite(t) && t >= 0.0, "EnsembleConfig: t must be finite and >= 0");
    require(std::isfinite(h), "EnsembleConfig: h must be finite");
    require(enum_cap >= 1 && enum_cap <= 40, "EnsembleConfig: enum_cap must lie in [1, 40]");
    require(quad_nodes >= 1, "EnsembleConfig: quad_nodes must be >= 1");
    if (experiment.kind == ExperimentKind::mij_moment)
      require(std::isfinite(experiment.p) && experiment.p > 0.0, "EnsembleConfig: p must be > 0");
    if (experiment.kind == ExperimentKind::ito) require(steps >= 2, "EnsembleConfig: steps must be >= 2");
  }
};

struct SizeStats {
  std::size_t n = 0;
  std::size_t samples = 0;
  double mean = 0.0;
  double variance = 0.0;
  double standard_error = 0.0;
  std::vector<double> values;
};

struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  std::vector<double> residuals;
};

struct EnsembleStats {
  EnsembleConfig config;
  std::vector<SizeStats> per_n;
  std::optional<PowerLawFit> fit;
  std::string fit_note;  // nonempty when the fit is degenerate
  std::optional<double> q;  // fixed point used by QN_CONC
};

// Least squares of log y on log n.
inline PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points) {
  require(points.size() >= 3, "fit_power_law: need at least 3 points");
  const auto m = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& [n, y] : points) {
    require(n > 0.0 && y > 0.0 && std::isfinite(y), "fit_power_law: n and y must be positive");
    sx += std::log(n);
    sy += std::log(y);
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [n, y] : points) {
    const double dx = std::log(n) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y) - my);
  }
  require(sxx > 0.0, "fit_power_law: n values must not all coincide");
  PowerLawFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (const auto& [n, y] : points) {
    const double r = std::log(y) - (fit.intercept + fit.slope * std::log(n));
    fit.residuals.push_back(r);
    rss += r * r;
  }
  fit.slope_stderr = std::sqrt(rss / (m - 2.0) / sxx);
  return fit;
}

// The experiment's scalar for one disorder sample.
inline double sample_scalar(const EnsembleConfig& cfg, std::size_t n, std::uint64_t seed, std::optional<double> q) {
  const ModelParams params = ModelParams::uniform(n, cfg.t, cfg.h, cfg.enum_cap);
  switch (cfg.experiment.kind) {
    case ExperimentKind::htap1: return htap1_residuals(sample_couplings(params, seed), params).mean_square;
    case ExperimentKind::tap1: return tap1_residuals(sample_couplings(params, seed), params).mean_square;
    case ExperimentKind::htap2: {
      const double r = htap2_residual(sample_couplings(params, seed), params, 0, 1);
      return r * r;
    }
    case ExperimentKind::tap2: {
      const double r = tap2_residual(sample_couplings(params, seed), params, 0, 1);
      return r * r;
    }
    case ExperimentKind::qn_conc: {
      const double d = column_tables(sample_couplings(params, seed), params).q_n - *q;
      return d * d;
    }
    case ExperimentKind::mij_sq: {
      const double m01 = column_tables(sample_couplings(params, seed), params, {}, 1).pair_column[0];
      return m01 * m01 * static_cast<double>(n);
    }
    case ExperimentKind::mij_moment: {
      const double m01 = column_tables(sample_couplings(params, seed), params, {}, 1).pair_column[0];
      return std::pow(std::abs(m01), cfg.experiment.p);
    }
    case ExperimentKind::ito: {
      if (cfg.t == 0.0) return 0.0;
      ItoCheckConfig ito;
      ito.clamped_site = 0;
      ito.target_site = 1;
      ito.steps = cfg.steps;
      return ito_decomposition_residual(sample_path(params, cfg.steps, seed), ito, params);
    }
    case ExperimentKind::spectral: return resolvent_error(sample_couplings(params, seed), params);
  }
  return 0.0;
}

inline EnsembleStats run_ensemble(const EnsembleConfig& cfg) {
  cfg.validate();
  EnsembleStats stats;
  stats.config = cfg;
  if (cfg.experiment.kind == ExperimentKind::qn_conc) stats.q = solve_q(cfg.t, cfg.h, gauss_hermite(cfg.quad_nodes));

  for (std::size_t n : cfg.n_values) {
    SizeStats s;
    s.n = n;
    s.samples = cfg.samples;
    s.values.assign(cfg.samples, 0.0);
    parallel_for(cfg.samples, cfg.threads, [&](std::size_t k) {
      const std::uint64_t seed = derive_seed(cfg.master_seed, n, k);
      try {
        s.values[k] = sample_scalar(cfg, n, seed, stats.q);
      } catch (const NumericalError& e) {
        throw SampleFailure(e.what(), n, seed);
      }
    });
    double sum = 0.0;
    for (double v : s.values) sum += v;
    s.mean = sum / static_cast<double>(cfg.samples);
    double ss = 0.0;
    for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
    s.variance = ss / static_cast<double>(cfg.samples - 1);
    s.standard_error = std::sqrt(s.variance / static_cast<double>(cfg.samples));
    stats.per_n.push_back(std::move(s));
  }

  std::vector<std::pair<double, double>> points;
  for (const auto& s : stats.per_n) points.emplace_back(static_cast<double>(s.n), s.mean);
  if (points.size() < 3) {
    stats.fit_note = "degenerate: fewer than 3 system sizes";
  } else {
    bool positive = true;
    for (const auto& pt : points) positive = positive && pt.second > 0.0 && std::isfinite(pt.second);
    if (!positive)
      stats.fit_note = "degenerate: nonpositive mean";
    else
      stats.fit = fit_power_law(points);
  }
  return stats;
}

}  // namespace sktap
