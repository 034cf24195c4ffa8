#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sktap/sktap.hpp"

namespace sktap::cli {

struct Options {
  std::vector<std::size_t> n{10};
  double t = 0.5;
  double h = 0.3;
  std::uint64_t seed = 0;
  std::size_t samples = 500;
  std::size_t steps = 256;
  std::string format = "json";
  std::string out;
  std::size_t quad_nodes = 61;
  std::size_t threads = 1;
  std::string experiment = "htap1";
  double p = 2.1;
  double t_min = 0.0;
  double t_max = 1.5;
  std::size_t grid = 11;
  std::string plot_out;
  std::string identity = "delta";
};

// Everything that determines the numbers; threads and output paths excluded.
inline json config_echo(const std::string& command, const Options& o) {
  return {{"command", command}, {"n", o.n},         {"t", o.t},
          {"h", o.h},           {"seed", o.seed},   {"samples", o.samples},
          {"steps", o.steps},   {"quad_nodes", o.quad_nodes}, {"experiment", o.experiment},
          {"p", o.p},           {"t_min", o.t_min}, {"t_max", o.t_max},
          {"grid", o.grid},     {"identity", o.identity}};
}

// A result is one JSON document plus an equivalent CSV table.
struct Output {
  json doc;
  std::string csv;
  std::string plot;  // ensemble commands only
};

inline std::string csv_header(const json& config) { return "# config " + config.dump() + "\n"; }

inline std::size_t single_n(const Options& o) {
  require(o.n.size() == 1, "this command takes a single --n");
  return o.n.front();
}

inline Output fixed_point(const Options& o) {
  const QuadratureRule rule = gauss_hermite(o.quad_nodes);
  const double q = solve_q(o.t, o.h, rule);
  const double residual = q - f_map(q, o.t, o.h, rule);
  const double at = at_value(o.t, o.h, q, rule);
  Output r;
  r.doc = {{"q", q}, {"residual", residual}, {"at_value", at}};
  r.csv = "t,h,q,residual,at_value\n" + format_double(o.t) + ',' + format_double(o.h) + ',' + format_double(q) + ',' +
          format_double(residual) + ',' + format_double(at) + '\n';
  return r;
}

inline Output at_line(const Options& o) {
  require(o.grid >= 2, "--grid must be >= 2");
  require(o.t_min >= 0.0 && o.t_max > o.t_min, "need 0 <= --t-min < --t-max");
  const QuadratureRule rule = gauss_hermite(o.quad_nodes);
  SolveOptions opts;
  opts.allow_nonunique = true;
  json rows = json::array();
  std::string csv = "t,q,at_value\n";
  std::vector<double> ts, ats;
  for (std::size_t k = 0; k < o.grid; ++k) {
    const double t = o.t_min + (o.t_max - o.t_min) * static_cast<double>(k) / static_cast<double>(o.grid - 1);
    const double q = solve_q(t, o.h, rule, opts);
    const double at = at_value(t, o.h, q, rule);
    rows.push_back({{"t", t}, {"q", q}, {"at_value", at}});
    csv += format_double(t) + ',' + format_double(q) + ',' + format_double(at) + '\n';
    ts.push_back(t);
    ats.push_back(at);
  }
  Output r;
  r.doc = {{"rows", rows}};
  // First crossing of at_value = 1 by linear interpolation on the grid.
  r.doc["crossing"] = nullptr;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    if (ats[k] == 1.0) {
      r.doc["crossing"] = ts[k];
      break;
    }
    if (k + 1 < ts.size() && (ats[k] - 1.0) * (ats[k + 1] - 1.0) < 0.0) {
      r.doc["crossing"] = ts[k] + (1.0 - ats[k]) * (ts[k + 1] - ts[k]) / (ats[k + 1] - ats[k]);
      break;
    }
  }
  r.csv = csv;
  return r;
}

inline Output verify_identities(const Options& o) {
  const std::size_t n = single_n(o);
  require(n >= 3, "verify-identities needs --n >= 3");
  const ModelParams params = ModelParams::uniform(n, o.t, o.h);
  const CouplingMatrix g = sample_couplings(params, o.seed);
  const GibbsTables tables = gibbs_tables(g, params);
  const std::vector<std::pair<std::string, double>> rows = {
      {"key_identity", key_identity_residual(g, params, {}, 0, 1)},
      {"key_identity_triple", key_identity_residual(g, params, {}, 0, 1, 2)},
      {"susceptibility_fd", tables.pair(0, 1) - susceptibility_fd(g, params, 0, 1)},
      {"coupling_derivative", coupling_derivative_residual(g, params, 0, 1, 2)},
  };
  Output r;
  std::string csv = "identity,residual\n";
  for (const auto& [name, v] : rows) {
    r.doc["residuals"][name] = v;
    csv += name + ',' + format_double(v) + '\n';
  }
  r.csv = csv;
  return r;
}

inline Output tap_residuals(const Options& o) {
  const std::size_t n = single_n(o);
  require(n >= 2, "tap-residuals needs --n >= 2");
  const ModelParams params = ModelParams::uniform(n, o.t, o.h);
  const CouplingMatrix g = sample_couplings(params, o.seed);
  const std::vector<ResidualReport> reports = {htap1_residuals(g, params), htap2_report(g, params, o.threads),
                                               tap1_residuals(g, params), tap2_report(g, params)};
  Output r;
  r.doc["reports"] = json::array();
  std::string csv = "kind,i,j,residual,squared\n";
  for (const auto& rep : reports) {
    r.doc["reports"].push_back(to_json(rep));
    const std::string body = to_csv(rep);
    csv += body.substr(body.find('\n') + 1);
  }
  r.csv = csv;
  return r;
}

inline EnsembleConfig ensemble_config(const Options& o, ExperimentKind kind) {
  EnsembleConfig c;
  c.n_values = o.n;
  c.samples = o.samples;
  c.t = o.t;
  c.h = o.h;
  c.master_seed = o.seed;
  c.experiment = {kind, o.p};
  c.steps = o.steps;
  c.quad_nodes = o.quad_nodes;
  c.threads = o.threads;
  return c;
}

inline Output ensemble_output(const EnsembleStats& stats) {
  Output r;
  r.doc = to_json(stats);
  r.csv = to_csv(stats);
  r.plot = plot_data(stats);
  if (stats.fit) {
    r.csv += "slope,intercept,slope_stderr\n" + format_double(stats.fit->slope) + ',' +
             format_double(stats.fit->intercept) + ',' + format_double(stats.fit->slope_stderr) + '\n';
  } else {
    r.csv += "# fit " + stats.fit_note + '\n';
  }
  return r;
}

inline Output scaling(const Options& o) {
  const auto kind = parse_experiment(o.experiment);
  require(kind.has_value(), "unknown --experiment '" + o.experiment + "'");
  return ensemble_output(run_ensemble(ensemble_config(o, *kind)));
}

inline Output mij_variance(const Options& o) {
  const EnsembleStats stats = run_ensemble(ensemble_config(o, ExperimentKind::mij_sq));
  Output r = ensemble_output(stats);
  const QuadratureRule rule = gauss_hermite(o.quad_nodes);
  json pred = json::array();
  std::string csv = "n,predicted_n_mij_sq\n";
  for (std::size_t n : o.n) {
    const double v = predicted_mij_sq(o.t, o.h, n, rule) * static_cast<double>(n);
    pred.push_back({{"n", n}, {"predicted", v}});
    csv += std::to_string(n) + ',' + format_double(v) + '\n';
  }
  r.doc["prediction"] = pred;
  r.csv += csv;
  return r;
}

inline Output dynamics(const Options& o) {
  const std::size_t n = single_n(o);
  require(n >= 3, "dynamics needs --n >= 3");
  const ModelParams params = ModelParams::uniform(n, o.t, o.h);
  ItoCheckConfig cfg;
  cfg.clamped_site = 0;
  cfg.target_site = 1;
  cfg.partner_site = 2;
  cfg.steps = o.steps;
  if (o.identity == "delta")
    cfg.identity = ItoIdentity::delta_magnetization;
  else if (o.identity == "pair")
    cfg.identity = ItoIdentity::pair_correlation;
  else if (o.identity == "product")
    cfg.identity = ItoIdentity::pair_product;
  else
    require(false, "--identity must be delta, pair or product");
  const CouplingPath path = sample_path(params, o.steps, o.seed);
  const auto trace = ito_decomposition_trace(path, cfg, params);
  const ItoStep& last = trace.back();
  Output r;
  json steps = json::array();
  std::string csv = "s,lhs,martingale,drift\n";
  for (const auto& st : trace) {
    steps.push_back({{"s", st.s}, {"lhs", st.lhs}, {"martingale", st.martingale}, {"drift", st.drift}});
    csv += format_double(st.s) + ',' + format_double(st.lhs) + ',' + format_double(st.martingale) + ',' +
           format_double(st.drift) + '\n';
  }
  const double residual = std::abs(last.lhs - (last.martingale + last.drift));
  r.doc = {{"residual", residual}, {"trace", steps}};
  r.csv = csv + "# residual " + format_double(residual) + '\n';
  return r;
}

inline Output spectral(const Options& o) {
  require(o.samples >= 1, "--samples must be >= 1");
  json rows = json::array();
  std::string csv = "n,seed,resolvent_error,min_eigenvalue_minus_e0\n";
  json medians = json::array();
  for (std::size_t n : o.n) {
    const ModelParams params = ModelParams::uniform(n, o.t, o.h);
    std::vector<ResolventDiagnostics> diag(o.samples);
    std::vector<std::uint64_t> seeds(o.samples);
    parallel_for(o.samples, o.threads, [&](std::size_t k) {
      seeds[k] = derive_seed(o.seed, n, k);
      const CouplingMatrix g = sample_couplings(params, seeds[k]);
      try {
        diag[k] = resolvent_diagnostics(g, params, gibbs_tables(g, params));
      } catch (const NumericalError& e) {
        throw SampleFailure(e.what(), n, seeds[k]);
      }
    });
    std::vector<double> errors;
    for (std::size_t k = 0; k < o.samples; ++k) {
      const double gap = diag[k].min_eigenvalue - diag[k].e0;
      rows.push_back({{"n", n}, {"seed", seeds[k]}, {"resolvent_error", diag[k].error}, {"min_eigenvalue_minus_e0", gap}});
      csv += std::to_string(n) + ',' + std::to_string(seeds[k]) + ',' + format_double(diag[k].error) + ',' +
             format_double(gap) + '\n';
      errors.push_back(diag[k].error);
    }
    std::sort(errors.begin(), errors.end());
    const std::size_t m = errors.size();
    const double median = m % 2 ? errors[m / 2] : 0.5 * (errors[m / 2 - 1] + errors[m / 2]);
    medians.push_back({{"n", n}, {"median_resolvent_error", median}});
  }
  Output r;
  r.doc = {{"samples", rows}, {"medians", medians}};
  r.csv = csv;
  return r;
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot open output file " + path);
  f << text;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exact-enumeration lab for the SK spin glass: TAP residuals, scaling and dynamics"};
  app.set_help_flag("--help", "print this help and exit");  // -h is taken by the field flag
  app.require_subcommand(1);
  Options o;

  const std::vector<std::string> commands = {"fixed-point", "at-line", "verify-identities", "tap-residuals", "scaling",
                                             "overlap",     "mij-variance", "dynamics",      "spectral"};
  for (const auto& name : commands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--n", o.n, "system size, or comma-separated sizes")->delimiter(',');
    sub->add_option("--t", o.t, "coupling variance scale t = beta^2");
    sub->add_option("--h", o.h, "uniform external field");
    sub->add_option("--seed", o.seed, "disorder seed (master seed for ensembles)");
    sub->add_option("--samples", o.samples, "disorder samples per size");
    sub->add_option("--steps", o.steps, "time steps of the coupling path");
    sub->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--out", o.out, "output file (default: stdout)");
    sub->add_option("--quad-nodes", o.quad_nodes, "Gauss-Hermite nodes");
    sub->add_option("--threads", o.threads, "worker threads");
    sub->add_option("--experiment", o.experiment, "ensemble experiment");
    sub->add_option("--p", o.p, "moment exponent for mij_moment");
    sub->add_option("--t-min", o.t_min, "at-line: smallest t");
    sub->add_option("--t-max", o.t_max, "at-line: largest t");
    sub->add_option("--grid", o.grid, "at-line: grid points");
    sub->add_option("--plot-out", o.plot_out, "scaling: two-column log n / log mean file");
    sub->add_option("--identity", o.identity, "dynamics: delta, pair or product");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    require(o.threads >= 1, "--threads must be >= 1");
    for (std::size_t n : o.n) require(n >= 1, "--n must be >= 1");
    Output r;
    if (command == "fixed-point") r = fixed_point(o);
    else if (command == "at-line") r = at_line(o);
    else if (command == "verify-identities") r = verify_identities(o);
    else if (command == "tap-residuals") r = tap_residuals(o);
    else if (command == "scaling") r = scaling(o);
    else if (command == "overlap") r = ensemble_output(run_ensemble(ensemble_config(o, ExperimentKind::qn_conc)));
    else if (command == "mij-variance") r = mij_variance(o);
    else if (command == "dynamics") r = dynamics(o);
    else r = spectral(o);

    const json config = config_echo(command, o);
    std::string text;
    if (o.format == "json") {
      json doc = r.doc;
      doc["config"] = config;
      text = doc.dump(2) + "\n";
    } else {
      text = csv_header(config) + r.csv;
    }
    if (o.out.empty())
      out << text;
    else
      write_file(o.out, text);

    if (!o.plot_out.empty()) {
      require(!r.plot.empty(), "--plot-out applies to ensemble commands only");
      write_file(o.plot_out, "# config " + config.dump() + "\n" + r.plot);
    }
    return 0;
  } catch (const SampleFailure& e) {
    err << "numerical failure: " << e.what() << "\nfailing seed: " << e.seed() << " (master seed " << o.seed << ")\n";
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\nseed: " << o.seed << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace sktap::cli
