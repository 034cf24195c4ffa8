#pragma once

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sktap/ensemble.hpp"
#include "sktap/errors.hpp"
#include "sktap/gibbs.hpp"
#include "sktap/model.hpp"
#include "sktap/tap.hpp"

namespace sktap {

using nlohmann::json;

// 17 significant digits; NaN and infinities spelled as in JSON-adjacent tools.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// NaN entries (removed sites) become null.
inline json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json to_json(const CouplingMatrix& g) {
  json out;
  out["n"] = g.size();
  json rows = json::array();
  for (std::size_t i = 0; i < g.size(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < g.size(); ++j) row.push_back(g(i, j));
    rows.push_back(std::move(row));
  }
  out["g"] = std::move(rows);
  if (g.origin()) out["origin"] = {{"t", g.origin()->t}, {"seed", g.origin()->seed}};
  return out;
}

inline CouplingMatrix coupling_from_json(const json& j) {
  const auto n = j.at("n").get<std::size_t>();
  const json& rows = j.at("g");
  require(rows.size() == n, "coupling_from_json: row count mismatch");
  CouplingMatrix g(n);
  for (std::size_t a = 0; a < n; ++a) {
    require(rows[a].size() == n, "coupling_from_json: column count mismatch");
    require(rows[a][a].get<double>() == 0.0, "coupling_from_json: nonzero diagonal");
    for (std::size_t b = a + 1; b < n; ++b) {
      const double v = rows[a][b].get<double>();
      require(v == rows[b][a].get<double>(), "coupling_from_json: matrix not symmetric");
      g.set(a, b, v);
    }
  }
  if (j.contains("origin")) g.set_origin({j["origin"].at("t").get<double>(), j["origin"].at("seed").get<std::uint64_t>()});
  return g;
}

inline json to_json(const GibbsTables& t) {
  json m = json::array(), pairs = json::array();
  for (double v : t.m) m.push_back(number_or_null(v));
  for (std::size_t i = 0; i < t.n; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < t.n; ++j) row.push_back(number_or_null(t.pair(i, j)));
    pairs.push_back(std::move(row));
  }
  return {{"n", t.n}, {"log_z", t.log_z}, {"m", m}, {"m_pair", pairs}, {"q_n", t.q_n}, {"q_n_active", t.q_n_active}};
}

// One (i, j, m_ij) line per present pair, header included.
inline std::string pair_csv(const GibbsTables& t) {
  std::ostringstream os;
  os << "i,j,m_ij\n";
  for (std::size_t i = 0; i < t.n; ++i)
    for (std::size_t j = 0; j < t.n; ++j)
      if (t.present[i] && t.present[j]) os << i << ',' << j << ',' << format_double(t.pair(i, j)) << '\n';
  return os.str();
}

inline json to_json(const ResidualReport& r) {
  json entries = json::array();
  for (const auto& e : r.entries) {
    json x = {{"i", e.i}, {"residual", e.value}, {"squared", e.value * e.value}};
    x["j"] = e.j ? json(*e.j) : json(nullptr);
    entries.push_back(std::move(x));
  }
  return {{"kind", to_string(r.kind)}, {"mean_square", r.mean_square}, {"entries", entries}};
}

inline std::string to_csv(const ResidualReport& r) {
  std::ostringstream os;
  os << "kind,i,j,residual,squared\n";
  for (const auto& e : r.entries) {
    os << to_string(r.kind) << ',' << e.i << ',';
    if (e.j) os << *e.j;
    os << ',' << format_double(e.value) << ',' << format_double(e.value * e.value) << '\n';
  }
  return os.str();
}

inline json to_json(const EnsembleConfig& c) {
  return {{"n_values", c.n_values},
          {"samples", c.samples},
          {"t", c.t},
          {"h", c.h},
          {"master_seed", c.master_seed},
          {"experiment", to_string(c.experiment.kind)},
          {"p", c.experiment.p},
          {"steps", c.steps},
          {"quad_nodes", c.quad_nodes},
          {"enum_cap", c.enum_cap}};
}

inline json to_json(const EnsembleStats& s, bool include_values = false) {
  json per_n = json::array();
  for (const auto& x : s.per_n) {
    json row = {{"n", x.n},
                {"samples", x.samples},
                {"mean", x.mean},
                {"variance", x.variance},
                {"standard_error", x.standard_error}};
    if (include_values) row["values"] = x.values;
    per_n.push_back(std::move(row));
  }
  json out = {{"per_n", per_n}};
  if (s.fit)
    out["fit"] = {{"slope", s.fit->slope},
                  {"intercept", s.fit->intercept},
                  {"slope_stderr", s.fit->slope_stderr},
                  {"residuals", s.fit->residuals}};
  else
    out["fit"] = {{"degenerate", true}, {"note", s.fit_note}};
  if (s.q) out["q"] = *s.q;
  return out;
}

inline std::string to_csv(const EnsembleStats& s) {
  std::ostringstream os;
  os << "n,samples,mean,variance,standard_error\n";
  for (const auto& x : s.per_n)
    os << x.n << ',' << x.samples << ',' << format_double(x.mean) << ',' << format_double(x.variance) << ','
       << format_double(x.standard_error) << '\n';
  return os.str();
}

// Two columns, log n and log mean, for plotting; nonpositive means are skipped.
inline std::string plot_data(const EnsembleStats& s) {
  std::ostringstream os;
  os << "# log_n log_mean\n";
  for (const auto& x : s.per_n)
    if (x.mean > 0.0) os << format_double(std::log(static_cast<double>(x.n))) << ' ' << format_double(std::log(x.mean)) << '\n';
  return os.str();
}

}  // namespace sktap
