#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cli.hpp"

using sktap::cli::run_cli;
using nlohmann::json;

namespace {

struct Invocation {
  int code = 0;
  std::string out, err;
};

Invocation run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Invocation r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

std::filesystem::path temp(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST(Cli, FixedPointWithoutCouplings) {
  const Invocation r = run({"fixed-point", "--t", "0", "--h", "0.3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_NEAR(j["q"].get<double>(), 0.084863038173370791, 1e-15);
  EXPECT_EQ(j["at_value"].get<double>(), 0.0);
  EXPECT_EQ(j["config"]["command"], "fixed-point");
  EXPECT_EQ(j["config"]["h"].get<double>(), 0.3);
}

TEST(Cli, FixedPointReference) {
  const Invocation r = run({"fixed-point", "--t", "0.5", "--h", "0.3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_NEAR(j["q"].get<double>(), 0.124483068872453266, 1e-11);
  EXPECT_LE(std::abs(j["residual"].get<double>()), 1e-12);
}

TEST(Cli, AtLineCrossesAtOneWithoutField) {
  const Invocation r = run({"at-line", "--h", "0", "--t-min", "0.5", "--t-max", "1.5", "--grid", "11"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["rows"].size(), 11u);
  EXPECT_NEAR(j["crossing"].get<double>(), 1.0, 1e-12);
}

TEST(Cli, HelpAndParseErrors) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({}).code, 1);
  const Invocation bad = run({"fixed-point", "--bogus", "1"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_FALSE(bad.err.empty());
  EXPECT_EQ(run({"fixed-point", "--format", "xml"}).code, 1);
  EXPECT_EQ(run({"fixed-point", "--t", "abc"}).code, 1);
  EXPECT_EQ(run({"no-such-command"}).code, 1);
}

TEST(Cli, ValidationErrorsExitOne) {
  EXPECT_EQ(run({"fixed-point", "--t", "-1"}).code, 1);
  EXPECT_EQ(run({"scaling", "--experiment", "nope", "--n", "4,6,8", "--samples", "4"}).code, 1);
  EXPECT_EQ(run({"scaling", "--n", "8,6", "--samples", "4"}).code, 1);
  EXPECT_EQ(run({"tap-residuals", "--n", "4,6"}).code, 1);
  EXPECT_EQ(run({"dynamics", "--n", "4", "--identity", "other"}).code, 1);
  EXPECT_EQ(run({"fixed-point", "--threads", "0"}).code, 1);
}

TEST(Cli, NumericalFailureExitsTwoWithSeed) {
  // A huge field saturates the magnetizations, so the deformed operator is undefined.
  const Invocation r = run({"spectral", "--n", "4", "--h", "20", "--samples", "2", "--seed", "42"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("42"), std::string::npos);
}

TEST(Cli, CsvMatchesJson) {
  const std::vector<std::string> base = {"scaling", "--n", "4,6,8", "--samples", "12", "--seed", "3"};
  auto json_args = base, csv_args = base;
  csv_args.insert(csv_args.end(), {"--format", "csv"});
  const Invocation a = run(json_args), b = run(csv_args);
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const json j = json::parse(a.out);
  const auto rows = csv_rows(b.out);
  ASSERT_GE(rows.size(), 4u);
  EXPECT_EQ(rows[0][0], "n");
  for (std::size_t k = 0; k < 3; ++k) {
    const json& x = j["per_n"][k];
    EXPECT_EQ(std::stoul(rows[k + 1][0]), x["n"].get<std::size_t>());
    EXPECT_NEAR(std::stod(rows[k + 1][2]), x["mean"].get<double>(), 1e-12 * x["mean"].get<double>());
    EXPECT_NEAR(std::stod(rows[k + 1][3]), x["variance"].get<double>(), 1e-12 * x["variance"].get<double>());
  }
  EXPECT_NEAR(std::stod(rows[5][0]), j["fit"]["slope"].get<double>(), 1e-12);

  const std::string first = b.out.substr(0, b.out.find('\n'));
  ASSERT_EQ(first.rfind("# config ", 0), 0u);
  EXPECT_EQ(json::parse(first.substr(9)), j["config"]);
}

TEST(Cli, RerunsAreByteIdenticalAcrossThreadCounts) {
  const std::vector<std::string> base = {"scaling", "--n", "4,6,8", "--samples", "10", "--experiment", "tap2"};
  auto threaded = base;
  threaded.insert(threaded.end(), {"--threads", "3"});
  const Invocation a = run(base), b = run(base), c = run(threaded);
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out, c.out);
}

TEST(Cli, OutAndPlotFiles) {
  const auto out = temp("sktap_cli_out.csv"), plot = temp("sktap_cli_plot.txt");
  const Invocation r = run({"overlap", "--n", "4,6,8", "--samples", "6", "--format", "csv", "--out", out.string(),
                     "--plot-out", plot.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  const std::string text = slurp(out), plot_text = slurp(plot);
  EXPECT_EQ(text.rfind("# config ", 0), 0u);
  EXPECT_EQ(plot_text.rfind("# config ", 0), 0u);
  EXPECT_NE(plot_text.find("# log_n log_mean"), std::string::npos);
  EXPECT_EQ(run({"fixed-point", "--plot-out", plot.string()}).code, 1);
  std::filesystem::remove(out);
  std::filesystem::remove(plot);
}

TEST(Cli, EverySubcommandRuns) {
  const std::vector<std::vector<std::string>> cases = {
      {"verify-identities", "--n", "6"},
      {"tap-residuals", "--n", "5"},
      {"mij-variance", "--n", "4,6,8", "--samples", "6"},
      {"dynamics", "--n", "4", "--steps", "8"},
      {"dynamics", "--n", "4", "--steps", "8", "--identity", "pair"},
      {"dynamics", "--n", "4", "--steps", "8", "--identity", "product"},
      {"spectral", "--n", "4,6", "--samples", "4"},
  };
  for (const auto& args : cases) {
    for (const char* fmt : {"json", "csv"}) {
      auto a = args;
      a.insert(a.end(), {"--format", fmt});
      const Invocation r = run(a);
      EXPECT_EQ(r.code, 0) << args[0] << ": " << r.err;
      EXPECT_FALSE(r.out.empty());
    }
  }
}

TEST(Cli, VerifyIdentitiesResidualsAreSmall) {
  const json j = json::parse(run({"verify-identities", "--n", "7", "--seed", "9"}).out);
  EXPECT_LE(std::abs(j["residuals"]["key_identity"].get<double>()), 1e-12);
  EXPECT_LE(std::abs(j["residuals"]["key_identity_triple"].get<double>()), 1e-12);
  EXPECT_LE(std::abs(j["residuals"]["susceptibility_fd"].get<double>()), 1e-8);
  EXPECT_LE(std::abs(j["residuals"]["coupling_derivative"].get<double>()), 1e-7);
}

TEST(Cli, ConfigEchoOmitsThreadsAndPaths) {
  const json j = json::parse(run({"fixed-point", "--threads", "2"}).out);
  EXPECT_FALSE(j["config"].contains("threads"));
  EXPECT_FALSE(j["config"].contains("out"));
  EXPECT_EQ(j["config"]["quad_nodes"], 61);
}
