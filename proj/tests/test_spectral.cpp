#include <algorithm>
#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "sktap/seeding.hpp"
#include "sktap/spectral.hpp"

using namespace sktap;

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

// Physical root of t S^2 - (1 - e) S + 1 = 0 and its derivative in e.
double quadratic_s(double t, double e) { return ((1.0 - e) - std::sqrt((1.0 - e) * (1.0 - e) - 4.0 * t)) / (2.0 * t); }
double quadratic_s_prime(double t, double e) {
  const double a = 1.0 - e;
  return (a / std::sqrt(a * a - 4.0 * t) - 1.0) / (2.0 * t);
}

}  // namespace

TEST(Deformed, ZeroFieldAndZeroCoupling) {
  const auto p0 = ModelParams::uniform(6, 0.4, 0.0);
  const CouplingMatrix g0 = sample_couplings(p0, 1);
  const DeformedOperator a = build_deformed(g0, p0, gibbs_tables(g0, p0));
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(a.lambda_diag[i], 1.0, 1e-14);
  EXPECT_LE(a.rank_one.norm(), 1e-14);
  EXPECT_NEAR(a.e0, -0.4, 1e-14);

  const auto pt = ModelParams::uniform(6, 0.0, 0.3);
  const CouplingMatrix gt = sample_couplings(pt, 1);
  const DeformedOperator b = build_deformed(gt, pt, gibbs_tables(gt, pt));
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(b.lambda_diag[i], std::cosh(0.3) * std::cosh(0.3), 1e-13);
}

TEST(Deformed, ConstructionInvariants) {
  const auto p = ModelParams::uniform(12, 0.5, 0.3);
  const CouplingMatrix g = sample_couplings(p, 3);
  const GibbsTables tab = gibbs_tables(g, p);
  const DeformedOperator op = build_deformed(g, p, tab);
  EXPECT_GE(op.lambda_diag.minCoeff(), 1.0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(op.rank_one);
  const double s0 = svd.singularValues()[0];
  EXPECT_GE(s0 * s0 / op.rank_one.squaredNorm(), 1.0 - 1e-10);
  EXPECT_EQ(op.e0, -0.5 * (1.0 - tab.q_n));
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) EXPECT_EQ(op.g(i, j), g(i, j));

  GibbsTables bad = tab;
  bad.m[2] = 1.0;
  EXPECT_THROW(build_deformed(g, p, bad), NumericalError);
}

TEST(Resolvent, ExactAtZeroCoupling) {
  for (double h : {0.0, 0.3, 1.1}) {
    const auto p = ModelParams::uniform(9, 0.0, h);
    EXPECT_LE(resolvent_error(sample_couplings(p, 2), p), 1e-12);
  }
}

TEST(Resolvent, SingularOperatorFailsLoudly) {
  CouplingMatrix g(2);
  g.set(0, 1, 1.0);
  const auto p = ModelParams::uniform(2, 0.0, 0.0);
  GibbsTables tab;
  tab.n = 2;
  tab.m = {0.0, 0.0};
  tab.present = {true, true};
  tab.pair_matrix = {1.0, 0.0, 0.0, 1.0};
  EXPECT_THROW(resolvent_diagnostics(g, p, tab), NumericalError);
}

TEST(Resolvent, MedianErrorShrinksWithSize) {
  std::vector<double> med;
  for (std::size_t n : {8u, 16u}) {
    const auto p = ModelParams::uniform(n, 0.4, 0.3);
    std::vector<double> errs;
    for (std::size_t k = 0; k < 200; ++k) errs.push_back(resolvent_error(sample_couplings(p, derive_seed(21, n, k)), p));
    med.push_back(median(errs));
  }
  EXPECT_LT(med[1], med[0]);
  EXPECT_LT(med[1], 0.5);
}

TEST(Resolvent, SpectralEdgeAboveE0AtSmallT) {
  const auto p = ModelParams::uniform(16, 0.25, 0.0);
  int below = 0;
  for (std::size_t k = 0; k < 200; ++k) {
    const CouplingMatrix g = sample_couplings(p, derive_seed(22, k));
    const ResolventDiagnostics d = resolvent_diagnostics(g, p, gibbs_tables(g, p));
    below += d.e0 < d.min_eigenvalue;
  }
  EXPECT_GE(below, 190);
}

TEST(SelfConsistentS, ScalarQuadratic) {
  const std::vector<double> ones(5, 1.0);
  EXPECT_NEAR(self_consistent_s(ones, 0.25, -1.0), 0.535898384862245412, 1e-12);
  EXPECT_NEAR(self_consistent_s(ones, 0.25, -1.0), quadratic_s(0.25, -1.0), 1e-12);
  EXPECT_THROW(self_consistent_s(ones, 0.25, 1.5), NumericalError);
  EXPECT_THROW(self_consistent_s(ones, 0.25, 0.2), NumericalError);  // no real root
}

TEST(SelfConsistentS, ZeroCouplingIsAverageResolvent) {
  const std::vector<double> lam{1.0, 1.3, 2.0, 1.7};
  double s = 0.0;
  for (double l : lam) s += 1.0 / (l + 0.4);
  EXPECT_EQ(self_consistent_s(lam, 0.0, -0.4), s / 4.0);
}

TEST(SelfConsistentS, GibbsLambdaFixedPointAndMonotone) {
  const auto p = ModelParams::uniform(16, 0.4, 0.3);
  const CouplingMatrix g = sample_couplings(p, 5);
  const DeformedOperator op = build_deformed(g, p, gibbs_tables(g, p));
  const std::vector<double> lam(op.lambda_diag.data(), op.lambda_diag.data() + 16);
  const double s = self_consistent_s(lam, 0.4, op.e0);
  double phi = 0.0;
  for (double l : lam) phi += 1.0 / (l - op.e0 - 0.4 * s);
  EXPECT_LE(std::abs(s - phi / 16.0), 1e-12);
  double prev = 0.0;
  for (int k = 0; k <= 20; ++k) {
    const double e = -2.0 + 0.08 * k;
    const double v = self_consistent_s(lam, 0.4, e);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(SPrime, ZeroCouplingAndScalarClosedForm) {
  const auto p = ModelParams::uniform(7, 0.0, 0.4);
  const CouplingMatrix g = sample_couplings(p, 1);
  const auto [fd0, cf0] = s_prime_at_e0(g, p);
  const double lam = std::cosh(0.4) * std::cosh(0.4);
  EXPECT_NEAR(cf0, 1.0 / (lam * lam), 1e-12);
  EXPECT_NEAR(fd0, cf0, 1e-6);

  const std::vector<double> ones(3, 1.0);
  const auto [fd, cf] = s_prime_from_lambda(ones, 0.25, -1.0);
  EXPECT_NEAR(cf, quadratic_s_prime(0.25, -1.0), 1e-12);
  EXPECT_NEAR(fd, quadratic_s_prime(0.25, -1.0), 1e-6);
}

TEST(SPrime, FiniteDifferenceAgreesWithClosedForm) {
  const auto p = ModelParams::uniform(16, 0.4, 0.3);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto [fd, cf] = s_prime_at_e0(sample_couplings(p, seed), p);
    EXPECT_NEAR(fd, cf, 1e-6);
  }
}
