#include <gtest/gtest.h>

#include <cmath>

#include "kam/cohomology.hpp"
#include "test_support.hpp"

namespace kam {
namespace {

using testing::certified_golden;
using testing::random_zero_mean;

TEST(Cohomology, ResubstitutionOnRandomSeries) {
  const auto w = certified_golden();
  SplitMix64 rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = random_zero_mean(rng, 2, 8, 0.6);
    const auto u = solve(g, w);
    const auto back = frequency_derivative(u, w.omega);
    EXPECT_LE(majorant_norm(back - g, 0.0, 0.0), 1e-12 * majorant_norm(g, 0.0, 0.0));
    EXPECT_EQ(u.coeff({0, 0}, {0, 0}), cplx(0.0));
    EXPECT_TRUE(u.real_valued());
    EXPECT_LE(u.hermitian_defect(), 0.0);
  }
}

TEST(Cohomology, ModewiseDivision) {
  const auto w = certified_golden();
  const auto g = FTSeries::sine(2, {1, -1}, 0.3);
  const auto u = solve(g, w);
  // sin<k,x> = (e - e^-) / 2i, so u = -0.3 cos<k,x> / <k,omega>.
  const double d = w.omega[0] - w.omega[1];
  EXPECT_LE(majorant_norm(u + FTSeries::cosine(2, {1, -1}, 0.3 / d), 0.0, 0.0), 1e-15);
}

TEST(Cohomology, DiagnosticsReportSmallestDivisor) {
  const auto w = certified_golden();
  SplitMix64 rng(42);
  const auto g = random_zero_mean(rng, 2, 6, 1.0);
  SolveDiagnostics d;
  solve(g, w, &d);
  double smallest = INFINITY;
  for (const auto& [key, c] : g.terms()) {
    if (norm_inf(key.k) == 0) continue;
    smallest = std::min(smallest, std::abs(w.omega[0] * key.k[0] + w.omega[1] * key.k[1]));
  }
  EXPECT_NEAR(d.min_divisor, smallest, 1e-15);
  EXPECT_FALSE(d.ill_conditioned);
}

TEST(Cohomology, RejectsNonzeroMeanAndYDependence) {
  const auto w = certified_golden();
  EXPECT_THROW(solve(FTSeries::constant(2, 1.0), w), ValidationError);
  EXPECT_THROW(solve(FTSeries::monomial(2, {1, 0}), w), ValidationError);
}

TEST(Cohomology, ExactResonanceRaisesWithMode) {
  FrequencyVector w;
  w.omega = {1.0, 2.0};
  try {
    solve(FTSeries::cosine(2, {2, -1}), w);
    FAIL() << "expected ResonanceError";
  } catch (const ResonanceError& e) {
    const Lattice k = e.mode();
    EXPECT_TRUE(k == (Lattice{2, -1}) || k == (Lattice{-2, 1}));
  }
}

TEST(Cohomology, SolveIsLinear) {
  const auto w = certified_golden();
  SplitMix64 rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = random_zero_mean(rng, 2, 5);
    const auto g = random_zero_mean(rng, 2, 5);
    const auto lhs = solve(f + 2.0 * g, w);
    const auto rhs = solve(f, w) + 2.0 * solve(g, w);
    EXPECT_LE(majorant_norm(lhs - rhs, 0.0, 0.0), 1e-13 * majorant_norm(lhs, 0.0, 0.0));
  }
}

TEST(Cohomology, SolveVectorKeepsWorstDiagnostics) {
  const auto w = certified_golden();
  const std::vector<FTSeries> G{FTSeries::cosine(2, {1, 0}), FTSeries::cosine(2, {2, -3})};
  SolveDiagnostics d;
  const auto U = solve_vector(G, w, &d);
  ASSERT_EQ(U.size(), 2u);
  EXPECT_NEAR(d.min_divisor, std::abs(2.0 - 3.0 * w.omega[1]), 1e-15);
}

TEST(Cohomology, AmplificationEstimateMatchesDirectMaximum) {
  const auto w = certified_golden();
  const double delta = 0.1;
  double ref = 0.0;
  for (int a = -6; a <= 6; ++a)
    for (int b = -6; b <= 6; ++b) {
      if (a == 0 && b == 0) continue;
      const double div = std::abs(a * w.omega[0] + b * w.omega[1]);
      ref = std::max(ref, w.gamma() * std::pow(delta, w.tau) /
                              (div * std::exp((std::abs(a) + std::abs(b)) * delta)));
    }
  EXPECT_NEAR(amplification_estimate(w, 6, delta), ref, 1e-14 * ref);
  EXPECT_THROW(amplification_estimate(w, 6, 0.0), ValidationError);
}

}  // namespace
}  // namespace kam
