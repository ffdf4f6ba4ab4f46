#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "kam/constants.hpp"
#include "kam/kam_engine.hpp"
#include "kam/run_config.hpp"
#include "test_support.hpp"

namespace kam {
namespace {

using testing::random_point;

// Constants re-derived in long double from the raw inputs.
std::map<std::string, long double> chain_oracle(int n, long double tau, long double gamma,
                                                long double Cn, long double Ci, long double w,
                                                long double c6) {
  const long double q = 0.25L, mu = 1.5L;
  std::map<std::string, long double> c;
  c["c12"] = 1 + 4 * c6 * Cn / gamma;
  c["c8"] = c6 * c["c12"] * (1 + 4 * Cn * Ci) / gamma;
  c["c7"] = 2 * Ci * c["c12"] + 2 * c6 / gamma + n * c["c8"];
  c["c9"] = 1 + 2 * n * w * Ci * c["c12"];
  c["c13"] = 1 + n * c["c12"] * (1 + 4 * Cn * Ci);
  c["c10"] = 1 + n * n * Cn * (2 * c["c7"] + c["c8"]) + c["c13"];
  c["c11"] = 64 * c["c10"];
  const long double L = c["c7"] + c["c8"];
  c["c14"] = 8 * n * L;
  c["c15"] = n * (1 + c["c10"]) * (4 * c["c7"] + c["c8"]);
  c["c17"] = 1 / (4 * c["c11"] * Ci);
  c["c18"] = 1 / (16 * L);
  c["c19"] = std::min(std::pow(q, (2 * tau + 2) / (2 - mu)), c["c15"] * c["c17"] / 2);
  const long double growth = std::exp(c["c14"] * c["c17"]);
  c["c20"] = n * L * growth;
  c["c1"] = std::min(c["c19"], c["c15"] / (32 * n * n * L * growth));
  c["c2"] = 1 / (std::pow(32.0L, 2 * (tau + 1)) * c["c15"]);
  c["c3"] = 16 * n * c["c20"] / c["c15"];
  c["c4"] = 2 * c["c11"] / c["c15"];
  c["c5"] = 512.0L / 25.0L;
  c["c6"] = c6;
  return c;
}

std::map<std::string, double> chain_values(const ConstantsChain& k) {
  return {{"c1", k.c1},   {"c2", k.c2},   {"c3", k.c3},   {"c4", k.c4},   {"c5", k.c5},
          {"c6", k.c6},   {"c7", k.c7},   {"c8", k.c8},   {"c9", k.c9},   {"c10", k.c10},
          {"c11", k.c11}, {"c12", k.c12}, {"c13", k.c13}, {"c14", k.c14}, {"c15", k.c15},
          {"c17", k.c17}, {"c18", k.c18}, {"c19", k.c19}, {"c20", k.c20}};
}

TEST(Constants, ChainMatchesIndependentEvaluation) {
  SplitMix64 rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 3;
    const double tau = (n - 1) + rng.uniform(0.0, 2.0);
    const double gamma = rng.uniform(0.05, 1.0);
    Eigen::MatrixXd C = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) C(i, j) = C(j, i) = C(i, j) + rng.uniform(-0.2, 0.2);
    const double w = rng.uniform(0.5, 3.0);
    const double c6 = rng.uniform(0.1, 5.0);
    const auto k = constants_chain(n, tau, gamma, C, w, c6);
    const auto ref = chain_oracle(n, tau, gamma, k.inputs.C_norm, k.inputs.C_inv_norm, w, c6);
    for (const auto& [name, value] : chain_values(k)) {
      const double expect = static_cast<double>(ref.at(name));
      EXPECT_LE(std::abs(value - expect), 1e-14 * std::abs(expect)) << name << " trial " << trial;
    }
    EXPECT_EQ(k.c5, 512.0 / 25.0);
    EXPECT_GE(k.c15 * k.c18, 26.0 / 16.0);
  }
}

TEST(Constants, InputNormsAreRowSums) {
  Eigen::MatrixXd C(2, 2);
  C << 2.0, -1.0, 0.5, 3.0;
  const auto k = constants_chain(2, 1.0, 0.3, C, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(k.inputs.C_norm, 3.5);
  EXPECT_NEAR(k.inputs.C_inv_norm, (3.0 + 1.0) / 6.5, 1e-15);
}

TEST(Constants, RejectsBadInputs) {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW(constants_chain(1, 1.0, 0.3, I, 1.0, 1.0), ValidationError);
  EXPECT_THROW(constants_chain(2, 0.5, 0.3, I, 1.0, 1.0), ValidationError);
  EXPECT_THROW(constants_chain(2, 1.0, 0.0, I, 1.0, 1.0), ValidationError);
  EXPECT_THROW(constants_chain(2, 1.0, 0.3, I, 1.0, -1.0), ValidationError);
  EXPECT_THROW(constants_chain(2, 1.0, 0.3, Eigen::MatrixXd::Zero(2, 2), 1.0, 1.0), NumericalError);
}

ConstantsChain unit_chain() {
  return constants_chain(2, 1.0, 0.38, Eigen::MatrixXd::Identity(2, 2), 1.0, 1.0);
}

TEST(Schedule, StartValuesForUnitDomain) {
  const auto k = unit_chain();
  const auto S = build_schedule(1.0, 1.0, k.c1, 1.0, k, 40);
  EXPECT_EQ(S.delta0, 1.0 / 32.0);
  EXPECT_EQ(S.s[0], 1.0 / 1024.0);
  EXPECT_EQ(S.r[0], 1.0);
  EXPECT_EQ(S.t[0], k.c1);
}

TEST(Schedule, GeometricLaws) {
  const auto k = unit_chain();
  const auto S = build_schedule(1.0, 1.0, k.c1, 1.0, k, 40);
  ASSERT_EQ(S.s.size(), 41u);
  for (std::size_t i = 0; i + 1 < S.s.size(); ++i) {
    EXPECT_DOUBLE_EQ(S.s[i + 1] / S.s[i], 1.0 / 16.0);
    EXPECT_DOUBLE_EQ(S.delta[i + 1] / S.delta[i], 0.25);
    EXPECT_LE(S.r[i + 1], S.r[i]);
    EXPECT_EQ(S.r[i], 0.75 + 8.0 * S.delta[i]);
    EXPECT_NEAR(S.t[i + 1], std::pow(S.t[i], 1.5), 1e-300 + 1e-14 * S.t[i + 1]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < S.M.size(); ++i) sum += S.M[i] / (S.s[i] * S.s[i]);
  EXPECT_LE(sum, 2.0 * S.t0 / k.c15);
}

TEST(Schedule, ThetaAboveC1Raises) {
  const auto k = unit_chain();
  EXPECT_THROW(build_schedule(1.0, 1.0, 2.0 * k.c1, 1.0, k, 4), HypothesisError);
}

TEST(SeriesTail, PartialSumsBelowClosedForm) {
  for (auto [t, m] : {std::pair{0.1, 1.5}, {0.5, 2.0}, {0.9, 1.1}, {0.3, 3.0}}) {
    const auto c = series_tail_check(t, m, 200);
    EXPECT_TRUE(c.holds) << t << " " << m;
    EXPECT_LE(c.lhs, c.rhs);
    EXPECT_DOUBLE_EQ(c.rhs, t / (1.0 - std::pow(t, m - 1.0)));
  }
}

TEST(QuadraticExponent, RecoversPowerLaw) {
  std::vector<double> R{1e-3};
  for (int k = 0; k < 4; ++k) R.push_back(3.0 * R.back() * R.back());
  EXPECT_NEAR(quadratic_exponent(R), 2.0, 1e-12);
  EXPECT_TRUE(std::isnan(quadratic_exponent({1e-3, 1e-6})));
  EXPECT_TRUE(std::isnan(quadratic_exponent({1e-3, 0.0, 0.0})));
}

TEST(Decomposition, ValidateCatchesAsymmetryAndDomain) {
  auto w = catalog("golden");
  w.certification = certify(w.omega, w.tau, 50);
  SeriesMatrix Q(2, std::vector<FTSeries>(2, FTSeries(2, 0, 0)));
  Q[0][0] = Q[1][1] = FTSeries::constant(2, 1.0);
  Q[0][1] = FTSeries::cosine(2, {1, 0}, 0.1);
  EXPECT_THROW(HamiltonianDecomposition::assemble(0.0, w, Q, FTSeries(2, 0, 0), {1.0, 0.05}).validate(),
               ValidationError);
  Q[0][1] = FTSeries(2, 0, 0);
  EXPECT_THROW(HamiltonianDecomposition::assemble(0.0, w, Q, FTSeries(2, 0, 0), {0.1, 0.05}).validate(),
               ValidationError);
  EXPECT_NO_THROW(HamiltonianDecomposition::assemble(0.0, w, Q, FTSeries(2, 0, 0), {1.0, 0.05}).validate());
  EXPECT_THROW(mode_from_string("fast"), ValidationError);
}

class GoldenRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    setup_ = new EngineSetup(resolve(preset_config("golden-2d")));
    report_ = new RunReport(run(*setup_));
  }
  static void TearDownTestSuite() {
    delete report_;
    delete setup_;
  }
  static EngineSetup* setup_;
  static RunReport* report_;
};

EngineSetup* GoldenRun::setup_ = nullptr;
RunReport* GoldenRun::report_ = nullptr;

TEST_F(GoldenRun, ConvergesAndStopsAtFloor) {
  const auto& r = *report_;
  ASSERT_FALSE(r.failure);
  EXPECT_GE(r.steps.size(), 3u);
  EXPECT_EQ(r.termination, "floor");
  for (std::size_t k = 0; k + 1 < r.R_majorants.size(); ++k)
    EXPECT_LT(r.R_majorants[k + 1], r.R_majorants[k]);
  EXPECT_LT(r.R_majorants.back(), r.floor);
  // The first two steps are far above roundoff and must be quadratic.
  const std::vector<double> head(r.R_majorants.begin(), r.R_majorants.begin() + 3);
  EXPECT_NEAR(quadratic_exponent(head), 2.0, 0.1);
}

TEST_F(GoldenRun, NormalFormKeepsItsShape) {
  const auto& N = report_->final_state.N;
  const auto& w = setup_->H0.omega.omega;
  FTSeries off = at_y_zero(N);
  off.add({0, 0}, {0, 0}, -report_->final_state.a);
  EXPECT_LE(majorant_norm(off, 0.0, 0.0), 1e-12);
  for (int j = 0; j < 2; ++j) {
    FTSeries g = y_slice(N, j == 0 ? Lattice{1, 0} : Lattice{0, 1});
    g.add({0, 0}, {0, 0}, -w[j]);
    EXPECT_LE(majorant_norm(g, 0.0, 0.0), 1e-12);
  }
}

TEST_F(GoldenRun, AuditsPassAndCompositionIsConsistent) {
  for (const auto& step : report_->steps) {
    for (const auto& a : step.audits) EXPECT_TRUE(a.pass) << a.name << " at step " << step.k;
    EXPECT_LE(step.composition_error, 1e-12);
    EXPECT_LE(step.value_residual, 1e-10 * report_->R_majorants.front());
    EXPECT_LE(step.gradient_residual, 1e-10 * report_->R_majorants.front());
  }
  EXPECT_EQ(report_->generators.size(), report_->steps.size());
}

TEST_F(GoldenRun, TorusResidualShrinks) {
  const auto& t = report_->torus_residuals;
  ASSERT_EQ(t.size(), report_->steps.size());
  EXPECT_LE(t.back() * 10.0, t.front());
}

TEST_F(GoldenRun, MainTheoremEstimatesHold) {
  const auto v = verify_main_theorem(*report_, setup_->chain, setup_->theta, 1);
  EXPECT_TRUE(v.pass);
  for (const auto* e : {&v.trafo, &v.hesse, &v.tayl3}) {
    EXPECT_TRUE(e->pass) << e->name;
    EXPECT_GT(e->margin, 0.0) << e->name;
  }
  EXPECT_GE(v.theta_effective, v.theta);
}

TEST_F(GoldenRun, CompositionDeltaMatchesPointwiseDifference) {
  // Redo step 0 and compare (H o Z) - H with direct evaluation.
  IterateState state{setup_->H0.normal_part(), setup_->H0.R, setup_->H0.a};
  const auto geo = step_geometry(*setup_, 0);
  const auto step = kam_step(state, geo, *setup_, 0);
  const FTSeries H = state.N + state.R;
  const auto dH = composition_delta(H, step.Z, 32, 15, 6);
  SplitMix64 rng(72);
  const double scale = report_->R_majorants.front();
  for (int i = 0; i < 30; ++i) {
    const auto xi = random_point(rng, 2, 0.0, 2.0 * std::numbers::pi);
    const auto eta = random_point(rng, 2, -geo.sigma / 2, geo.sigma / 2);
    const auto p = apply(step.Z, xi, eta);
    const double direct = eval(H, std::span<const double>(p.x), std::span<const double>(p.y)).real() -
                          eval(H, std::span<const double>(xi), std::span<const double>(eta)).real();
    const double series = eval(dH.series, std::span<const double>(xi), std::span<const double>(eta)).real();
    EXPECT_NEAR(series, direct, 1e-9 * scale);
  }
}

TEST(Engine, ZeroRemainderTakesNoSteps) {
  auto cfg = preset_config("golden-2d");
  cfg.R.epsilon = 0.0;
  const auto r = run(resolve(cfg));
  EXPECT_TRUE(r.steps.empty());
  EXPECT_EQ(r.termination, "zero remainder");
  EXPECT_FALSE(r.failure);
}

TEST(Engine, ScheduleModeRefusesLargeRemainder) {
  auto cfg = preset_config("golden-2d");
  cfg.mode = Mode::Schedule;
  EXPECT_THROW(resolve(cfg), HypothesisError);
}

TEST(Engine, MeasuredModeWarnsInstead) {
  const auto setup = resolve(preset_config("golden-2d"));
  EXPECT_FALSE(setup.hypotheses_hold);
  EXPECT_FALSE(setup.warnings.empty());
}

TEST(Engine, DegenerateTwistIsRejected) {
  auto cfg = preset_config("golden-2d");
  Eigen::MatrixXd C = 10.0 * Eigen::MatrixXd::Identity(2, 2);
  cfg.C = C;
  EXPECT_THROW(resolve(cfg), HypothesisError);
}

TEST(Engine, ResonantFrequencyRefusesToStart) {
  auto cfg = preset_config("golden-2d");
  cfg.omega_name.reset();
  cfg.omega = {1.0, 1.0};
  EXPECT_THROW(resolve(cfg), ResonanceError);
}

TEST(Engine, RunIsDeterministic) {
  auto cfg = preset_config("golden-2d");
  cfg.k_max = 2;
  const auto a = run(resolve(cfg));
  const auto b = run(resolve(cfg));
  EXPECT_EQ(a.R_majorants, b.R_majorants);
  EXPECT_EQ(a.torus_residuals, b.torus_residuals);
}

}  // namespace
}  // namespace kam
