#include "kam/selftest.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "kam/canonical_flow.hpp"
#include "kam/cohomology.hpp"
#include "kam/constants.hpp"
#include "kam/diophantine.hpp"
#include "kam/kam_engine.hpp"
#include "kam/linearized.hpp"
#include "kam/run_config.hpp"

namespace kam {

namespace {

template <typename E, typename Fn>
bool raises(Fn&& fn) {
  try {
    fn();
  } catch (const E&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

FrequencyVector golden() {
  auto w = catalog("golden");
  w.certification = certify(w.omega, w.tau, 50);
  return w;
}

}  // namespace

std::vector<SelftestCase> run_selftest() {
  std::vector<SelftestCase> out;
  auto check = [&](const std::string& name, const std::function<bool(std::ostringstream&)>& fn) {
    std::ostringstream detail;
    bool pass = false;
    try {
      pass = fn(detail);
    } catch (const std::exception& e) {
      detail << "threw: " << e.what();
    }
    out.push_back({name, pass, detail.str()});
  };

  check("series: product with zero is zero", [](auto&) {
    const auto f = FTSeries::cosine(2, {1, 0}, 1.0);
    return mul(f, FTSeries(2, 0, 0)).empty();
  });
  check("diophantine: golden gamma_min > 0.38 at k = (1,-1)", [](auto& d) {
    const auto c = certify(catalog("golden").omega, 1.0, 100);
    d << "gamma_min " << c.gamma_min;
    return c.gamma_min > 0.38 && c.argmin_k == Lattice{1, -1};
  });
  check("diophantine: (1,1) is resonant", [](auto&) {
    const std::vector<double> w{1.0, 1.0};
    return certify(w, 1.0, 10).gamma_min == 0.0;
  });
  check("cohomology: zero right-hand side", [](auto&) {
    return solve(FTSeries(2, 4, 0), golden()).empty();
  });
  check("cohomology: exact resonance raises", [](auto&) {
    FrequencyVector w;
    w.omega = {1.0, 1.0};
    return raises<ResonanceError>([&] { solve(FTSeries::cosine(2, {1, -1}, 1.0), w); });
  });
  check("linearized: zero perturbation is a fixed point", [](auto&) {
    const auto w = golden();
    const auto N = HamiltonianDecomposition::assemble(
                       0.0, w, {{FTSeries::constant(2, 1.0), FTSeries(2, 0, 0)},
                                {FTSeries(2, 0, 0), FTSeries::constant(2, 1.0)}},
                       FTSeries(2, 0, 0), {1.0, 0.05})
                       .normal_part();
    const auto sol = solve_linearized(FTSeries(2, 4, 2), N, w, Eigen::MatrixXd::Identity(2, 2));
    return sol.dS.U.empty() && sol.dS.V[0].empty() && sol.dS.V[1].empty() &&
           sol.dS.lambda == std::vector<double>{0.0, 0.0} && sol.dN.deltaN.empty();
  });
  check("linearized: constant f gives dS = 0 and dN = f", [](auto&) {
    const auto w = golden();
    const auto N = HamiltonianDecomposition::assemble(
                       0.0, w, {{FTSeries::constant(2, 1.0), FTSeries(2, 0, 0)},
                                {FTSeries(2, 0, 0), FTSeries::constant(2, 1.0)}},
                       FTSeries(2, 0, 0), {1.0, 0.05})
                       .normal_part();
    const auto f = FTSeries::constant(2, 0.25);
    const auto sol = solve_linearized(f, N, w, Eigen::MatrixXd::Identity(2, 2));
    return sol.dS.U.empty() && sol.dS.V[0].empty() && sol.dS.V[1].empty() &&
           majorant_norm(sol.dN.deltaN - f, 0.0, 1.0) == 0.0;
  });
  check("flow: zero generator gives the identity", [](auto&) {
    auto dS = GeneratingFunction::zero(2);
    const FlowWindow window{0.0, 0.1, 0.01, INFINITY};
    const auto Z = integrate_flow(dS, 8, 4, window);
    return majorant_norm(std::span<const FTSeries>(Z.Xp), 0.0, 0.0) == 0.0 &&
           majorant_norm(std::span<const FTSeries>(Z.Y0), 0.0, 0.0) == 0.0;
  });
  check("constants: c5 = 512/25 and c15 c18 >= 26/16", [](auto& d) {
    const auto k = constants_chain(2, 1.0, 0.38, Eigen::MatrixXd::Identity(2, 2), 1.0, 1.0);
    d << "c15*c18 = " << k.c15 * k.c18;
    return k.c5 == 512.0 / 25.0 && k.c15 * k.c18 >= 26.0 / 16.0;
  });
  check("schedule: r = s = 1, tau = 1 start values", [](auto&) {
    const auto k = constants_chain(2, 1.0, 0.38, Eigen::MatrixXd::Identity(2, 2), 1.0, 1.0);
    const auto S = build_schedule(1.0, 1.0, k.c1, 1.0, k, 4);
    return S.delta0 == 1.0 / 32.0 && S.s[0] == 1.0 / 1024.0 && S.r[0] == 1.0 &&
           S.s[1] / S.s[0] == 1.0 / 16.0;
  });
  check("schedule: theta > c1 raises", [](auto&) {
    const auto k = constants_chain(2, 1.0, 0.38, Eigen::MatrixXd::Identity(2, 2), 1.0, 1.0);
    return raises<HypothesisError>([&] { build_schedule(1.0, 1.0, 2.0 * k.c1, 1.0, k, 4); });
  });
  for (auto [t, m] : {std::pair{0.1, 1.5}, {0.5, 2.0}, {0.9, 1.1}}) {
    std::ostringstream name;
    name << "series tail: t = " << t << ", m = " << m;
    check(name.str(), [t = t, m = m](auto& d) {
      const auto c = series_tail_check(t, m, 60);
      d << c.lhs << " <= " << c.rhs;
      return c.holds;
    });
  }
  check("engine: zero perturbation stops at k = 0", [](auto&) {
    auto cfg = preset_config("golden-2d");
    cfg.R.epsilon = 0.0;
    const auto report = run(resolve(cfg));
    return report.steps.empty() && report.R_majorants.front() == 0.0 && !report.failure;
  });
  check("engine: resonant omega refuses to start", [](auto&) {
    auto cfg = preset_config("golden-2d");
    cfg.omega_name.reset();
    cfg.omega = {1.0, 1.0};
    return raises<ResonanceError>([&] { resolve(cfg); });
  });
  check("config: preset-only file is fully defaulted", [](auto&) {
    const auto cfg = parse_config(R"({"preset": "golden-2d"})");
    return cfg.omega_name == "golden" && cfg.K_max == 8 && cfg.mode == Mode::Measured;
  });
  check("config: s > r^(tau+1) is rejected", [](auto&) {
    return raises<ValidationError>([] { parse_config(R"({"preset": "golden-2d", "r": 0.1, "s": 0.05})"); });
  });
  check("config: malformed JSON reports line and column", [](auto& d) {
    try {
      parse_config("{\n  \"preset\": \"golden-2d\",,\n}");
    } catch (const ValidationError& e) {
      d << e.what();
      return std::string(e.what()).find("line 2") != std::string::npos;
    }
    return false;
  });
  return out;
}

}  // namespace kam
