#include "kam/cohomology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kam {

namespace {

constexpr double kMeanTolerance = 1e-13;
constexpr double kNearResonance = 1e-10;

}  // namespace

FTSeries solve(const FTSeries& g, const FrequencyVector& omega, SolveDiagnostics* diagnostics) {
  const int n = g.dim();
  if (omega.dim() != n) throw ValidationError("frequency and series dimensions differ");
  if (g.max_degree() > 0) throw ValidationError("cohomological solve expects an x-only series");
  const Lattice zero(n, 0);
  const double mean = std::abs(g.coeff(zero, zero));
  if (mean > kMeanTolerance * majorant_norm(g, 0.0, 0.0))
    throw ValidationError("right-hand side of the cohomological equation has nonzero mean " +
                          std::to_string(mean));

  SolveDiagnostics diag{std::numeric_limits<double>::infinity(), {}, false};
  FTSeries u(n, g.cutoff(), 0, g.real_valued());
  for (const auto& [key, c] : g.terms()) {
    if (key.k == zero) continue;
    const double divisor = compensated_dot(omega.omega, key.k);
    if (divisor == 0.0)
      throw ResonanceError("exact resonance <omega,k> = 0 at k = " + format_lattice(key.k), key.k);
    if (std::abs(divisor) < diag.min_divisor) {
      diag.min_divisor = std::abs(divisor);
      diag.min_divisor_k = key.k;
    }
    u.set(key.k, key.alpha, c / cplx(0.0, divisor));
  }
  if (u.real_valued()) u.symmetrize();
  diag.ill_conditioned = diag.min_divisor < kNearResonance * omega.norm();
  if (diagnostics) *diagnostics = diag;
  return u;
}

std::vector<FTSeries> solve_vector(std::span<const FTSeries> G, const FrequencyVector& omega,
                                   SolveDiagnostics* diagnostics) {
  std::vector<FTSeries> out;
  SolveDiagnostics worst{std::numeric_limits<double>::infinity(), {}, false};
  for (const auto& g : G) {
    SolveDiagnostics d;
    out.push_back(solve(g, omega, &d));
    if (d.min_divisor < worst.min_divisor) worst = d;
    worst.ill_conditioned = worst.ill_conditioned || d.ill_conditioned;
  }
  if (diagnostics) *diagnostics = worst;
  return out;
}

double amplification_estimate(const FrequencyVector& omega, int K, double delta) {
  if (!(delta > 0.0)) throw ValidationError("amplification_estimate needs delta > 0");
  const int n = omega.dim();
  const double gamma = omega.gamma();
  const double scale = gamma * std::pow(delta, omega.tau);
  double worst = 0.0;
  for_each_mode(n, K, [&](const Lattice& k) {
    if (norm_inf(k) == 0) return;
    const double divisor = std::abs(compensated_dot(omega.omega, k));
    if (divisor == 0.0)
      throw ResonanceError("exact resonance <omega,k> = 0 at k = " + format_lattice(k), k);
    worst = std::max(worst, scale / (divisor * std::exp(norm_1(k) * delta)));
  });
  return worst;
}

FTSeries frequency_derivative(const FTSeries& u, std::span<const double> omega) {
  FTSeries out(u.dim(), u.cutoff(), u.degree(), u.real_valued());
  for (const auto& [key, c] : u.terms()) {
    const double d = compensated_dot(omega, key.k);
    if (d != 0.0) out.set(key.k, key.alpha, c * cplx(0.0, d));
  }
  return out;
}

}  // namespace kam
