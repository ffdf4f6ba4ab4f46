#pragma once

#include <span>
#include <vector>

#include "kam/diophantine.hpp"
#include "kam/fourier_taylor.hpp"

namespace kam {

struct SolveDiagnostics {
  /// Smallest |<omega,k>| over the retained modes of g.
  double min_divisor = 0.0;
  Lattice min_divisor_k;
  /// Set when min_divisor < 1e-10 |omega|.
  bool ill_conditioned = false;
};

/// Solves <u_x, omega> = g for x-only, zero-mean g: u_k = g_k / (i<k,omega>),
/// u_0 = 0.
FTSeries solve(const FTSeries& g, const FrequencyVector& omega,
               SolveDiagnostics* diagnostics = nullptr);

std::vector<FTSeries> solve_vector(std::span<const FTSeries> G, const FrequencyVector& omega,
                                   SolveDiagnostics* diagnostics = nullptr);

/// max over 0 < |k|_inf <= K of gamma delta^tau / (|<omega,k>| e^{|k|_1 delta}).
double amplification_estimate(const FrequencyVector& omega, int K, double delta);

/// <u_x, omega> as a series (used for resubstitution checks).
FTSeries frequency_derivative(const FTSeries& u, std::span<const double> omega);

}  // namespace kam
