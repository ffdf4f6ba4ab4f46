#include "kam/diophantine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace kam {

namespace {

void two_sum(double a, double b, double& s, double& e) {
  s = a + b;
  double z = s - a;
  e = (a - (s - z)) + (b - z);
}

}  // namespace

double FrequencyVector::norm() const {
  double m = 0.0;
  for (double w : omega) m = std::max(m, std::abs(w));
  return m;
}

double FrequencyVector::gamma() const {
  if (gamma_claimed && certification) return std::min(*gamma_claimed, certification->gamma_min);
  if (gamma_claimed) return *gamma_claimed;
  if (certification) return certification->gamma_min;
  throw ValidationError("frequency vector has neither a claimed nor a certified gamma");
}

bool FrequencyVector::certification_below_claim() const {
  return gamma_claimed && certification && certification->gamma_min < *gamma_claimed;
}

void FrequencyVector::validate() const {
  const int n = dim();
  if (n < 2) throw ValidationError("frequency vector needs n >= 2");
  if (tau < n - 1) throw ValidationError("tau must be >= n-1");
  for (double w : omega)
    if (!std::isfinite(w)) throw ValidationError("frequency components must be finite");
  if (norm() == 0.0) throw ValidationError("frequency vector is zero");
  if (gamma_claimed && !(*gamma_claimed > 0.0)) throw ValidationError("gamma must be > 0");
}

double compensated_dot(std::span<const double> omega, std::span<const int> k) {
  double sum = 0.0;
  double err = 0.0;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    const double a = omega[i];
    const double b = static_cast<double>(k[i]);
    const double p = a * b;
    const double pe = std::fma(a, b, -p);
    double s, se;
    two_sum(sum, p, s, se);
    sum = s;
    err += se + pe;
  }
  return sum + err;
}

Certification certify(std::span<const double> omega, double tau, int K_max, LatticeNorm norm,
                      std::uint64_t budget) {
  const int n = static_cast<int>(omega.size());
  if (n < 1) throw ValidationError("certify needs a nonempty frequency vector");
  if (K_max < 1) throw ValidationError("certify needs K_max >= 1");
  bool nonzero = false;
  for (double w : omega) nonzero = nonzero || w != 0.0;
  if (!nonzero) throw ValidationError("certify needs a nonzero frequency vector");

  double candidates = 1.0;
  for (int i = 0; i < n; ++i) candidates *= 2.0 * K_max + 1.0;
  if (candidates > static_cast<double>(budget))
    throw ValidationError("certification box (2K+1)^n = " + std::to_string(candidates) +
                          " exceeds the candidate budget");

  const int max_weight = norm == LatticeNorm::Max ? K_max : n * K_max;
  std::vector<double> weight(max_weight + 1);
  for (int m = 0; m <= max_weight; ++m) weight[m] = std::pow(static_cast<double>(m), tau);

  Certification best{K_max, std::numeric_limits<double>::infinity(), {}};
  // Half-space: first nonzero component positive, so the leading entry
  // runs over 0..K and k = 0 is skipped.
  Lattice k(n, -K_max);
  k[0] = 0;
  while (true) {
    int lead = 0;
    while (lead < n && k[lead] == 0) ++lead;
    if (lead < n && k[lead] > 0) {
      const int size = norm == LatticeNorm::Max ? norm_inf(k) : norm_1(k);
      const double value = std::abs(compensated_dot(omega, k)) * weight[size];
      if (value < best.gamma_min) {
        best.gamma_min = value;
        best.argmin_k = k;
      }
    }
    int j = n - 1;
    while (j >= 0 && k[j] == K_max) {
      k[j] = (j == 0) ? 0 : -K_max;
      --j;
    }
    if (j < 0) break;
    ++k[j];
  }
  return best;
}

FrequencyVector catalog(std::string_view name) {
  FrequencyVector f;
  if (name == "golden") {
    f.omega = {1.0, (std::sqrt(5.0) - 1.0) / 2.0};
  } else if (name == "sqrt2") {
    f.omega = {1.0, std::sqrt(2.0) - 1.0};
  } else if (name == "cubic-tribonacci") {
    // Real root of rho^3 + rho - 1 = 0 by Newton from 0.7.
    double rho = 0.7;
    for (int it = 0; it < 60; ++it) {
      const double step = (rho * rho * rho + rho - 1.0) / (3.0 * rho * rho + 1.0);
      rho -= step;
      if (std::abs(step) < 1e-17) break;
    }
    f.omega = {1.0, rho, rho * rho};
  } else {
    throw ValidationError("unknown frequency catalog entry '" + std::string(name) + "'");
  }
  f.tau = static_cast<double>(f.dim() - 1);
  return f;
}

nlohmann::json to_json(const Certification& c) {
  return {{"gamma_min", c.gamma_min}, {"argmin_k", c.argmin_k}, {"K_max", c.K_max}};
}

}  // namespace kam
