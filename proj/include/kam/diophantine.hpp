#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kam/common.hpp"

namespace kam {

enum class LatticeNorm { Max, Sum };

/// Result of an exhaustive small-divisor scan. Empirical: a positive
/// gamma_min only covers the scanned box.
struct Certification {
  int K_max = 0;
  double gamma_min = 0.0;
  Lattice argmin_k;
};

struct FrequencyVector {
  std::vector<double> omega;
  double tau = 1.0;
  std::optional<double> gamma_claimed;
  std::optional<Certification> certification;

  int dim() const { return static_cast<int>(omega.size()); }
  /// Max norm of omega.
  double norm() const;
  /// min(gamma_claimed, gamma_min) over whichever are present.
  double gamma() const;
  /// True when a certification exists and falls below the claimed value.
  bool certification_below_claim() const;
  void validate() const;
};

/// <omega, k> with error-free transformations (Dot2).
double compensated_dot(std::span<const double> omega, std::span<const int> k);

/// Scans 0 < |k|_inf <= K_max, one representative per +-k pair (first nonzero
/// component positive). Ties go to the lexicographically smallest k.
Certification certify(std::span<const double> omega, double tau, int K_max,
                      LatticeNorm norm = LatticeNorm::Max,
                      std::uint64_t budget = 1'000'000'000ULL);

/// Named frequency vectors: "golden", "sqrt2", "cubic-tribonacci".
FrequencyVector catalog(std::string_view name);

nlohmann::json to_json(const Certification& c);

}  // namespace kam
