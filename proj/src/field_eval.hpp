#pragma once

// Batched evaluation of real x-only series at real points.

#include <vector>

#include "kam/fourier_taylor.hpp"
#include "kam/spectral_grid.hpp"

namespace kam::detail {

/// Direct Fourier summation with per-axis tables of e^{i m x_j}.
class DirectFields {
 public:
  DirectFields() = default;
  explicit DirectFields(const std::vector<FTSeries>& fields);

  std::size_t count() const { return count_; }
  /// out[f] = Re field_f(x)
  void eval(const double* x, double* out) const;

 private:
  int n_ = 0;
  int K_ = 0;
  std::size_t count_ = 0;
  std::vector<int> offsets_;  // n entries per term, k_j + K
  std::vector<cplx> coeffs_;
  std::vector<int> owner_;
  mutable std::vector<cplx> table_;
};

/// Taylor expansion of each field around the nodes of a grid:
/// field(xi_s + d) ~ sum_{|beta| <= p} d^beta_x field(xi_s) d^beta / beta!.
class TaylorFields {
 public:
  TaylorFields(const std::vector<FTSeries>& fields, const SpectralGrid& grid, int order);

  /// Smallest order p <= max_order whose remainder bound
  /// sum |c_k| (|k|_1 r)^{p+1}/(p+1)! e^{|k|_1 r} stays below
  /// rel_tol * majorant(field) for every field; -1 if none.
  static int choose_order(const std::vector<FTSeries>& fields, double radius, double rel_tol,
                          int max_order);

  int order() const { return order_; }
  void eval(std::size_t node, const double* d, double* out) const;

 private:
  int n_;
  int order_;
  std::size_t count_;
  std::size_t terms_;
  std::vector<int> parent_;
  std::vector<int> axis_;
  std::vector<double> values_;  // [node][field][beta], already divided by beta!
  mutable std::vector<double> mono_;
};

}  // namespace kam::detail
