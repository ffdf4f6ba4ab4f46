#pragma once

#include <map>
#include <span>
#include <vector>

#include "kam/fourier_taylor.hpp"

namespace kam {

/// Uniform grid of P points per axis on the n-torus, with node x_j = 2*pi*j/P,
/// and the transforms between mode coefficients and nodal values. Arrays are
/// row-major over the axes; a mode k lives at slot (k_0 mod P, ..., k_{n-1} mod P).
class SpectralGrid {
 public:
  SpectralGrid(int n, int points);

  int dim() const { return n_; }
  int points() const { return P_; }
  std::size_t size() const { return size_; }

  std::size_t slot(std::span<const int> k) const;
  /// Signed mode stored at slot; components in (-P/2, P/2].
  Lattice mode_at(std::size_t slot) const;
  std::vector<double> node(std::size_t slot) const;

  /// In place: coefficients -> nodal values (f(x_j) = sum_k c_k e^{i<k,x_j>}).
  void to_nodes(std::vector<cplx>& data) const;
  /// In place: nodal values -> coefficients (normalized).
  void to_coefficients(std::vector<cplx>& data) const;

 private:
  int n_;
  int P_;
  std::size_t size_;
};

/// Transform size for a cutoff K: 2K+2 rounded up to a power of two.
int transform_size(int K);

using NodalSlices = std::map<Lattice, std::vector<cplx>>;

/// Nodal values of every y-coefficient slice of f.
NodalSlices nodal_slices(const FTSeries& f, const SpectralGrid& grid);
/// Nodal values of an x-only series.
std::vector<cplx> nodal_values(const FTSeries& f, const SpectralGrid& grid);

struct GridProjection {
  FTSeries series;
  double truncation_loss = 0.0;
};

/// Inverse of nodal_slices: keeps modes with |k|_inf <= K (K < P/2) and slices
/// with |alpha|_1 <= D; everything else is counted as truncation loss.
GridProjection project_slices(const NodalSlices& slices, const SpectralGrid& grid, int K,
                              int D, bool real_valued);
GridProjection project_values(const std::vector<cplx>& values, const SpectralGrid& grid, int K,
                              bool real_valued);

}  // namespace kam
