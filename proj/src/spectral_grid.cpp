#include "kam/spectral_grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <tuple>

namespace kam {

namespace {

// Plans are created once per (rank, size, direction) and executed with the
// new-array interface, which is safe to call concurrently.
fftw_plan cached_plan(int n, int P, int sign) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int>, fftw_plan> plans;
  std::lock_guard lock(mutex);
  auto key = std::make_tuple(n, P, sign);
  if (auto it = plans.find(key); it != plans.end()) return it->second;
  std::vector<int> dims(n, P);
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(P);
  std::vector<cplx> scratch(total);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  fftw_plan plan =
      fftw_plan_dft(n, dims.data(), buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!plan) throw NumericalError("FFTW could not create a plan");
  plans.emplace(key, plan);
  return plan;
}

}  // namespace

SpectralGrid::SpectralGrid(int n, int points) : n_(n), P_(points), size_(1) {
  if (n < 1 || points < 1) throw ValidationError("spectral grid needs n >= 1 and points >= 1");
  for (int i = 0; i < n; ++i) size_ *= static_cast<std::size_t>(points);
}

std::size_t SpectralGrid::slot(std::span<const int> k) const {
  std::size_t idx = 0;
  for (int i = 0; i < n_; ++i) {
    int m = k[i] % P_;
    if (m < 0) m += P_;
    idx = idx * P_ + m;
  }
  return idx;
}

Lattice SpectralGrid::mode_at(std::size_t slot) const {
  Lattice k(n_);
  for (int i = n_ - 1; i >= 0; --i) {
    int m = static_cast<int>(slot % P_);
    slot /= P_;
    k[i] = (2 * m <= P_) ? m : m - P_;
  }
  return k;
}

std::vector<double> SpectralGrid::node(std::size_t slot) const {
  std::vector<double> x(n_);
  for (int i = n_ - 1; i >= 0; --i) {
    x[i] = 2.0 * std::numbers::pi * static_cast<double>(slot % P_) / P_;
    slot /= P_;
  }
  return x;
}

void SpectralGrid::to_nodes(std::vector<cplx>& data) const {
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(cached_plan(n_, P_, FFTW_BACKWARD), buf, buf);
}

void SpectralGrid::to_coefficients(std::vector<cplx>& data) const {
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(cached_plan(n_, P_, FFTW_FORWARD), buf, buf);
  const double scale = 1.0 / static_cast<double>(size_);
  for (auto& v : data) v *= scale;
}

int transform_size(int K) { return next_pow2(2 * K + 2); }

NodalSlices nodal_slices(const FTSeries& f, const SpectralGrid& grid) {
  if (f.dim() != grid.dim()) throw ValidationError("series and grid dimensions differ");
  if (2 * f.max_mode() >= grid.points())
    throw ValidationError("grid too coarse for the series modes");
  NodalSlices out;
  for (const auto& [key, c] : f.terms()) {
    auto& arr = out[key.alpha];
    if (arr.empty()) arr.assign(grid.size(), cplx(0.0));
    arr[grid.slot(key.k)] += c;
  }
  for (auto& [alpha, arr] : out) grid.to_nodes(arr);
  return out;
}

std::vector<cplx> nodal_values(const FTSeries& f, const SpectralGrid& grid) {
  if (f.max_degree() > 0) throw ValidationError("nodal_values expects an x-only series");
  auto slices = nodal_slices(f, grid);
  if (slices.empty()) return std::vector<cplx>(grid.size(), cplx(0.0));
  return std::move(slices.begin()->second);
}

GridProjection project_slices(const NodalSlices& slices, const SpectralGrid& grid, int K, int D,
                              bool real_valued) {
  if (2 * K >= grid.points()) throw ValidationError("retained cutoff must stay below P/2");
  GridProjection out{FTSeries(grid.dim(), K, D, real_valued), 0.0};
  std::vector<cplx> work;
  for (const auto& [alpha, values] : slices) {
    work = values;
    grid.to_coefficients(work);
    const bool keep_slice = norm_1(alpha) <= D;
    for (std::size_t s = 0; s < work.size(); ++s) {
      if (work[s] == cplx(0.0)) continue;
      Lattice k = grid.mode_at(s);
      if (keep_slice && norm_inf(k) <= K)
        out.series.add(k, alpha, work[s]);
      else
        out.truncation_loss += std::abs(work[s]);
    }
  }
  if (real_valued) out.series.symmetrize();
  return out;
}

GridProjection project_values(const std::vector<cplx>& values, const SpectralGrid& grid, int K,
                              bool real_valued) {
  NodalSlices slices;
  slices.emplace(Lattice(grid.dim(), 0), values);
  auto out = project_slices(slices, grid, K, 0, real_valued);
  return out;
}

}  // namespace kam
