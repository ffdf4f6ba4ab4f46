#include "field_eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace kam::detail {

DirectFields::DirectFields(const std::vector<FTSeries>& fields) : count_(fields.size()) {
  for (const auto& f : fields) {
    if (f.empty()) continue;
    n_ = f.dim();
    K_ = std::max(K_, f.max_mode());
  }
  for (std::size_t idx = 0; idx < fields.size(); ++idx) {
    for (const auto& [key, c] : fields[idx].terms()) {
      if (std::any_of(key.alpha.begin(), key.alpha.end(), [](int a) { return a != 0; }))
        throw ValidationError("DirectFields expects x-only series");
      for (int kj : key.k) offsets_.push_back(kj + K_);
      coeffs_.push_back(c);
      owner_.push_back(static_cast<int>(idx));
    }
  }
  table_.resize(static_cast<std::size_t>(n_) * (2 * K_ + 1));
}

void DirectFields::eval(const double* x, double* out) const {
  std::fill(out, out + count_, 0.0);
  if (coeffs_.empty()) return;
  const int W = 2 * K_ + 1;
  for (int j = 0; j < n_; ++j) {
    cplx* row = table_.data() + static_cast<std::size_t>(j) * W;
    row[K_] = 1.0;
    for (int m = 1; m <= K_; ++m) {
      const double angle = m * x[j];
      row[K_ + m] = cplx(std::cos(angle), std::sin(angle));
      row[K_ - m] = std::conj(row[K_ + m]);
    }
  }
  const int* off = offsets_.data();
  for (std::size_t t = 0; t < coeffs_.size(); ++t, off += n_) {
    cplx v = coeffs_[t];
    for (int j = 0; j < n_; ++j) v *= table_[static_cast<std::size_t>(j) * W + off[j]];
    out[owner_[t]] += v.real();
  }
}

TaylorFields::TaylorFields(const std::vector<FTSeries>& fields, const SpectralGrid& grid,
                           int order)
    : n_(grid.dim()), order_(order), count_(fields.size()) {
  const auto betas = multi_indices(n_, order);
  terms_ = betas.size();
  std::map<Lattice, int> index;
  for (std::size_t b = 0; b < betas.size(); ++b) index[betas[b]] = static_cast<int>(b);
  parent_.assign(terms_, -1);
  axis_.assign(terms_, -1);
  std::vector<double> inv_fact(terms_, 1.0);
  for (std::size_t b = 1; b < terms_; ++b) {
    Lattice p = betas[b];
    int j = 0;
    while (p[j] == 0) ++j;
    --p[j];
    parent_[b] = index.at(p);
    axis_[b] = j;
    double f = 1.0;
    for (int a : betas[b])
      for (int m = 2; m <= a; ++m) f *= m;
    inv_fact[b] = 1.0 / f;
  }

  values_.assign(grid.size() * count_ * terms_, 0.0);
  std::vector<cplx> work(grid.size());
  const cplx I(0.0, 1.0);
  for (std::size_t f = 0; f < count_; ++f) {
    if (fields[f].empty()) continue;
    for (std::size_t b = 0; b < terms_; ++b) {
      std::fill(work.begin(), work.end(), cplx(0.0));
      for (const auto& [key, c] : fields[f].terms()) {
        cplx factor = c;
        for (int j = 0; j < n_; ++j)
          for (int r = 0; r < betas[b][j]; ++r) factor *= I * static_cast<double>(key.k[j]);
        work[grid.slot(key.k)] += factor;
      }
      grid.to_nodes(work);
      for (std::size_t s = 0; s < grid.size(); ++s)
        values_[(s * count_ + f) * terms_ + b] = work[s].real() * inv_fact[b];
    }
  }
  mono_.resize(terms_);
}

int TaylorFields::choose_order(const std::vector<FTSeries>& fields, double radius,
                               double rel_tol, int max_order) {
  for (int p = 1; p <= max_order; ++p) {
    double fact = 1.0;
    for (int m = 2; m <= p + 1; ++m) fact *= m;
    bool ok = true;
    for (const auto& f : fields) {
      if (f.empty()) continue;
      double bound = 0.0;
      for (const auto& [key, c] : f.terms()) {
        const double kr = norm_1(key.k) * radius;
        bound += std::abs(c) * std::pow(kr, p + 1) / fact * std::exp(kr);
      }
      if (bound > rel_tol * majorant_norm(f, 0.0, 0.0)) {
        ok = false;
        break;
      }
    }
    if (ok) return p;
  }
  return -1;
}

void TaylorFields::eval(std::size_t node, const double* d, double* out) const {
  mono_[0] = 1.0;
  for (std::size_t b = 1; b < terms_; ++b) mono_[b] = mono_[parent_[b]] * d[axis_[b]];
  const double* v = values_.data() + node * count_ * terms_;
  for (std::size_t f = 0; f < count_; ++f, v += terms_) {
    double sum = 0.0;
    for (std::size_t b = 0; b < terms_; ++b) sum += v[b] * mono_[b];
    out[f] = sum;
  }
}

}  // namespace kam::detail
