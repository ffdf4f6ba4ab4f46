#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kam {

using cplx = std::complex<double>;

/// Integer vector used both for Fourier modes k and for y-multi-indices.
using Lattice = std::vector<int>;

/// Violated theorem hypothesis or failed configuration check.
class HypothesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Aborted computation: domain escape, singular matrix, broken invariant.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exact resonance <omega, k> = 0 for some retained mode k.
class ResonanceError : public HypothesisError {
 public:
  ResonanceError(const std::string& what, Lattice mode)
      : HypothesisError(what), mode_(std::move(mode)) {}
  const Lattice& mode() const { return mode_; }

 private:
  Lattice mode_;
};

std::string format_lattice(const Lattice& k);

int norm_inf(const Lattice& k);
int norm_1(const Lattice& k);

/// All multi-indices of length n with total degree <= max_degree, ordered by
/// degree and then lexicographically.
std::vector<Lattice> multi_indices(int n, int max_degree);

/// Calls fn for every k in Z^n with |k|_inf <= K, in lexicographic order.
void for_each_mode(int n, int K, const std::function<void(const Lattice&)>& fn);

/// Smallest power of two >= m (m >= 1).
int next_pow2(int m);

}  // namespace kam
