#pragma once

#include <map>
#include <span>
#include <vector>

#include <json.hpp>

#include "kam/common.hpp"

namespace kam {

struct SeriesKey {
  Lattice k;
  Lattice alpha;

  auto operator<=>(const SeriesKey&) const = default;
  bool operator==(const SeriesKey&) const = default;
};

/// Cutoffs applied to products.
struct TruncationLimits {
  int K_max = 32;
  int D_max = 4;
};

/// Truncated Fourier series in x (modes |k|_inf <= K) times polynomial in y
/// (total degree <= D):
///
///   f(x, y) = sum_{k, alpha} c(k, alpha) e^{i<k,x>} y^alpha.
///
/// Storage is sparse; absent keys are zero. Axes are 0-based.
class FTSeries {
 public:
  using Map = std::map<SeriesKey, cplx>;

  /// Coefficients with magnitude at or below this are not stored.
  static constexpr double kDropTolerance = 1e-300;

  FTSeries() = default;
  FTSeries(int n, int K, int D, bool real_valued = true);

  static FTSeries constant(int n, cplx value);
  /// value * y^alpha
  static FTSeries monomial(int n, const Lattice& alpha, cplx value = 1.0);
  /// amplitude * cos<k,x>
  static FTSeries cosine(int n, const Lattice& k, double amplitude = 1.0);
  /// amplitude * sin<k,x>
  static FTSeries sine(int n, const Lattice& k, double amplitude = 1.0);

  int dim() const { return n_; }
  int cutoff() const { return K_; }
  int degree() const { return D_; }
  bool real_valued() const { return real_; }
  void set_real_valued(bool real) { real_ = real; }

  const Map& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  cplx coeff(const Lattice& k, const Lattice& alpha) const;
  void set(const Lattice& k, const Lattice& alpha, cplx value);
  void add(const Lattice& k, const Lattice& alpha, cplx value);

  /// Largest |k|_inf and |alpha|_1 actually present.
  int max_mode() const;
  int max_degree() const;

  /// Copy with new cutoffs; terms outside are dropped.
  FTSeries truncated(int K, int D) const;
  /// Copy with cutoffs raised to at least (K, D).
  FTSeries widened(int K, int D) const;

  /// Largest |c(k,alpha) - conj(c(-k,alpha))|.
  double hermitian_defect() const;
  /// Replace c(k,alpha) by the Hermitian average; sets real_valued.
  void symmetrize();

  FTSeries& operator+=(const FTSeries& other);
  FTSeries& operator-=(const FTSeries& other);
  FTSeries& operator*=(cplx scale);

  friend FTSeries operator+(FTSeries a, const FTSeries& b) { return a += b; }
  friend FTSeries operator-(FTSeries a, const FTSeries& b) { return a -= b; }
  friend FTSeries operator-(FTSeries a) { return a *= -1.0; }
  friend FTSeries operator*(cplx s, FTSeries a) { return a *= s; }
  friend FTSeries operator*(FTSeries a, cplx s) { return a *= s; }

 private:
  void check_key(const Lattice& k, const Lattice& alpha) const;

  int n_ = 0;
  int K_ = 0;
  int D_ = 0;
  bool real_ = true;
  Map terms_;
};

/// Matrix of series, row-major (entry [i][j]).
using SeriesMatrix = std::vector<std::vector<FTSeries>>;

struct Product {
  FTSeries value;
  /// Sum of |dropped coefficients| due to the K_max / D_max cutoffs.
  double truncation_loss = 0.0;
};

cplx eval(const FTSeries& f, std::span<const cplx> x, std::span<const cplx> y);
cplx eval(const FTSeries& f, std::span<const double> x, std::span<const double> y);

Product multiply(const FTSeries& f, const FTSeries& g, TruncationLimits limits = {});
FTSeries mul(const FTSeries& f, const FTSeries& g, TruncationLimits limits = {});

FTSeries partial_x(const FTSeries& f, int j);
FTSeries partial_y(const FTSeries& f, int j);

/// k = 0 slice (polynomial in y only).
FTSeries mean_x(const FTSeries& f);
/// Coefficient of y^alpha as an x-only series.
FTSeries y_slice(const FTSeries& f, const Lattice& alpha);
/// f(x, 0).
FTSeries at_y_zero(const FTSeries& f);
/// Constant term c(0, 0).
cplx constant_term(const FTSeries& f);

/// {f, g} = sum_j f_{x_j} g_{y_j} - f_{y_j} g_{x_j}
Product poisson(const FTSeries& f, const FTSeries& g, TruncationLimits limits = {});

/// sum |c(k,alpha)| e^{|k|_1 rho} sigma^{|alpha|_1}; dominates the sup on D(rho, sigma).
double majorant_norm(const FTSeries& f, double rho, double sigma);
/// Row-sum norm of the entrywise majorants.
double majorant_norm(const SeriesMatrix& m, double rho, double sigma);
/// Max over components.
double majorant_norm(std::span<const FTSeries> v, double rho, double sigma);

/// Max |f| over real x on a uniform grid and y in {-sigma, 0, sigma}^n.
/// A lower estimate of the sup on the real part of D(0, sigma).
double grid_sup(const FTSeries& f, double sigma, int points);

/// M / eps
double cauchy_bound(double M, double eps);
/// M / (1 - eps) * y_norm^3 / sigma^3
double cubic_tail_bound(double M, double eps, double y_norm, double sigma);

nlohmann::json to_json(const FTSeries& f);
FTSeries series_from_json(const nlohmann::json& j);

}  // namespace kam
