#include "kam/fourier_taylor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kam/spectral_grid.hpp"

namespace kam {

namespace {

constexpr cplx kI(0.0, 1.0);

Lattice negated(const Lattice& k) {
  Lattice m(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) m[i] = -k[i];
  return m;
}

Lattice plus(const Lattice& a, const Lattice& b) {
  Lattice c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
  return c;
}

void require_same_dim(const FTSeries& f, const FTSeries& g) {
  if (f.dim() != g.dim())
    throw ValidationError("series dimension mismatch: " + std::to_string(f.dim()) + " vs " +
                          std::to_string(g.dim()));
}

// Sparse inputs are convolved term by term; the transform path takes over
// once the pair count gets large.
constexpr std::size_t kDirectProductLimit = 1u << 14;

Product multiply_direct(const FTSeries& f, const FTSeries& g, int K_out, int D_out) {
  Product out{FTSeries(f.dim(), K_out, D_out, f.real_valued() && g.real_valued()), 0.0};
  std::map<SeriesKey, cplx> dropped;
  for (const auto& [a, ca] : f.terms()) {
    for (const auto& [b, cb] : g.terms()) {
      SeriesKey key{plus(a.k, b.k), plus(a.alpha, b.alpha)};
      if (norm_inf(key.k) <= K_out && norm_1(key.alpha) <= D_out)
        out.value.add(key.k, key.alpha, ca * cb);
      else
        dropped[key] += ca * cb;
    }
  }
  for (const auto& [key, c] : dropped) out.truncation_loss += std::abs(c);
  if (out.value.real_valued()) out.value.symmetrize();
  return out;
}

Product multiply_spectral(const FTSeries& f, const FTSeries& g, int K_out, int D_out) {
  const int n = f.dim();
  const int support = f.max_mode() + g.max_mode();
  const SpectralGrid grid(n, next_pow2(2 * support + 1));
  const auto fs = nodal_slices(f, grid);
  const auto gs = nodal_slices(g, grid);
  NodalSlices prod;
  for (const auto& [a, fa] : fs) {
    for (const auto& [b, gb] : gs) {
      auto& acc = prod[plus(a, b)];
      if (acc.empty()) acc.assign(grid.size(), cplx(0.0));
      for (std::size_t s = 0; s < acc.size(); ++s) acc[s] += fa[s] * gb[s];
    }
  }
  const bool real = f.real_valued() && g.real_valued();
  Product out{FTSeries(n, K_out, D_out, real), 0.0};
  std::vector<cplx> work;
  for (auto& [alpha, values] : prod) {
    work = std::move(values);
    grid.to_coefficients(work);
    const bool keep_slice = norm_1(alpha) <= D_out;
    for (std::size_t s = 0; s < work.size(); ++s) {
      if (work[s] == cplx(0.0)) continue;
      Lattice k = grid.mode_at(s);
      // Slots beyond the exact product support hold only roundoff.
      if (norm_inf(k) > support) continue;
      if (keep_slice && norm_inf(k) <= K_out)
        out.value.add(k, alpha, work[s]);
      else
        out.truncation_loss += std::abs(work[s]);
    }
  }
  if (real) out.value.symmetrize();
  return out;
}

}  // namespace

FTSeries::FTSeries(int n, int K, int D, bool real_valued) : n_(n), K_(K), D_(D), real_(real_valued) {
  if (n < 1) throw ValidationError("series dimension must be >= 1");
  if (K < 0 || D < 0) throw ValidationError("series cutoffs must be nonnegative");
}

FTSeries FTSeries::constant(int n, cplx value) {
  FTSeries f(n, 0, 0, value.imag() == 0.0);
  f.set(Lattice(n, 0), Lattice(n, 0), value);
  return f;
}

FTSeries FTSeries::monomial(int n, const Lattice& alpha, cplx value) {
  FTSeries f(n, 0, norm_1(alpha), value.imag() == 0.0);
  f.set(Lattice(n, 0), alpha, value);
  return f;
}

FTSeries FTSeries::cosine(int n, const Lattice& k, double amplitude) {
  FTSeries f(n, norm_inf(k), 0, true);
  const Lattice zero(n, 0);
  if (norm_inf(k) == 0) {
    f.set(k, zero, amplitude);
    return f;
  }
  f.set(k, zero, 0.5 * amplitude);
  f.set(negated(k), zero, 0.5 * amplitude);
  return f;
}

FTSeries FTSeries::sine(int n, const Lattice& k, double amplitude) {
  FTSeries f(n, norm_inf(k), 0, true);
  if (norm_inf(k) == 0) return f;
  const Lattice zero(n, 0);
  f.set(k, zero, cplx(0.0, -0.5 * amplitude));
  f.set(negated(k), zero, cplx(0.0, 0.5 * amplitude));
  return f;
}

void FTSeries::check_key(const Lattice& k, const Lattice& alpha) const {
  if (static_cast<int>(k.size()) != n_ || static_cast<int>(alpha.size()) != n_)
    throw ValidationError("key length does not match series dimension");
  if (norm_inf(k) > K_)
    throw ValidationError("mode " + format_lattice(k) + " exceeds cutoff K=" + std::to_string(K_));
  for (int a : alpha)
    if (a < 0) throw ValidationError("negative y-exponent in " + format_lattice(alpha));
  if (norm_1(alpha) > D_)
    throw ValidationError("y-degree of " + format_lattice(alpha) +
                          " exceeds D=" + std::to_string(D_));
}

cplx FTSeries::coeff(const Lattice& k, const Lattice& alpha) const {
  auto it = terms_.find(SeriesKey{k, alpha});
  return it == terms_.end() ? cplx(0.0) : it->second;
}

void FTSeries::set(const Lattice& k, const Lattice& alpha, cplx value) {
  check_key(k, alpha);
  SeriesKey key{k, alpha};
  if (std::abs(value) <= kDropTolerance)
    terms_.erase(key);
  else
    terms_[key] = value;
}

void FTSeries::add(const Lattice& k, const Lattice& alpha, cplx value) {
  if (value == cplx(0.0)) return;
  check_key(k, alpha);
  auto [it, inserted] = terms_.try_emplace(SeriesKey{k, alpha}, value);
  if (!inserted) {
    it->second += value;
    if (std::abs(it->second) <= kDropTolerance) terms_.erase(it);
  }
}

int FTSeries::max_mode() const {
  int m = 0;
  for (const auto& [key, c] : terms_) m = std::max(m, norm_inf(key.k));
  return m;
}

int FTSeries::max_degree() const {
  int m = 0;
  for (const auto& [key, c] : terms_) m = std::max(m, norm_1(key.alpha));
  return m;
}

FTSeries FTSeries::truncated(int K, int D) const {
  FTSeries out(n_, K, D, real_);
  for (const auto& [key, c] : terms_)
    if (norm_inf(key.k) <= K && norm_1(key.alpha) <= D) out.terms_.emplace(key, c);
  return out;
}

FTSeries FTSeries::widened(int K, int D) const {
  FTSeries out = *this;
  out.K_ = std::max(K_, K);
  out.D_ = std::max(D_, D);
  return out;
}

double FTSeries::hermitian_defect() const {
  double worst = 0.0;
  for (const auto& [key, c] : terms_) {
    cplx mirror = coeff(negated(key.k), key.alpha);
    worst = std::max(worst, std::abs(c - std::conj(mirror)));
  }
  return worst;
}

void FTSeries::symmetrize() {
  Map sym;
  for (const auto& [key, c] : terms_) {
    SeriesKey mirror{negated(key.k), key.alpha};
    cplx avg = 0.5 * (c + std::conj(coeff(mirror.k, mirror.alpha)));
    if (std::abs(avg) > kDropTolerance) {
      sym[key] = avg;
      sym[mirror] = std::conj(avg);
    }
  }
  terms_ = std::move(sym);
  real_ = true;
}

FTSeries& FTSeries::operator+=(const FTSeries& other) {
  if (n_ == 0) {
    *this = other;
    return *this;
  }
  if (other.n_ == 0) return *this;
  require_same_dim(*this, other);
  K_ = std::max(K_, other.K_);
  D_ = std::max(D_, other.D_);
  real_ = real_ && other.real_;
  for (const auto& [key, c] : other.terms_) add(key.k, key.alpha, c);
  return *this;
}

FTSeries& FTSeries::operator-=(const FTSeries& other) {
  if (other.n_ == 0) return *this;
  if (n_ == 0) *this = FTSeries(other.n_, other.K_, other.D_, other.real_);
  require_same_dim(*this, other);
  K_ = std::max(K_, other.K_);
  D_ = std::max(D_, other.D_);
  real_ = real_ && other.real_;
  for (const auto& [key, c] : other.terms_) add(key.k, key.alpha, -c);
  return *this;
}

FTSeries& FTSeries::operator*=(cplx scale) {
  if (scale == cplx(0.0)) {
    terms_.clear();
    return *this;
  }
  if (scale.imag() != 0.0) real_ = false;
  for (auto it = terms_.begin(); it != terms_.end();) {
    it->second *= scale;
    if (std::abs(it->second) <= kDropTolerance)
      it = terms_.erase(it);
    else
      ++it;
  }
  return *this;
}

cplx eval(const FTSeries& f, std::span<const cplx> x, std::span<const cplx> y) {
  const int n = f.dim();
  if (static_cast<int>(x.size()) != n || static_cast<int>(y.size()) != n)
    throw ValidationError("evaluation point has wrong dimension");
  const int D = f.degree();
  std::vector<std::vector<cplx>> ypow(n, std::vector<cplx>(D + 1, 1.0));
  for (int j = 0; j < n; ++j)
    for (int a = 1; a <= D; ++a) ypow[j][a] = ypow[j][a - 1] * y[j];
  cplx sum = 0.0;
  for (const auto& [key, c] : f.terms()) {
    cplx phase = 0.0;
    cplx mono = 1.0;
    for (int j = 0; j < n; ++j) {
      phase += static_cast<double>(key.k[j]) * x[j];
      mono *= ypow[j][key.alpha[j]];
    }
    sum += c * std::exp(kI * phase) * mono;
  }
  return sum;
}

cplx eval(const FTSeries& f, std::span<const double> x, std::span<const double> y) {
  std::vector<cplx> xc(x.begin(), x.end());
  std::vector<cplx> yc(y.begin(), y.end());
  return eval(f, xc, yc);
}

Product multiply(const FTSeries& f, const FTSeries& g, TruncationLimits limits) {
  require_same_dim(f, g);
  const int K_out = std::min(f.cutoff() + g.cutoff(), limits.K_max);
  const int D_out = std::min(f.degree() + g.degree(), limits.D_max);
  if (f.empty() || g.empty())
    return {FTSeries(f.dim(), K_out, D_out, f.real_valued() && g.real_valued()), 0.0};
  if (f.size() * g.size() <= kDirectProductLimit) return multiply_direct(f, g, K_out, D_out);
  return multiply_spectral(f, g, K_out, D_out);
}

FTSeries mul(const FTSeries& f, const FTSeries& g, TruncationLimits limits) {
  return multiply(f, g, limits).value;
}

FTSeries partial_x(const FTSeries& f, int j) {
  if (j < 0 || j >= f.dim()) throw ValidationError("axis out of range");
  FTSeries out(f.dim(), f.cutoff(), f.degree(), f.real_valued());
  for (const auto& [key, c] : f.terms())
    if (key.k[j] != 0) out.set(key.k, key.alpha, c * kI * static_cast<double>(key.k[j]));
  return out;
}

FTSeries partial_y(const FTSeries& f, int j) {
  if (j < 0 || j >= f.dim()) throw ValidationError("axis out of range");
  FTSeries out(f.dim(), f.cutoff(), std::max(f.degree() - 1, 0), f.real_valued());
  for (const auto& [key, c] : f.terms()) {
    if (key.alpha[j] == 0) continue;
    Lattice alpha = key.alpha;
    --alpha[j];
    out.set(key.k, alpha, c * static_cast<double>(key.alpha[j]));
  }
  return out;
}

FTSeries mean_x(const FTSeries& f) {
  FTSeries out(f.dim(), 0, f.degree(), f.real_valued());
  const Lattice zero(f.dim(), 0);
  for (const auto& [key, c] : f.terms())
    if (key.k == zero) out.set(key.k, key.alpha, c);
  return out;
}

FTSeries y_slice(const FTSeries& f, const Lattice& alpha) {
  FTSeries out(f.dim(), f.cutoff(), 0, f.real_valued());
  const Lattice zero(f.dim(), 0);
  for (const auto& [key, c] : f.terms())
    if (key.alpha == alpha) out.set(key.k, zero, c);
  return out;
}

FTSeries at_y_zero(const FTSeries& f) { return y_slice(f, Lattice(f.dim(), 0)); }

cplx constant_term(const FTSeries& f) {
  return f.coeff(Lattice(f.dim(), 0), Lattice(f.dim(), 0));
}

Product poisson(const FTSeries& f, const FTSeries& g, TruncationLimits limits) {
  require_same_dim(f, g);
  Product out;
  for (int j = 0; j < f.dim(); ++j) {
    auto a = multiply(partial_x(f, j), partial_y(g, j), limits);
    auto b = multiply(partial_y(f, j), partial_x(g, j), limits);
    out.value += a.value;
    out.value -= b.value;
    out.truncation_loss += a.truncation_loss + b.truncation_loss;
  }
  if (out.value.dim() == 0) out.value = FTSeries(f.dim(), 0, 0, true);
  return out;
}

double majorant_norm(const FTSeries& f, double rho, double sigma) {
  if (rho < 0.0 || sigma < 0.0) throw ValidationError("majorant_norm needs rho, sigma >= 0");
  double sum = 0.0;
  for (const auto& [key, c] : f.terms())
    sum += std::abs(c) * std::exp(norm_1(key.k) * rho) * std::pow(sigma, norm_1(key.alpha));
  return sum;
}

double majorant_norm(const SeriesMatrix& m, double rho, double sigma) {
  double worst = 0.0;
  for (const auto& row : m) {
    double sum = 0.0;
    for (const auto& entry : row) sum += majorant_norm(entry, rho, sigma);
    worst = std::max(worst, sum);
  }
  return worst;
}

double majorant_norm(std::span<const FTSeries> v, double rho, double sigma) {
  double worst = 0.0;
  for (const auto& f : v) worst = std::max(worst, majorant_norm(f, rho, sigma));
  return worst;
}

double grid_sup(const FTSeries& f, double sigma, int points) {
  const int n = f.dim();
  const SpectralGrid grid(n, points);
  std::vector<double> y(n);
  std::vector<int> corner(n, -1);
  double worst = 0.0;
  for (std::size_t s = 0; s < grid.size(); ++s) {
    const auto x = grid.node(s);
    std::fill(corner.begin(), corner.end(), -1);
    while (true) {
      for (int j = 0; j < n; ++j) y[j] = corner[j] * sigma;
      worst = std::max(worst, std::abs(eval(f, x, y)));
      int j = n - 1;
      while (j >= 0 && corner[j] == 1) corner[j--] = -1;
      if (j < 0) break;
      ++corner[j];
    }
  }
  return worst;
}

double cauchy_bound(double M, double eps) {
  if (eps <= 0.0) throw ValidationError("cauchy_bound needs eps > 0");
  return M / eps;
}

double cubic_tail_bound(double M, double eps, double y_norm, double sigma) {
  if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("cubic_tail_bound needs 0 < eps < 1");
  if (y_norm < 0.0 || y_norm > eps * sigma)
    throw ValidationError("cubic_tail_bound needs 0 <= |y| <= eps*sigma");
  const double ratio = y_norm / sigma;
  return M / (1.0 - eps) * ratio * ratio * ratio;
}

nlohmann::json to_json(const FTSeries& f) {
  nlohmann::json coeffs = nlohmann::json::array();
  for (const auto& [key, c] : f.terms())
    coeffs.push_back({key.k, key.alpha, c.real(), c.imag()});
  return {{"n", f.dim()},
          {"K", f.cutoff()},
          {"D", f.degree()},
          {"real_valued", f.real_valued()},
          {"coeffs", coeffs}};
}

FTSeries series_from_json(const nlohmann::json& j) {
  try {
    for (const auto& [name, value] : j.items())
      if (name != "n" && name != "K" && name != "D" && name != "real_valued" && name != "coeffs")
        throw ValidationError("unknown series field '" + name + "'");
    FTSeries f(j.at("n").get<int>(), j.at("K").get<int>(), j.at("D").get<int>(),
               j.value("real_valued", true));
    for (const auto& entry : j.at("coeffs")) {
      if (!entry.is_array() || entry.size() != 4)
        throw ValidationError("series coefficient entries are [k, alpha, re, im]");
      f.add(entry[0].get<Lattice>(), entry[1].get<Lattice>(),
            cplx(entry[2].get<double>(), entry[3].get<double>()));
    }
    if (f.real_valued() && f.hermitian_defect() > 1e-14 * (1.0 + majorant_norm(f, 0.0, 1.0)))
      throw ValidationError("series marked real_valued is not Hermitian-symmetric");
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed series JSON: ") + e.what());
  }
}

}  // namespace kam
