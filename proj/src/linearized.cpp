#include "kam/linearized.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kam {

namespace {

constexpr double kLambdaMeanTolerance = 1e-11;
constexpr double kNormalFormTolerance = 1e-10;
constexpr double kConstantTolerance = 1e-11;
constexpr double kLemmaSlack = 1e-12;

Lattice unit(int n, int j) {
  Lattice e(n, 0);
  e[j] = 1;
  return e;
}

}  // namespace

GeneratingFunction GeneratingFunction::zero(int n) {
  return {std::vector<double>(n, 0.0), FTSeries(n, 0, 0),
          std::vector<FTSeries>(n, FTSeries(n, 0, 0))};
}

FTSeries GeneratingFunction::periodic_part() const {
  const int n = dim();
  FTSeries S = U.widened(0, 1);
  for (int i = 0; i < n; ++i) {
    FTSeries yi = FTSeries::monomial(n, unit(n, i));
    S += mul(V[i], yi, {std::max(V[i].cutoff(), 0), 1});
  }
  return S;
}

std::vector<FTSeries> GeneratingFunction::gradient_x() const {
  const int n = dim();
  int K = U.cutoff();
  for (const auto& v : V) K = std::max(K, v.cutoff());
  std::vector<FTSeries> out;
  for (int j = 0; j < n; ++j) {
    FTSeries g(n, K, 1);
    g += partial_x(U, j);
    g += FTSeries::constant(n, lambda[j]);
    for (int i = 0; i < n; ++i) {
      const FTSeries dv = partial_x(V[i], j);
      for (const auto& [key, c] : dv.terms()) g.add(key.k, unit(n, i), c);
    }
    out.push_back(std::move(g));
  }
  return out;
}

double row_sum_norm(const Eigen::MatrixXd& m) {
  return m.rows() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

Eigen::MatrixXd matrix_perturb_inverse(const Eigen::MatrixXd& S, const Eigen::MatrixXd& P,
                                       double h) {
  if (!(h > 0.0 && h < 1.0)) throw ValidationError("perturbation parameter h must lie in (0,1)");
  if (S.rows() != S.cols() || P.rows() != S.rows() || P.cols() != S.cols())
    throw ValidationError("matrix_perturb_inverse needs square matrices of equal size");
  Eigen::FullPivLU<Eigen::MatrixXd> lu_s(S);
  if (!lu_s.isInvertible()) throw NumericalError("reference matrix S is singular");
  const Eigen::MatrixXd Sinv = lu_s.inverse();
  const double sinv = row_sum_norm(Sinv);
  const double gap = row_sum_norm(P - S);
  if (gap > h / sinv) {
    std::ostringstream msg;
    msg << "perturbation hypothesis |P-S| <= h/|S^-1| fails: |P-S|*|S^-1| = " << gap * sinv
        << " > h = " << h;
    throw HypothesisError(msg.str());
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu_p(P);
  if (!lu_p.isInvertible()) throw NumericalError("perturbed matrix P is singular");
  const Eigen::MatrixXd Pinv = lu_p.inverse();
  const double bound_inv = sinv / (1.0 - h);
  const double bound_diff = h * sinv / (1.0 - h);
  if (row_sum_norm(Pinv) > bound_inv * (1.0 + kLemmaSlack) ||
      row_sum_norm(Pinv - Sinv) > bound_diff * (1.0 + kLemmaSlack) + kLemmaSlack * sinv)
    throw NumericalError("computed inverse violates the perturbation bounds");
  return Pinv;
}

FTSeries solve_U(const FTSeries& f, const FrequencyVector& omega) {
  FTSeries g = at_y_zero(f);
  const Lattice zero(f.dim(), 0);
  g.set(zero, zero, 0.0);
  return solve(g, omega);
}

SeriesMatrix hessian_y(const FTSeries& N) {
  const int n = N.dim();
  SeriesMatrix H(n, std::vector<FTSeries>(n));
  for (int i = 0; i < n; ++i) {
    FTSeries Ni = partial_y(N, i);
    for (int j = 0; j < n; ++j) H[i][j] = partial_y(Ni, j);
  }
  return H;
}

SeriesMatrix hessian_y_at_zero(const FTSeries& N) {
  const int n = N.dim();
  SeriesMatrix H(n, std::vector<FTSeries>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Lattice alpha(n, 0);
      ++alpha[i];
      ++alpha[j];
      const double factor = (i == j) ? 2.0 : 1.0;
      H[i][j] = y_slice(N, alpha) * cplx(factor);
    }
  }
  return H;
}

Eigen::MatrixXd mean_matrix(const SeriesMatrix& m) {
  const int n = static_cast<int>(m.size());
  Eigen::MatrixXd out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = constant_term(m[i][j]).real();
  return out;
}

cplx mean_of_product(const FTSeries& a, const FTSeries& b) {
  cplx sum = 0.0;
  const int n = a.dim();
  const Lattice zero(n, 0);
  for (const auto& [key, c] : a.terms()) {
    if (key.alpha != zero) continue;
    Lattice mk(n);
    for (int j = 0; j < n; ++j) mk[j] = -key.k[j];
    sum += c * b.coeff(mk, zero);
  }
  return sum;
}

std::vector<double> solve_lambda(const FTSeries& f, const FTSeries& U, const SeriesMatrix& Nyy0,
                                 const Eigen::MatrixXd& C) {
  const int n = f.dim();
  Eigen::RowVectorXd b(n);
  for (int i = 0; i < n; ++i) {
    double value = f.coeff(Lattice(n, 0), unit(n, i)).real();
    for (int j = 0; j < n; ++j) value -= mean_of_product(partial_x(U, j), Nyy0[j][i]).real();
    b(i) = value;
  }
  const Eigen::MatrixXd Pinv = matrix_perturb_inverse(C, mean_matrix(Nyy0), 0.5);
  const Eigen::RowVectorXd lambda = b * Pinv;
  return std::vector<double>(lambda.data(), lambda.data() + n);
}

std::vector<FTSeries> solve_V(const FTSeries& f, const std::vector<double>& lambda,
                              const FTSeries& U, const SeriesMatrix& Nyy0,
                              const FrequencyVector& omega, TruncationLimits limits,
                              double* truncation_loss) {
  const int n = f.dim();
  std::vector<FTSeries> rhs;
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    FTSeries r = y_slice(f, unit(n, i));
    double scale = majorant_norm(r, 0.0, 0.0);
    for (int j = 0; j < n; ++j) {
      FTSeries lam = Nyy0[j][i] * cplx(lambda[j]);
      auto prod = multiply(partial_x(U, j), Nyy0[j][i], limits);
      scale += majorant_norm(lam, 0.0, 0.0) + majorant_norm(prod.value, 0.0, 0.0);
      loss += prod.truncation_loss;
      r -= lam;
      r -= prod.value;
    }
    const Lattice zero(n, 0);
    const cplx mean = r.coeff(zero, zero);
    if (std::abs(mean) > kLambdaMeanTolerance * scale)
      throw NumericalError("right-hand side for V has mean " + std::to_string(std::abs(mean)) +
                           "; lambda is inconsistent");
    r.set(zero, zero, 0.0);
    rhs.push_back(r.truncated(std::min(r.cutoff(), limits.K_max), 0));
  }
  if (truncation_loss) *truncation_loss = loss;
  return solve_vector(rhs, omega);
}

NormalFormDelta build_delta_N(const FTSeries& f, const FTSeries& N, const GeneratingFunction& dS,
                              TruncationLimits limits) {
  const int n = f.dim();
  const Lattice zero(n, 0);
  auto bracket = poisson(N, dS.periodic_part(), limits);
  NormalFormDelta out;
  out.truncation_loss = bracket.truncation_loss;
  FTSeries dN = f;
  dN += bracket.value;
  std::vector<double> omega(n);
  for (int j = 0; j < n; ++j) {
    FTSeries Ny = partial_y(N, j);
    dN -= Ny * cplx(dS.lambda[j]);
    omega[j] = N.coeff(zero, unit(n, j)).real();
  }
  dN = dN.truncated(std::min(dN.cutoff(), limits.K_max), std::min(dN.degree(), limits.D_max));

  const double scale = majorant_norm(f, 0.0, 1.0);
  out.deltaN0 = constant_term(dN).real();
  FTSeries off = at_y_zero(dN);
  off.set(zero, zero, 0.0);
  out.value_residual = majorant_norm(off, 0.0, 0.0);
  for (int j = 0; j < n; ++j)
    out.gradient_residual =
        std::max(out.gradient_residual, majorant_norm(y_slice(dN, unit(n, j)), 0.0, 0.0));
  if (out.value_residual > kNormalFormTolerance * scale ||
      out.gradient_residual > kNormalFormTolerance * scale) {
    std::ostringstream msg;
    msg << "normal-form increment is not of the form const + O(|y|^2): residuals "
        << out.value_residual << ", " << out.gradient_residual << " at scale " << scale;
    throw NumericalError(msg.str());
  }
  double expected = constant_term(f).real();
  for (int j = 0; j < n; ++j) expected -= dS.lambda[j] * omega[j];
  if (std::abs(out.deltaN0 - expected) >
      kConstantTolerance * std::max({scale, std::abs(expected), 1e-300}))
    throw NumericalError("constant term of the normal-form increment disagrees with [f] - <lambda,omega>");
  out.deltaN = std::move(dN);
  return out;
}

LinearizedSolution solve_linearized(const FTSeries& f, const FTSeries& N,
                                    const FrequencyVector& omega, const Eigen::MatrixXd& C,
                                    TruncationLimits limits) {
  LinearizedSolution out;
  const SeriesMatrix Nyy0 = hessian_y_at_zero(N);
  FTSeries g = at_y_zero(f);
  const Lattice zero(f.dim(), 0);
  g.set(zero, zero, 0.0);
  SolveDiagnostics dU;
  out.dS.U = solve(g, omega, &dU);
  out.dS.lambda = solve_lambda(f, out.dS.U, Nyy0, C);
  double loss = 0.0;
  out.dS.V = solve_V(f, out.dS.lambda, out.dS.U, Nyy0, omega, limits, &loss);
  out.diagnostics = dU;
  out.dN = build_delta_N(f, N, out.dS, limits);
  out.truncation_loss = loss + out.dN.truncation_loss;
  return out;
}

double linearized_residual(const FTSeries& f, const FTSeries& N, const GeneratingFunction& dS,
                           const FTSeries& deltaN, double rho, double sigma,
                           TruncationLimits limits) {
  FTSeries r = f;
  r += poisson(N, dS.periodic_part(), limits).value;
  for (int j = 0; j < f.dim(); ++j) r -= partial_y(N, j) * cplx(dS.lambda[j]);
  r -= deltaN;
  return majorant_norm(r, rho, sigma);
}

}  // namespace kam
