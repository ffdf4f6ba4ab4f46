#pragma once

#include <vector>

#include <Eigen/Dense>

#include "kam/cohomology.hpp"
#include "kam/diophantine.hpp"
#include "kam/fourier_taylor.hpp"

namespace kam {

/// dS(x, y) = <lambda, x> + U(x) + <V(x), y>. The linear term is kept as the
/// vector lambda because it is not periodic.
struct GeneratingFunction {
  std::vector<double> lambda;
  FTSeries U;
  std::vector<FTSeries> V;

  static GeneratingFunction zero(int n);

  int dim() const { return static_cast<int>(lambda.size()); }
  /// U + <V, y>
  FTSeries periodic_part() const;
  /// dS_x: lambda_j + U_{x_j} + sum_i y_i V_{i,x_j}
  std::vector<FTSeries> gradient_x() const;
  /// dS_y = V
  const std::vector<FTSeries>& gradient_y() const { return V; }
};

struct NormalFormDelta {
  FTSeries deltaN;
  double deltaN0 = 0.0;
  /// Majorants (rho = 0) of dN(x,0) - dN(0) and of max_i dN_{y_i}(x,0).
  double value_residual = 0.0;
  double gradient_residual = 0.0;
  double truncation_loss = 0.0;
};

double row_sum_norm(const Eigen::MatrixXd& m);

/// P^{-1} together with the perturbation bounds
/// |P^{-1}| <= |S^{-1}|/(1-h) and |P^{-1} - S^{-1}| <= h|S^{-1}|/(1-h),
/// valid when |P - S| <= h/|S^{-1}| (row-sum norms).
Eigen::MatrixXd matrix_perturb_inverse(const Eigen::MatrixXd& S, const Eigen::MatrixXd& P,
                                       double h);

/// <U_x, omega> = f(x,0) - [f(.,0)]
FTSeries solve_U(const FTSeries& f, const FrequencyVector& omega);

/// N_yy(x, 0) as an n x n matrix of x-only series.
SeriesMatrix hessian_y_at_zero(const FTSeries& N);
/// Full y-Hessian N_yy(x, y).
SeriesMatrix hessian_y(const FTSeries& N);
/// Real parts of the x-means of the entries.
Eigen::MatrixXd mean_matrix(const SeriesMatrix& m);
/// [a b] = sum_k a_k b_{-k}
cplx mean_of_product(const FTSeries& a, const FTSeries& b);

/// lambda [N_yy(.,0)] = [f_y(.,0)] - [U_x N_yy(.,0)], inverted with the
/// perturbation lemma around C at h = 1/2.
std::vector<double> solve_lambda(const FTSeries& f, const FTSeries& U, const SeriesMatrix& Nyy0,
                                 const Eigen::MatrixXd& C);

/// omega . V_x^T = f_y(x,0) - (lambda + U_x) N_yy(x,0), componentwise.
std::vector<FTSeries> solve_V(const FTSeries& f, const std::vector<double>& lambda,
                              const FTSeries& U, const SeriesMatrix& Nyy0,
                              const FrequencyVector& omega, TruncationLimits limits = {},
                              double* truncation_loss = nullptr);

/// dN = f + {N, dS}; the <lambda,x> part contributes -<N_y, lambda>.
NormalFormDelta build_delta_N(const FTSeries& f, const FTSeries& N, const GeneratingFunction& dS,
                              TruncationLimits limits = {});

struct LinearizedSolution {
  GeneratingFunction dS;
  NormalFormDelta dN;
  SolveDiagnostics diagnostics;
  double truncation_loss = 0.0;
};

/// Solves f + {N, dS} - dN = 0 for the normal form N = a + <omega,y> + O(|y|^2).
LinearizedSolution solve_linearized(const FTSeries& f, const FTSeries& N,
                                    const FrequencyVector& omega, const Eigen::MatrixXd& C,
                                    TruncationLimits limits = {});

/// Majorant of f + {N, dS} - dN on D(rho, sigma).
double linearized_residual(const FTSeries& f, const FTSeries& N, const GeneratingFunction& dS,
                           const FTSeries& deltaN, double rho, double sigma,
                           TruncationLimits limits = {});

}  // namespace kam
