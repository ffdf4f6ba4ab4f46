#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace kam {

struct ChainInputs {
  int n = 2;
  double tau = 1.0;
  double gamma = 0.0;
  Eigen::MatrixXd C;
  double C_norm = 0.0;
  double C_inv_norm = 0.0;
  double omega_norm = 0.0;
  double c6 = 0.0;
  std::string c6_source = "config";
};

/// Explicit constants of the iteration. c9 stands for the tilde constant
/// bounding |dN(0)| s / M.
struct ConstantsChain {
  ChainInputs inputs;
  double c1 = 0, c2 = 0, c3 = 0, c4 = 0, c5 = 0;
  double c6 = 0, c7 = 0, c8 = 0, c9 = 0, c10 = 0, c11 = 0, c12 = 0, c13 = 0, c14 = 0, c15 = 0;
  double c17 = 0, c18 = 0, c19 = 0, c20 = 0;
  /// Schedule parameters the chain was built for.
  double q = 0.25;
  double mu = 1.5;
};

ConstantsChain constants_chain(int n, double tau, double gamma, const Eigen::MatrixXd& C,
                               double omega_norm, double c6,
                               const std::string& c6_source = "config");

struct Schedule {
  double q = 0.25;
  double mu = 1.5;
  double delta0 = 0.0;
  double t0 = 0.0;
  std::vector<double> r, delta, s, M, t;
};

/// Sequences delta_k = q^k delta0, s_k = delta_k^{tau+1}, r_k = 3r/4 + 8 delta_k,
/// t_k = t0^{mu^k}, M_k = s_k^2 t_k / c15 with delta0 = s^{1/(tau+1)}/32 and
/// t0 = theta, for k = 0..k_max. Throws HypothesisError naming the failed
/// inequality.
Schedule build_schedule(double r, double s, double theta, double tau, const ConstantsChain& chain,
                        int k_max);

/// Partial sum of t^{m^k}, k < terms, against t / (1 - t^{m-1}).
struct TailCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};
TailCheck series_tail_check(double t, double m, int terms);

nlohmann::json to_json(const ConstantsChain& chain);
nlohmann::json to_json(const Schedule& schedule);

}  // namespace kam
