#include "kam/constants.hpp"

#include <cmath>
#include <sstream>

#include "kam/common.hpp"
#include "kam/linearized.hpp"

namespace kam {

namespace {

constexpr double kRelSlack = 1e-12;

void require(bool ok, const std::string& what) {
  if (!ok) throw HypothesisError(what);
}

bool leq(double a, double b) { return a <= b * (1.0 + kRelSlack) || a <= b + kRelSlack * std::abs(b); }

}  // namespace

ConstantsChain constants_chain(int n, double tau, double gamma, const Eigen::MatrixXd& C,
                               double omega_norm, double c6, const std::string& c6_source) {
  if (n < 2) throw ValidationError("constants chain needs n >= 2");
  if (!(tau >= n - 1)) throw ValidationError("constants chain needs tau >= n-1");
  if (!(gamma > 0.0)) throw ValidationError("constants chain needs gamma > 0");
  if (!(c6 > 0.0)) throw ValidationError("constants chain needs c6 > 0");
  if (C.rows() != n || C.cols() != n) throw ValidationError("C must be n x n");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(C);
  if (!lu.isInvertible()) throw NumericalError("matrix C is singular");

  ConstantsChain k;
  k.inputs = {n, tau, gamma, C, row_sum_norm(C), row_sum_norm(lu.inverse()), omega_norm, c6,
              c6_source};
  const double Cn = k.inputs.C_norm;
  const double Ci = k.inputs.C_inv_norm;
  const double nn = n;

  k.c6 = c6;
  k.c12 = 1.0 + 4.0 * c6 * Cn / gamma;
  k.c8 = (c6 / gamma) * k.c12 * (1.0 + 4.0 * Cn * Ci);
  k.c7 = 2.0 * Ci * k.c12 + 2.0 * c6 / gamma + nn * k.c8;
  k.c9 = 1.0 + 2.0 * nn * omega_norm * Ci * k.c12;
  k.c13 = 1.0 + nn * k.c12 * (1.0 + 4.0 * Cn * Ci);
  k.c10 = 1.0 + nn * nn * Cn * (2.0 * k.c7 + k.c8) + k.c13;
  k.c11 = 64.0 * k.c10;
  k.c14 = 8.0 * nn * (k.c7 + k.c8);
  k.c15 = nn * (1.0 + k.c10) * (4.0 * k.c7 + k.c8);
  k.c17 = 1.0 / (4.0 * k.c11 * Ci);
  k.c18 = 1.0 / (16.0 * (k.c7 + k.c8));
  k.c19 = std::min(std::pow(k.q, (2.0 * tau + 2.0) / (2.0 - k.mu)), k.c15 * k.c17 / 2.0);
  k.c20 = nn * (k.c7 + k.c8) * std::exp(k.c14 * k.c17);
  k.c1 = std::min(k.c19, k.c15 / (32.0 * nn * nn * (k.c7 + k.c8) * std::exp(k.c14 * k.c17)));
  k.c2 = 1.0 / (std::pow(32.0, 2.0 * (tau + 1.0)) * k.c15);
  k.c3 = 16.0 * nn * k.c20 / k.c15;
  k.c4 = 2.0 * k.c11 / k.c15;
  k.c5 = 512.0 / 25.0;

  for (double c : {k.c1, k.c2, k.c3, k.c4, k.c5, k.c6, k.c7, k.c8, k.c9, k.c10, k.c11, k.c12,
                   k.c13, k.c14, k.c15, k.c17, k.c18, k.c19, k.c20})
    if (!(std::isfinite(c) && c > 0.0)) throw NumericalError("constants chain produced a non-positive value");
  if (!(k.c15 * k.c18 >= 1.0)) throw NumericalError("c15*c18 >= 1 fails");
  return k;
}

Schedule build_schedule(double r, double s, double theta, double tau, const ConstantsChain& chain,
                        int k_max) {
  if (k_max < 0) throw ValidationError("k_max must be >= 0");
  std::ostringstream v;
  require(s > 0.0, "domain hypothesis 0 < s fails");
  require(leq(s, std::pow(r, tau + 1.0)), "domain hypothesis s <= r^(tau+1) fails");
  require(leq(std::pow(r, tau + 1.0), 1.0), "domain hypothesis r^(tau+1) <= 1 fails");
  require(theta > 0.0, "hypothesis 0 < theta fails");
  require(leq(theta, chain.c1), "hypothesis theta <= c1 fails");

  Schedule S;
  S.q = chain.q;
  S.mu = chain.mu;
  S.delta0 = std::pow(s, 1.0 / (tau + 1.0)) / 32.0;
  S.t0 = theta;
  for (int k = 0; k <= k_max; ++k) {
    const double delta = S.delta0 * std::pow(S.q, k);
    const double sk = std::pow(delta, tau + 1.0);
    const double tk = std::pow(S.t0, std::pow(S.mu, k));
    S.delta.push_back(delta);
    S.s.push_back(sk);
    S.r.push_back(0.75 * r + 8.0 * delta);
    S.t.push_back(tk);
    S.M.push_back(sk * sk * tk / chain.c15);
  }

  // Mesh of the sequences.
  double sum = 0.0;
  for (int k = 0; k <= k_max; ++k) {
    const std::string at = " at k=" + std::to_string(k);
    // r_k - 3r/4 = 8 delta_k; the sum itself rounds to 3r/4 once delta_k < ulp(r).
    require(S.delta[k] > 0.0 && S.r[k] >= 0.75 * r, "mesh r_k > 3r/4 fails" + at);
    require(S.delta[k] < S.r[k] / 6.0, "mesh delta_k < r_k/6 fails" + at);
    require(leq(S.s[k], std::pow(S.delta[k], tau + 1.0)), "mesh s_k <= delta_k^(tau+1) fails" + at);
    require(leq(std::pow(S.delta[k], tau + 1.0), 1.0), "mesh delta_k^(tau+1) <= 1 fails" + at);
    require(leq(S.M[k], chain.c18 * S.s[k] * S.s[k]), "M_k <= c18 s_k^2 fails" + at);
    if (k < k_max) {
      require(leq(S.r[k + 1], S.r[k] - 6.0 * S.delta[k]), "mesh r_{k+1} <= r_k - 6 delta_k fails" + at);
      require(leq(S.s[k + 1], S.s[k] / 8.0), "mesh s_{k+1} <= s_k/8 fails" + at);
      require(leq(chain.c15 * S.M[k] * S.M[k] / (S.s[k] * S.s[k]), S.M[k + 1]),
              "c15 M_k^2/s_k^2 <= M_{k+1} fails" + at);
    }
    sum += S.M[k] / (S.s[k] * S.s[k]);
  }
  require(leq(sum, 2.0 * S.t0 / chain.c15), "sum M_k/s_k^2 <= 2 t0/c15 fails");
  require(leq(S.r[0], r), "start r_0 <= r fails");
  require(leq(S.s[0], s), "start s_0 <= s fails");
  require(leq(chain.c2 * s * s * theta, S.M[0]), "start M_0 >= c2 s^2 theta fails");
  return S;
}

TailCheck series_tail_check(double t, double m, int terms) {
  if (!(t > 0.0 && t < 1.0)) throw ValidationError("series_tail_check needs 0 < t < 1");
  if (!(m > 1.0)) throw ValidationError("series_tail_check needs m > 1");
  TailCheck out;
  for (int k = 0; k < terms; ++k) out.lhs += std::pow(t, std::pow(m, k));
  out.rhs = t / (1.0 - std::pow(t, m - 1.0));
  out.holds = out.lhs <= out.rhs;
  return out;
}

nlohmann::json to_json(const ConstantsChain& k) {
  nlohmann::json C = nlohmann::json::array();
  for (int i = 0; i < k.inputs.C.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < k.inputs.C.cols(); ++j) row.push_back(k.inputs.C(i, j));
    C.push_back(row);
  }
  return {{"inputs",
           {{"n", k.inputs.n},
            {"tau", k.inputs.tau},
            {"gamma", k.inputs.gamma},
            {"C", C},
            {"C_norm", k.inputs.C_norm},
            {"C_inv_norm", k.inputs.C_inv_norm},
            {"omega_norm", k.inputs.omega_norm},
            {"c6_source", k.inputs.c6_source}}},
          {"c1", k.c1},   {"c2", k.c2},   {"c3", k.c3},   {"c4", k.c4},   {"c5", k.c5},
          {"c6", k.c6},   {"c7", k.c7},   {"c8", k.c8},   {"c9", k.c9},   {"c10", k.c10},
          {"c11", k.c11}, {"c12", k.c12}, {"c13", k.c13}, {"c14", k.c14}, {"c15", k.c15},
          {"c17", k.c17}, {"c18", k.c18}, {"c19", k.c19}, {"c20", k.c20}, {"q", k.q},
          {"mu", k.mu}};
}

nlohmann::json to_json(const Schedule& S) {
  return {{"q", S.q},         {"mu", S.mu}, {"delta0", S.delta0}, {"t0", S.t0},
          {"r", S.r},         {"delta", S.delta}, {"s", S.s},     {"M", S.M},
          {"t", S.t}};
}

}  // namespace kam
