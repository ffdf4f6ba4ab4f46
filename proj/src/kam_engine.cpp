#include "kam/kam_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "kam/cohomology.hpp"
#include "kam/rng.hpp"
#include "kam/spectral_grid.hpp"

namespace kam {

namespace {

constexpr double kDecompositionTolerance = 1e-12;
constexpr double kStructureTolerance = 1e-10;
constexpr double kRelSlack = 1e-12;

Lattice unit(int n, int j) {
  Lattice e(n, 0);
  e[j] = 1;
  return e;
}

SeriesMatrix minus_constant(SeriesMatrix m, const Eigen::MatrixXd& C) {
  const int n = static_cast<int>(m.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m[i][j] -= FTSeries::constant(n, C(i, j));
  return m;
}

SeriesMatrix difference(SeriesMatrix a, const SeriesMatrix& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] -= b[i][j];
  return a;
}

// Drops alpha = 0, k != 0 and every |alpha| = 1 coefficient.
FTSeries project_normal_form(const FTSeries& dN) {
  FTSeries out(dN.dim(), dN.cutoff(), dN.degree(), dN.real_valued());
  for (const auto& [key, c] : dN.terms()) {
    const int deg = norm_1(key.alpha);
    if (deg == 1) continue;
    if (deg == 0 && norm_inf(key.k) != 0) continue;
    out.set(key.k, key.alpha, c);
  }
  return out;
}

// Terms of degree <= 2 in y.
FTSeries quadratic_part(const FTSeries& f) {
  FTSeries out(f.dim(), f.cutoff(), f.degree(), f.real_valued());
  for (const auto& [key, c] : f.terms())
    if (norm_1(key.alpha) <= 2) out.set(key.k, key.alpha, c);
  return out;
}

double eval_real(const FTSeries& f, const std::vector<double>& x, const std::vector<double>& y) {
  return eval(f, std::span<const double>(x), std::span<const double>(y)).real();
}

EstimateAudit audit(std::string name, double measured, double bound) {
  return {std::move(name), measured, bound, measured <= bound * (1.0 + kRelSlack)};
}

std::vector<double> random_angles(SplitMix64& rng, int n) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return x;
}

}  // namespace

FTSeries HamiltonianDecomposition::normal_part() const {
  const int n = dim();
  int K = 0;
  for (const auto& row : Q)
    for (const auto& q : row) K = std::max(K, q.cutoff());
  FTSeries N(n, K, 2);
  const Lattice zero(n, 0);
  N.set(zero, zero, a);
  for (int j = 0; j < n; ++j) N.set(zero, unit(n, j), omega.omega[j]);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Lattice alpha(n, 0);
      ++alpha[i];
      ++alpha[j];
      for (const auto& [key, c] : Q[i][j].terms()) N.add(key.k, alpha, 0.5 * c);
    }
  return N;
}

void HamiltonianDecomposition::validate() const {
  const int n = dim();
  omega.validate();
  if (static_cast<int>(Q.size()) != n) throw ValidationError("Q must be n x n");
  for (const auto& row : Q)
    if (static_cast<int>(row.size()) != n) throw ValidationError("Q must be n x n");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (!Q[i][j].empty() && Q[i][j].dim() != n) throw ValidationError("Q entries must have dimension n");
      if (Q[i][j].max_degree() > 0) throw ValidationError("Q must depend on x only");
      const FTSeries gap = Q[i][j] - Q[j][i];
      if (majorant_norm(gap, 0.0, 0.0) != 0.0) throw ValidationError("Q must be symmetric");
    }
  if (!R.empty() && R.dim() != n) throw ValidationError("R must have dimension n");
  const FTSeries gap = H - normal_part() - R;
  const double scale = std::max(majorant_norm(H, 0.0, 1.0), 1e-300);
  if (majorant_norm(gap, 0.0, 1.0) > kDecompositionTolerance * scale)
    throw ValidationError("H differs from a + <omega,y> + 1/2 <yQ,y> + R");
  if (!(domain.s > 0.0 && domain.s <= std::pow(domain.r, omega.tau + 1.0) &&
        std::pow(domain.r, omega.tau + 1.0) <= 1.0))
    throw ValidationError("domain must satisfy 0 < s <= r^(tau+1) <= 1");
}

HamiltonianDecomposition HamiltonianDecomposition::assemble(double a, FrequencyVector omega,
                                                            SeriesMatrix Q, FTSeries R,
                                                            DomainSpec domain) {
  HamiltonianDecomposition h;
  h.a = a;
  h.omega = std::move(omega);
  h.Q = std::move(Q);
  h.R = std::move(R);
  h.domain = domain;
  h.H = h.normal_part();
  if (!h.R.empty()) h.H += h.R;
  return h;
}

std::string to_string(Mode mode) { return mode == Mode::Schedule ? "schedule" : "measured"; }

Mode mode_from_string(const std::string& name) {
  if (name == "schedule") return Mode::Schedule;
  if (name == "measured") return Mode::Measured;
  throw ValidationError("mode must be \"schedule\" or \"measured\", got \"" + name + "\"");
}

EngineSetup prepare_run(HamiltonianDecomposition H0, EngineOptions options) {
  H0.validate();
  const int n = H0.dim();
  const double r = H0.domain.r;
  const double s = H0.domain.s;
  const double tau = H0.omega.tau;
  if (options.k_max < 0) throw ValidationError("k_max must be >= 0");
  if (options.grid_size <= 2 * options.limits.K_max)
    throw ValidationError("grid_size must exceed 2 K_max");
  if (options.ode_steps < 1) throw ValidationError("ode_steps must be >= 1");

  EngineSetup setup;
  if (!H0.omega.certification) {
    const int box = std::max(options.cert_kmax, options.limits.K_max);
    H0.omega.certification = certify(H0.omega.omega, tau, box);
  }
  const auto& cert = *H0.omega.certification;
  if (!(cert.gamma_min > 0.0))
    throw ResonanceError("frequency vector is resonant: <omega,k> = 0 at k = " +
                             format_lattice(cert.argmin_k),
                         cert.argmin_k);
  if (H0.omega.certification_below_claim()) {
    std::ostringstream msg;
    msg << "certified gamma_min " << cert.gamma_min << " is below the claimed gamma "
        << *H0.omega.gamma_claimed << "; using the certified value";
    setup.warnings.push_back(msg.str());
  }
  const double gamma = H0.omega.gamma();

  setup.C = options.C ? *options.C : mean_matrix(H0.Q);
  if (setup.C.rows() != n || setup.C.cols() != n) throw ValidationError("C must be n x n");
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(setup.C);
  if (!lu.isInvertible()) throw HypothesisError("matrix C is singular");
  const double C_inv = row_sum_norm(lu.inverse());
  setup.nondegeneracy_lhs = majorant_norm(minus_constant(H0.Q, setup.C), r, 0.0);
  setup.nondegeneracy_rhs = 1.0 / (4.0 * C_inv);
  if (setup.nondegeneracy_lhs > setup.nondegeneracy_rhs * (1.0 + kRelSlack)) {
    std::ostringstream msg;
    msg << "nondegeneracy |Q - C| <= 1/(4|C^-1|) fails: " << setup.nondegeneracy_lhs << " > "
        << setup.nondegeneracy_rhs;
    throw HypothesisError(msg.str());
  }

  const double delta0 = std::pow(s, 1.0 / (tau + 1.0)) / 32.0;
  double c6 = 0.0;
  std::string c6_source = "config";
  if (options.c6) {
    c6 = *options.c6;
  } else {
    c6 = amplification_estimate(H0.omega, options.limits.K_max, delta0);
    std::ostringstream src;
    src << "amplification_estimate(K=" << options.limits.K_max << ", delta=" << delta0 << ")";
    c6_source = src.str();
  }
  setup.chain = constants_chain(n, tau, gamma, setup.C, H0.omega.norm(), c6, c6_source);
  setup.theta = options.theta ? *options.theta : setup.chain.c1;
  if (!(setup.theta > 0.0)) throw ValidationError("theta must be > 0");
  setup.M_initial = majorant_norm(H0.R, r, s);

  const bool theta_ok = setup.theta <= setup.chain.c1 * (1.0 + kRelSlack);
  const double man_rhs = setup.chain.c2 * s * s * setup.theta;
  const bool man_ok = setup.M_initial <= man_rhs * (1.0 + kRelSlack);
  setup.hypotheses_hold = theta_ok && man_ok;

  setup.rho_measure = options.rho_measure ? *options.rho_measure : r / 2.0;
  setup.sigma_measure = options.sigma_measure ? *options.sigma_measure : s / 2.0;
  if (!(setup.rho_measure > 0.0 && setup.rho_measure <= r))
    throw ValidationError("rho_measure must lie in (0, r]");
  if (!(setup.sigma_measure > 0.0 && setup.sigma_measure <= s))
    throw ValidationError("sigma_measure must lie in (0, s]");

  if (options.mode == Mode::Schedule) {
    if (!man_ok) {
      std::ostringstream msg;
      msg << "smallness M <= c2 s^2 theta fails: M = " << setup.M_initial << " > " << man_rhs;
      throw HypothesisError(msg.str());
    }
    setup.schedule = build_schedule(r, s, setup.theta, tau, setup.chain, options.k_max + 1);
  } else {
    if (!theta_ok) {
      std::ostringstream msg;
      msg << "theta = " << setup.theta << " exceeds c1 = " << setup.chain.c1;
      setup.warnings.push_back(msg.str());
    }
    if (!man_ok) {
      std::ostringstream msg;
      msg << "smallness M <= c2 s^2 theta fails (M = " << setup.M_initial << ", bound "
          << man_rhs << "); measured mode continues without the theorem's guarantee";
      setup.warnings.push_back(msg.str());
    }
  }
  setup.H0 = std::move(H0);
  setup.options = std::move(options);
  return setup;
}

GridProjection composition_delta(const FTSeries& H, const SimpleCanonicalMap& Z, int grid_size,
                                 int K, int D) {
  const int n = Z.dim();
  const SpectralGrid grid(n, grid_size);
  const std::size_t nodes = grid.size();

  // Nodal values of the map.
  std::vector<std::vector<double>> d(n), Y0(n);
  std::vector<std::vector<std::vector<double>>> Jp(n, std::vector<std::vector<double>>(n));
  auto real_nodes = [&](const FTSeries& f) {
    std::vector<double> out(nodes, 0.0);
    if (f.empty()) return out;
    const auto v = nodal_values(f, grid);
    for (std::size_t s = 0; s < nodes; ++s) out[s] = v[s].real();
    return out;
  };
  for (int i = 0; i < n; ++i) {
    d[i] = real_nodes(Z.Xp[i]);
    Y0[i] = real_nodes(Z.Y0[i]);
  }
  const SeriesMatrix offset = Z.jinv_offset();
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) Jp[j][i] = real_nodes(offset[j][i]);

  // Polynomial bookkeeping in eta: monomials of degree <= D.
  const auto monos = multi_indices(n, D);
  const std::size_t T = monos.size();
  std::map<Lattice, int> index;
  for (std::size_t b = 0; b < T; ++b) index[monos[b]] = static_cast<int>(b);
  std::vector<std::vector<int>> up(T, std::vector<int>(n, -1));
  std::vector<int> parent(T, -1), axis(T, -1);
  for (std::size_t b = 0; b < T; ++b) {
    for (int j = 0; j < n; ++j) {
      Lattice m = monos[b];
      ++m[j];
      auto it = index.find(m);
      if (it != index.end()) up[b][j] = it->second;
    }
    if (b == 0) continue;
    Lattice p = monos[b];
    int j = 0;
    while (p[j] == 0) ++j;
    --p[j];
    parent[b] = index.at(p);
    axis[b] = j;
  }

  // Slices of H that appear (alpha with |alpha| <= D).
  struct Term {
    std::vector<int> k;
    cplx c;
  };
  std::vector<std::vector<Term>> slice_terms(T);
  int KH = 0;
  for (const auto& [key, c] : H.terms()) {
    const auto it = index.find(key.alpha);
    if (it == index.end()) throw ValidationError("H exceeds the composition degree");
    slice_terms[it->second].push_back({key.k, c});
    KH = std::max(KH, norm_inf(key.k));
  }

  NodalSlices slices;
  for (std::size_t b = 0; b < T; ++b) slices[monos[b]].assign(nodes, cplx(0.0));

  const int W = 2 * KH + 1;
  std::vector<cplx> table(static_cast<std::size_t>(n) * W);
  std::vector<cplx> h(T), dh(T);
  std::vector<std::vector<double>> L(T, std::vector<double>(T, 0.0));
  std::vector<std::vector<double>> dL(T, std::vector<double>(T, 0.0));
  std::vector<double> lin(T), dlin(T);
  std::vector<cplx> acc(T);

  for (std::size_t s = 0; s < nodes; ++s) {
    const auto xi = grid.node(s);
    for (int j = 0; j < n; ++j) {
      cplx* row = table.data() + static_cast<std::size_t>(j) * W;
      row[KH] = 1.0;
      for (int m = 1; m <= KH; ++m) {
        row[KH + m] = cplx(std::cos(m * xi[j]), std::sin(m * xi[j]));
        row[KH - m] = std::conj(row[KH + m]);
      }
    }
    // h_alpha(xi) and h_alpha(xi + d) - h_alpha(xi).
    for (std::size_t b = 0; b < T; ++b) {
      cplx value = 0.0, delta = 0.0;
      for (const auto& t : slice_terms[b]) {
        cplx base = t.c;
        double theta = 0.0;
        for (int j = 0; j < n; ++j) {
          base *= table[static_cast<std::size_t>(j) * W + t.k[j] + KH];
          theta += t.k[j] * d[j][s];
        }
        const double half = std::sin(0.5 * theta);
        value += base;
        delta += base * cplx(-2.0 * half * half, std::sin(theta));
      }
      h[b] = value;
      dh[b] = delta;
    }
    // L^alpha and L^alpha - eta^alpha with L_i = eta_i + Y0_i + sum_j eta_j Jp[j][i].
    std::fill(L[0].begin(), L[0].end(), 0.0);
    std::fill(dL[0].begin(), dL[0].end(), 0.0);
    L[0][0] = 1.0;
    for (std::size_t b = 1; b < T; ++b) {
      const int p = parent[b];
      const int i = axis[b];
      std::fill(L[b].begin(), L[b].end(), 0.0);
      std::fill(dL[b].begin(), dL[b].end(), 0.0);
      // Multiply L[p] and dL[p] by L_i.
      for (std::size_t m = 0; m < T; ++m) {
        const double lp = L[p][m];
        const double dp = dL[p][m];
        if (lp == 0.0 && dp == 0.0) continue;
        L[b][m] += lp * Y0[i][s];
        dL[b][m] += dp * Y0[i][s];
        for (int j = 0; j < n; ++j) {
          const int target = up[m][j];
          if (target < 0) continue;
          const double coef = (i == j ? 1.0 : 0.0) + Jp[j][i][s];
          L[b][target] += lp * coef;
          dL[b][target] += dp * coef;
        }
      }
      // + eta^p * d_i with d_i = Y0_i + sum_j eta_j Jp[j][i].
      dL[b][p] += Y0[i][s];
      for (int j = 0; j < n; ++j) {
        const int target = up[p][j];
        if (target >= 0) dL[b][target] += Jp[j][i][s];
      }
    }
    std::fill(acc.begin(), acc.end(), cplx(0.0));
    for (std::size_t b = 0; b < T; ++b) {
      if (slice_terms[b].empty()) continue;
      for (std::size_t m = 0; m < T; ++m) acc[m] += dh[b] * L[b][m] + h[b] * dL[b][m];
    }
    for (std::size_t m = 0; m < T; ++m) slices[monos[m]][s] = acc[m];
  }
  return project_slices(slices, grid, K, D, true);
}

StepResult kam_step(const IterateState& state, const StepGeometry& geo, const EngineSetup& setup,
                    int k) {
  const auto& H0 = setup.H0;
  const auto& chain = setup.chain;
  const auto& opt = setup.options;
  const int n = H0.dim();
  const double tau = H0.omega.tau;
  const Lattice zero(n, 0);

  StepResult out;
  StepReport& rep = out.report;
  rep.k = k;
  rep.geometry = geo;
  rep.a = state.a;
  rep.R_majorant = majorant_norm(state.R, geo.rho, geo.sigma);
  const double M = geo.M_schedule ? *geo.M_schedule : rep.R_majorant;

  for (int j = 0; j < n; ++j) {
    const double w = state.N.coeff(zero, unit(n, j)).real();
    if (std::abs(w - H0.omega.omega[j]) > kStructureTolerance * std::max(1.0, H0.omega.norm()))
      throw NumericalError("normal form lost the frequency vector at step " + std::to_string(k));
  }

  rep.hessian_gap = majorant_norm(minus_constant(hessian_y(state.N), setup.C), geo.rho, geo.sigma);
  const double C_inv = chain.inputs.C_inv_norm;
  if (rep.hessian_gap > 1.0 / (2.0 * C_inv) * (1.0 + kRelSlack)) {
    std::ostringstream msg;
    msg << "step " << k << ": |N_yy - C| = " << rep.hessian_gap << " exceeds 1/(2|C^-1|) = "
        << 1.0 / (2.0 * C_inv);
    throw HypothesisError(msg.str());
  }
  rep.smallness_chain_form = rep.R_majorant <= chain.c18 * geo.sigma * geo.sigma;

  if (state.R.empty() || rep.R_majorant == 0.0) {
    out.Z = SimpleCanonicalMap::identity(n);
    out.dS = GeneratingFunction::zero(n);
    out.deltaN = FTSeries(n, 0, 0);
    out.next = state;
    rep.a_next = state.a;
    rep.flow_horizon = std::numeric_limits<double>::infinity();
    rep.halving_change = 0.0;
    return out;
  }

  const auto sol = solve_linearized(state.R, state.N, H0.omega, setup.C, opt.limits);
  out.dS = sol.dS;
  out.deltaN = sol.dN.deltaN;
  const double rho_x = geo.rho - 4.0 * geo.delta;
  const auto Sx = sol.dS.gradient_x();
  rep.Sx_majorant = majorant_norm(std::span<const FTSeries>(Sx), rho_x, geo.sigma);
  rep.Sy_majorant = majorant_norm(std::span<const FTSeries>(sol.dS.V), geo.rho - 3.0 * geo.delta, 0.0);
  rep.value_residual = sol.dN.value_residual;
  rep.gradient_residual = sol.dN.gradient_residual;
  rep.deltaN0 = sol.dN.deltaN0;
  FTSeries variation = sol.dN.deltaN;
  variation.set(zero, zero, 0.0);
  rep.deltaN_variation = majorant_norm(variation, rho_x, geo.sigma / 2.0);
  rep.deltaN_yy = majorant_norm(hessian_y(sol.dN.deltaN), rho_x, geo.sigma / 4.0);

  const FlowWindow window =
      opt.mode == Mode::Schedule ? flow_window(chain.c7 + chain.c8, M, geo.sigma, geo.delta)
                                 : measured_flow_window(sol.dS, rho_x, geo.sigma, geo.delta);
  rep.flow_horizon = window.horizon;
  FlowOptions flow_opts;
  flow_opts.K_keep = opt.limits.K_max;
  out.Z = integrate_flow(sol.dS, opt.grid_size, opt.ode_steps, window, flow_opts);
  rep.halving_change = out.Z.meta.halving_change;
  rep.taylor_order = out.Z.meta.taylor_order;
  const auto growth = jacobian_growth_audit(out.Z, window);
  rep.Z_minus_E = growth.defect;
  rep.Z_norm = growth.norm;

  const FTSeries H = state.N + state.R;
  const auto dH = composition_delta(H, out.Z, opt.grid_size, opt.limits.K_max, opt.limits.D_max);
  const FTSeries dN = project_normal_form(sol.dN.deltaN);

  out.next.N = state.N + dN;
  out.next.R = state.R + dH.series - dN;
  out.next.a = state.a + sol.dN.deltaN0;
  rep.a_next = out.next.a;
  rep.truncation_loss = sol.truncation_loss + out.Z.meta.truncation_loss + dH.truncation_loss;

  // N_+ = a_+ + <omega,eta> + O(|eta|^2).
  FTSeries off = at_y_zero(out.next.N);
  off.add(zero, zero, -out.next.a);
  double structure = majorant_norm(off, 0.0, 0.0);
  for (int j = 0; j < n; ++j) {
    FTSeries g = y_slice(out.next.N, unit(n, j));
    g.add(zero, zero, -H0.omega.omega[j]);
    structure = std::max(structure, majorant_norm(g, 0.0, 0.0));
  }
  if (structure > kStructureTolerance * std::max(1.0, H0.omega.norm()))
    throw NumericalError("N_+ is not of the form a_+ + <omega,eta> + O(|eta|^2)");

  rep.Q_drift = majorant_norm(hessian_y(dN), geo.rho_next, geo.sigma_next);
  rep.R_next_majorant = majorant_norm(out.next.R, geo.rho_next, geo.sigma_next);
  rep.quadratic_ratio = rep.R_next_majorant * geo.sigma * geo.sigma / (rep.R_majorant * rep.R_majorant);

  const double s = geo.sigma;
  const double q = chain.c14 * M / (s * s);
  rep.audits.push_back(audit("abssx", rep.Sx_majorant, chain.c7 * M / s));
  rep.audits.push_back(audit("abssy", rep.Sy_majorant, chain.c8 * M / (s * std::pow(geo.delta, tau))));
  rep.audits.push_back(audit("absn0", std::abs(rep.deltaN0), chain.c9 * M / s));
  rep.audits.push_back(audit("absn", rep.deltaN_variation, chain.c10 * M));
  rep.audits.push_back(audit("absnyy", rep.deltaN_yy, chain.c11 * M / (s * s)));
  rep.audits.push_back(audit("ind1Z", rep.Z_norm, std::exp(q)));
  rep.audits.push_back(audit("ind1Z-E", rep.Z_minus_E, q * std::exp(q)));
  rep.audits.push_back(audit("ind1a+-a", std::abs(rep.a_next - rep.a), chain.c9 * M / s));
  rep.audits.push_back(audit("ind1Q+-Q", rep.Q_drift, chain.c11 * M / (s * s)));
  rep.audits.push_back(audit("ind1R+", rep.R_next_majorant, chain.c15 * M * M / (s * s)));
  rep.audits.push_back(audit("flow-jacobian", growth.defect, growth.defect_bound));
  return out;
}

double quadratic_exponent(const std::vector<double>& R) {
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k + 1 < R.size(); ++k) {
    if (!(R[k] > 0.0 && R[k + 1] > 0.0)) continue;
    xs.push_back(std::log(R[k]));
    ys.push_back(std::log(R[k + 1]));
  }
  if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = static_cast<double>(xs.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

double torus_residual(const Chain& W, const HamiltonianDecomposition& H0, int samples,
                      std::uint64_t seed, double h) {
  const int n = H0.dim();
  std::vector<FTSeries> Hx, Hy;
  for (int j = 0; j < n; ++j) {
    Hx.push_back(partial_x(H0.H, j));
    Hy.push_back(partial_y(H0.H, j));
  }
  const auto& omega = H0.omega.omega;
  SplitMix64 rng(seed);
  const std::vector<double> eta(n, 0.0);
  double worst = 0.0;
  std::vector<double> xi(n), plus(n), minus(n), x(n);
  for (int t = 0; t < samples; ++t) {
    const double time = rng.uniform(0.0, 100.0);
    for (int j = 0; j < n; ++j) {
      xi[j] = std::fmod(omega[j] * time, 2.0 * std::numbers::pi);
      plus[j] = xi[j] + omega[j] * h;
      minus[j] = xi[j] - omega[j] * h;
    }
    const auto z = W.evaluate_displacement(xi, eta);
    const auto zp = W.evaluate_displacement(plus, eta);
    const auto zm = W.evaluate_displacement(minus, eta);
    for (int j = 0; j < n; ++j) x[j] = xi[j] + z.x[j];
    for (int j = 0; j < n; ++j) {
      const double xdot = omega[j] + (zp.x[j] - zm.x[j]) / (2.0 * h);
      const double ydot = (zp.y[j] - zm.y[j]) / (2.0 * h);
      worst = std::max(worst, std::abs(xdot - eval_real(Hy[j], x, z.y)));
      worst = std::max(worst, std::abs(ydot + eval_real(Hx[j], x, z.y)));
    }
  }
  return worst;
}

double composition_consistency(const Chain& W, const FTSeries& H0, const FTSeries& H, int samples,
                               std::uint64_t seed, double eta_radius) {
  const int n = H0.dim();
  SplitMix64 rng(seed);
  double worst = 0.0, scale = 0.0;
  for (int t = 0; t < samples; ++t) {
    const auto xi = random_angles(rng, n);
    std::vector<double> eta(n);
    for (auto& v : eta) v = rng.uniform(-eta_radius, eta_radius);
    const auto p = W.evaluate(xi, eta);
    const double lhs = eval_real(H0, p.x, p.y);
    const double rhs = eval_real(H, xi, eta);
    worst = std::max(worst, std::abs(lhs - rhs));
    scale = std::max(scale, std::abs(rhs));
  }
  return scale > 0.0 ? worst / scale : worst;
}

StepGeometry step_geometry(const EngineSetup& setup, int k) {
  StepGeometry g;
  if (setup.schedule) {
    const auto& S = *setup.schedule;
    g.rho = S.r[k];
    g.sigma = S.s[k];
    g.delta = S.delta[k];
    g.rho_next = S.r[k + 1];
    g.sigma_next = S.s[k + 1];
    g.M_schedule = S.M[k];
  } else {
    g.rho = g.rho_next = setup.rho_measure;
    g.sigma = g.sigma_next = setup.sigma_measure;
    g.delta = setup.rho_measure / 8.0;
  }
  return g;
}

RunReport run(const EngineSetup& setup) {
  RunReport report;
  report.setup = setup;
  const auto& H0 = setup.H0;
  const auto& opt = setup.options;

  IterateState state{H0.normal_part(), H0.R, H0.a};
  const auto g0 = step_geometry(setup, 0);
  const double R0 = majorant_norm(state.R, g0.rho, g0.sigma);
  report.floor = opt.floor_rel * R0;
  report.R_majorants.push_back(R0);
  report.a_values.push_back(state.a);
  std::vector<SimpleCanonicalMap> maps;

  report.termination = "k_max";
  for (int k = 0; k < opt.k_max; ++k) {
    const auto geo = step_geometry(setup, k);
    const double Rk = majorant_norm(state.R, geo.rho, geo.sigma);
    if (k > 0) report.R_majorants.back() = Rk;
    if (state.R.empty() || Rk == 0.0) {
      report.termination = "zero remainder";
      break;
    }
    if (Rk < report.floor) {
      report.termination = "floor";
      break;
    }
    try {
      if (geo.M_schedule && Rk > *geo.M_schedule * (1.0 + kRelSlack)) {
        std::ostringstream msg;
        msg << "step " << k << ": measured |R_k| = " << Rk << " exceeds the scheduled M_k = "
            << *geo.M_schedule;
        throw HypothesisError(msg.str());
      }
      auto result = kam_step(state, geo, setup, k);
      maps.push_back(std::move(result.Z));
      report.generators.push_back(std::move(result.dS));
      const Chain W(maps);
      const FTSeries Hk = result.next.N + result.next.R;
      result.report.composition_error = composition_consistency(
          W, H0.H, Hk, opt.diagnostic_samples, opt.seed + static_cast<std::uint64_t>(k),
          geo.sigma_next / 2.0);
      state = std::move(result.next);
      report.steps.push_back(std::move(result.report));
      report.R_majorants.push_back(report.steps.back().R_next_majorant);
      report.a_values.push_back(state.a);
    } catch (const HypothesisError& e) {
      report.failure = RunFailure{"hypothesis", e.what()};
      report.termination = "error";
      break;
    } catch (const NumericalError& e) {
      report.failure = RunFailure{"numerical", e.what()};
      report.termination = "error";
      break;
    }
  }
  report.W = Chain(maps);
  report.final_state = state;
  for (std::size_t k = 1; k <= maps.size(); ++k)
    report.torus_residuals.push_back(
        torus_residual(report.W.prefix(k), H0, opt.diagnostic_samples, opt.seed));
  return report;
}

TheoremVerdict verify_main_theorem(const RunReport& run, const ConstantsChain& chain, double theta,
                                   std::uint64_t seed) {
  const auto& setup = run.setup;
  const auto& H0 = setup.H0;
  const int n = H0.dim();
  const double r = H0.domain.r;
  const double s = H0.domain.s;
  const double M = setup.M_initial;

  TheoremVerdict v;
  v.theta = theta;
  v.theta_effective = std::max(theta, M / (chain.c2 * s * s));
  v.hypotheses_hold = theta <= chain.c1 * (1.0 + kRelSlack) &&
                      M <= chain.c2 * s * s * theta * (1.0 + kRelSlack) &&
                      setup.nondegeneracy_lhs <= setup.nondegeneracy_rhs * (1.0 + kRelSlack);
  const int samples = std::max(1, setup.options.diagnostic_samples);
  auto finish = [](EstimateVerdict& e) {
    e.pass = e.lhs <= e.rhs * (1.0 + kRelSlack);
    e.margin = e.rhs > 0.0 ? 1.0 - e.lhs / e.rhs : (e.lhs == 0.0 ? 1.0 : -1.0);
  };

  SplitMix64 rng(seed);
  const Eigen::MatrixXd E = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  v.trafo.name = "trafo";
  v.trafo.rhs = chain.c3 * v.theta_effective;
  for (int t = 0; t < samples; ++t) {
    const auto xi = random_angles(rng, n);
    std::vector<double> eta(n);
    for (auto& e : eta) e = rng.uniform(-s / 2.0, s / 2.0);
    const auto A = run.W.evaluate_with_jacobian(xi, eta).second;
    v.trafo.lhs = std::max(v.trafo.lhs, row_sum_norm(A - E));
  }
  finish(v.trafo);

  const auto& N = run.final_state.N;
  v.hesse.name = "hesse";
  v.hesse.rhs = chain.c4 * v.theta_effective;
  v.hesse.lhs = majorant_norm(difference(hessian_y_at_zero(N), H0.Q), r / 2.0, 0.0);
  finish(v.hesse);

  // R* = (H o W - H_final) + (H_final - quadratic model); the model is the
  // degree <= 2 part of N_final.
  const FTSeries H_final = N + run.final_state.R;
  const FTSeries tail = H_final - quadratic_part(N);
  v.tayl3.name = "tayl3";
  v.tayl3.rhs = chain.c5 * M;
  std::vector<std::vector<double>> directions;
  for (int j = 0; j < n; ++j) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    directions.push_back(e);
  }
  for (int t = 0; t < 10; ++t) {
    std::vector<double> dir(n);
    double big = 0.0;
    for (auto& c : dir) {
      c = rng.uniform(-1.0, 1.0);
      big = std::max(big, std::abs(c));
    }
    for (auto& c : dir) c /= big;
    directions.push_back(dir);
  }
  for (double size : {s / 8.0, s / 4.0, s / 2.0}) {
    for (const auto& dir : directions) {
      const auto xi = random_angles(rng, n);
      std::vector<double> eta(n);
      for (int j = 0; j < n; ++j) eta[j] = size * dir[j];
      const auto p = run.W.evaluate(xi, eta);
      const double rstar = (eval_real(H0.H, p.x, p.y) - eval_real(H_final, xi, eta)) +
                           eval_real(tail, xi, eta);
      v.tayl3.lhs = std::max(v.tayl3.lhs, std::abs(rstar) * std::pow(s / size, 3));
    }
  }
  finish(v.tayl3);
  v.pass = v.trafo.pass && v.hesse.pass && v.tayl3.pass;
  return v;
}

nlohmann::json to_json(const StepReport& r) {
  nlohmann::json audits = nlohmann::json::array();
  for (const auto& a : r.audits)
    audits.push_back({{"name", a.name}, {"measured", a.measured}, {"bound", a.bound}, {"pass", a.pass}});
  nlohmann::json geo = {{"rho", r.geometry.rho},
                        {"sigma", r.geometry.sigma},
                        {"delta", r.geometry.delta},
                        {"rho_next", r.geometry.rho_next},
                        {"sigma_next", r.geometry.sigma_next}};
  geo["M_schedule"] = r.geometry.M_schedule ? nlohmann::json(*r.geometry.M_schedule) : nlohmann::json();
  return {{"k", r.k},
          {"geometry", geo},
          {"R_majorant", r.R_majorant},
          {"R_next_majorant", r.R_next_majorant},
          {"dS_x_majorant", r.Sx_majorant},
          {"dS_y_majorant", r.Sy_majorant},
          {"deltaN0", r.deltaN0},
          {"deltaN_variation", r.deltaN_variation},
          {"deltaN_yy", r.deltaN_yy},
          {"Z_minus_E", r.Z_minus_E},
          {"Z_norm", r.Z_norm},
          {"normal_form_value_residual", r.value_residual},
          {"normal_form_gradient_residual", r.gradient_residual},
          {"a", r.a},
          {"a_next", r.a_next},
          {"Q_drift", r.Q_drift},
          {"hessian_gap", r.hessian_gap},
          {"quadratic_ratio", r.quadratic_ratio},
          {"truncation_loss", r.truncation_loss},
          {"flow_horizon", std::isfinite(r.flow_horizon) ? nlohmann::json(r.flow_horizon) : nlohmann::json()},
          {"halving_change", r.halving_change},
          {"taylor_order", r.taylor_order},
          {"composition_error", r.composition_error},
          {"smallness_chain_form", r.smallness_chain_form},
          {"audits", audits}};
}

nlohmann::json to_json(const TheoremVerdict& v) {
  auto one = [](const EstimateVerdict& e) {
    return nlohmann::json{{"lhs", e.lhs}, {"rhs", e.rhs}, {"margin", e.margin}, {"pass", e.pass}};
  };
  return {{"theta", v.theta},
          {"theta_effective", v.theta_effective},
          {"hypotheses_hold", v.hypotheses_hold},
          {"trafo", one(v.trafo)},
          {"hesse", one(v.hesse)},
          {"tayl3", one(v.tayl3)},
          {"pass", v.pass}};
}

}  // namespace kam
