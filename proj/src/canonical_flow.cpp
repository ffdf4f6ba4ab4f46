#include "kam/canonical_flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "field_eval.hpp"
#include "kam/rng.hpp"
#include "kam/spectral_grid.hpp"

namespace kam {

namespace {

constexpr int kMaxTaylorOrder = 16;
constexpr double kTaylorTolerance = 1e-16;

FTSeries zero_series(int n) { return FTSeries(n, 0, 0); }

// Field layout shared by the nodal and the pointwise integrators:
// [V_0..V_{n-1}, U_{x_0}..U_{x_{n-1}}, V_{i,x_j} at 2n + i*n + j].
std::vector<FTSeries> flow_fields(const GeneratingFunction& dS) {
  const int n = dS.dim();
  std::vector<FTSeries> fields;
  for (int i = 0; i < n; ++i) fields.push_back(dS.V[i]);
  for (int j = 0; j < n; ++j) fields.push_back(partial_x(dS.U, j));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) fields.push_back(partial_x(dS.V[i], j));
  return fields;
}

void flow_rhs(int n, const std::vector<double>& lambda, const double* F, const double* y,
              double* dx, double* dy) {
  for (int i = 0; i < n; ++i) dx[i] = F[i];
  for (int j = 0; j < n; ++j) {
    double s = lambda[j] + F[n + j];
    for (int i = 0; i < n; ++i) s += y[i] * F[2 * n + i * n + j];
    dy[j] = -s;
  }
}

// Classical RK4 for the displacement d = x - xi and y; field(d, out) fills
// the field values at xi + d.
template <typename FieldFn>
void rk4(int n, const std::vector<double>& lambda, int steps, FieldFn&& field, double* d,
         double* y, const std::function<void(const double*, const double*)>& guard) {
  const std::size_t m = static_cast<std::size_t>(2 * n + n * n);
  std::vector<double> F(m), kx(4 * n), ky(4 * n), dt(n), yt(n);
  const double h = 1.0 / steps;
  for (int step = 0; step < steps; ++step) {
    for (int stage = 0; stage < 4; ++stage) {
      const double c = stage == 0 ? 0.0 : (stage == 3 ? h : 0.5 * h);
      for (int i = 0; i < n; ++i) {
        dt[i] = d[i] + (stage ? c * kx[(stage - 1) * n + i] : 0.0);
        yt[i] = y[i] + (stage ? c * ky[(stage - 1) * n + i] : 0.0);
      }
      field(dt.data(), F.data());
      flow_rhs(n, lambda, F.data(), yt.data(), kx.data() + stage * n, ky.data() + stage * n);
    }
    for (int i = 0; i < n; ++i) {
      d[i] += h / 6.0 * (kx[i] + 2.0 * kx[n + i] + 2.0 * kx[2 * n + i] + kx[3 * n + i]);
      y[i] += h / 6.0 * (ky[i] + 2.0 * ky[n + i] + 2.0 * ky[2 * n + i] + ky[3 * n + i]);
    }
    if (guard) guard(d, y);
  }
}

struct NodalFlow {
  std::vector<std::vector<double>> d;  // [node][i]
  std::vector<std::vector<double>> y;
};

NodalFlow integrate_nodes(const GeneratingFunction& dS, const SpectralGrid& grid, int steps,
                          const FlowWindow& window, int& taylor_order) {
  const int n = dS.dim();
  const auto fields = flow_fields(dS);
  double radius = 0.0;
  for (const auto& v : dS.V) radius = std::max(radius, majorant_norm(v, 0.0, 0.0));
  taylor_order = detail::TaylorFields::choose_order(fields, radius, kTaylorTolerance,
                                                    kMaxTaylorOrder);
  std::unique_ptr<detail::TaylorFields> taylor;
  std::unique_ptr<detail::DirectFields> direct;
  if (taylor_order > 0)
    taylor = std::make_unique<detail::TaylorFields>(fields, grid, taylor_order);
  else
    direct = std::make_unique<detail::DirectFields>(fields);

  auto guard = [&](const double* d, const double* y) {
    for (int i = 0; i < n; ++i) {
      if (std::abs(d[i]) > 0.5 * window.delta || std::abs(y[i]) > 0.5 * window.sigma) {
        std::ostringstream msg;
        msg << "flow leaves the domain: |x - xi| = " << std::abs(d[i]) << " (limit "
            << 0.5 * window.delta << "), |y| = " << std::abs(y[i]) << " (limit "
            << 0.5 * window.sigma << ")";
        throw NumericalError(msg.str());
      }
    }
  };

  NodalFlow out;
  out.d.assign(grid.size(), std::vector<double>(n, 0.0));
  out.y.assign(grid.size(), std::vector<double>(n, 0.0));
  std::vector<double> x(n);
  for (std::size_t s = 0; s < grid.size(); ++s) {
    const auto xi = grid.node(s);
    auto field = [&](const double* d, double* F) {
      if (taylor) {
        taylor->eval(s, d, F);
      } else {
        for (int i = 0; i < n; ++i) x[i] = xi[i] + d[i];
        direct->eval(x.data(), F);
      }
    };
    rk4(n, dS.lambda, steps, field, out.d[s].data(), out.y[s].data(), guard);
  }
  return out;
}

GridProjection project_component(const NodalFlow& flow, bool momentum, int i,
                                 const SpectralGrid& grid, int K) {
  std::vector<cplx> values(grid.size());
  for (std::size_t s = 0; s < grid.size(); ++s)
    values[s] = momentum ? flow.y[s][i] : flow.d[s][i];
  return project_values(values, grid, K, true);
}

Eigen::MatrixXd map_jacobian(int n, const double* F, const std::vector<double>& eta) {
  // F layout: Xp(n), Y0(n), Jinv(n*n, [j][i]), dXp(n*n, [i][a]), dY0(n*n, [i][a]),
  // dJinv(n*n*n, [j][i][a])
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  const double* Jinv = F + 2 * n;
  const double* dXp = Jinv + n * n;
  const double* dY0 = dXp + n * n;
  const double* dJinv = dY0 + n * n;
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < n; ++a) {
      Z(i, a) = (i == a ? 1.0 : 0.0) + dXp[i * n + a];
      double v = dY0[i * n + a];
      for (int j = 0; j < n; ++j) v += eta[j] * dJinv[(j * n + i) * n + a];
      Z(n + i, a) = v;
      Z(n + i, n + a) = Jinv[a * n + i];
    }
  }
  return Z;
}

PhasePoint map_point(int n, const double* F, const std::vector<double>& xi,
                     const std::vector<double>& eta) {
  PhasePoint p{std::vector<double>(n), std::vector<double>(n)};
  const double* Jinv = F + 2 * n;
  for (int i = 0; i < n; ++i) {
    p.x[i] = xi[i] + F[i];
    double v = F[n + i];
    for (int j = 0; j < n; ++j) v += eta[j] * Jinv[j * n + i];
    p.y[i] = v;
  }
  return p;
}

std::vector<FTSeries> map_fields(const SimpleCanonicalMap& Z) {
  const int n = Z.dim();
  std::vector<FTSeries> fields;
  for (int i = 0; i < n; ++i) fields.push_back(Z.Xp[i]);
  for (int i = 0; i < n; ++i) fields.push_back(Z.Y0[i]);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) fields.push_back(Z.Jinv[j][i]);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < n; ++a) fields.push_back(partial_x(Z.Xp[i], a));
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < n; ++a) fields.push_back(partial_x(Z.Y0[i], a));
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      for (int a = 0; a < n; ++a) fields.push_back(partial_x(Z.Jinv[j][i], a));
  return fields;
}

}  // namespace

FlowWindow flow_window(double lipschitz, double M, double s, double delta) {
  if (!(M >= 0.0 && s > 0.0 && delta > 0.0))
    throw ValidationError("flow_window needs M >= 0 and s, delta > 0");
  FlowWindow w;
  w.delta = delta;
  w.sigma = s / 4.0;
  w.K_bound = lipschitz * M * delta / s;
  w.horizon = w.K_bound > 0.0 ? w.sigma * w.delta / (2.0 * w.K_bound)
                              : std::numeric_limits<double>::infinity();
  if (!(w.horizon > 1.0)) {
    std::ostringstream msg;
    msg << "flow window horizon " << w.horizon << " <= 1: perturbation too large for a time-1 map";
    throw NumericalError(msg.str());
  }
  return w;
}

FlowWindow measured_flow_window(const GeneratingFunction& dS, double rho, double s, double delta) {
  if (!(rho >= 0.0 && s > 0.0 && delta > 0.0))
    throw ValidationError("measured_flow_window needs rho >= 0 and s, delta > 0");
  FlowWindow w;
  w.delta = delta;
  w.sigma = s / 4.0;
  const auto Sx = dS.gradient_x();
  const double sx = majorant_norm(std::span<const FTSeries>(Sx), rho, s);
  const double sy = majorant_norm(std::span<const FTSeries>(dS.V), rho, 0.0);
  w.K_bound = std::max(delta * sx, w.sigma * sy);
  w.horizon = w.K_bound > 0.0 ? w.sigma * w.delta / (2.0 * w.K_bound)
                              : std::numeric_limits<double>::infinity();
  if (!(w.horizon > 1.0)) {
    std::ostringstream msg;
    msg << "measured flow window horizon " << w.horizon << " <= 1";
    throw NumericalError(msg.str());
  }
  return w;
}

SimpleCanonicalMap SimpleCanonicalMap::identity(int n) {
  return shift(std::vector<double>(n, 0.0));
}

SimpleCanonicalMap SimpleCanonicalMap::shift(const std::vector<double>& c) {
  const int n = static_cast<int>(c.size());
  SimpleCanonicalMap Z;
  for (int i = 0; i < n; ++i) {
    Z.Xp.push_back(FTSeries::constant(n, c[i]));
    Z.Y0.push_back(zero_series(n));
  }
  Z.Jinv.assign(n, std::vector<FTSeries>(n, zero_series(n)));
  for (int i = 0; i < n; ++i) Z.Jinv[i][i] = FTSeries::constant(n, 1.0);
  Z.Jinv_offset.assign(n, std::vector<FTSeries>(n, zero_series(n)));
  Z.meta.integrator = "exact";
  Z.meta.halving_change = 0.0;
  return Z;
}

SeriesMatrix SimpleCanonicalMap::jinv_offset() const {
  if (!Jinv_offset.empty()) return Jinv_offset;
  const int n = dim();
  SeriesMatrix out = Jinv;
  for (int i = 0; i < n; ++i) out[i][i] -= FTSeries::constant(n, 1.0);
  return out;
}

double symplectic_defect(const Eigen::MatrixXd& A) {
  const int n = static_cast<int>(A.rows()) / 2;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  J.topRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
  J.bottomLeftCorner(n, n) = -Eigen::MatrixXd::Identity(n, n);
  return row_sum_norm(A.transpose() * J * A - J);
}

SimpleCanonicalMap integrate_flow(const GeneratingFunction& dS, int grid_size, int steps,
                                  const FlowWindow& window, const FlowOptions& options) {
  const int n = dS.dim();
  if (steps < 1) throw ValidationError("integrate_flow needs steps >= 1");
  if (!(window.horizon > 1.0)) throw NumericalError("flow window is closed (horizon <= 1)");
  int Kgen = dS.U.max_mode();
  for (const auto& v : dS.V) Kgen = std::max(Kgen, v.max_mode());
  if (grid_size <= 2 * Kgen)
    throw ValidationError("flow grid of " + std::to_string(grid_size) +
                          " points cannot resolve generator modes up to " + std::to_string(Kgen));
  const SpectralGrid grid(n, grid_size);
  const int K_keep = options.K_keep >= 0 ? options.K_keep : grid_size / 2 - 1;
  if (2 * K_keep >= grid_size) throw ValidationError("K_keep must stay below grid_size/2");

  SimpleCanonicalMap Z;
  Z.meta.grid_size = grid_size;
  Z.meta.steps = steps;
  int order = -1;
  const NodalFlow flow = integrate_nodes(dS, grid, steps, window, order);
  Z.meta.taylor_order = order;
  if (options.self_check) {
    int order2 = -1;
    const NodalFlow fine = integrate_nodes(dS, grid, 2 * steps, window, order2);
    double change = 0.0;
    for (std::size_t s = 0; s < grid.size(); ++s)
      for (int i = 0; i < n; ++i)
        change = std::max({change, std::abs(fine.d[s][i] - flow.d[s][i]),
                           std::abs(fine.y[s][i] - flow.y[s][i])});
    Z.meta.halving_change = change;
  }
  for (std::size_t s = 0; s < grid.size(); ++s)
    for (int i = 0; i < n; ++i) {
      Z.meta.max_displacement = std::max(Z.meta.max_displacement, std::abs(flow.d[s][i]));
      Z.meta.max_momentum = std::max(Z.meta.max_momentum, std::abs(flow.y[s][i]));
    }

  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    auto xp = project_component(flow, false, i, grid, K_keep);
    auto y0 = project_component(flow, true, i, grid, K_keep);
    loss += xp.truncation_loss + y0.truncation_loss;
    Z.Xp.push_back(std::move(xp.series));
    Z.Y0.push_back(std::move(y0.series));
  }

  // With A = d(Xp)/d(xi) at a node, X_xi^{-1} - E = -A (E + A)^{-1}.
  std::vector<std::vector<std::vector<cplx>>> dX(n, std::vector<std::vector<cplx>>(n));
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < n; ++a) dX[i][a] = nodal_values(partial_x(Z.Xp[i], a), grid);
  std::vector<std::vector<std::vector<cplx>>> offset(
      n, std::vector<std::vector<cplx>>(n, std::vector<cplx>(grid.size())));
  Eigen::MatrixXd A(n, n);
  const Eigen::MatrixXd E = Eigen::MatrixXd::Identity(n, n);
  for (std::size_t s = 0; s < grid.size(); ++s) {
    for (int i = 0; i < n; ++i)
      for (int a = 0; a < n; ++a) A(i, a) = dX[i][a][s].real();
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(E + A);
    if (!(std::abs(lu.determinant()) > 1e-12))
      throw NumericalError("det X_xi vanishes at a grid node");
    const Eigen::MatrixXd P = -A * lu.inverse();
    for (int i = 0; i < n; ++i)
      for (int a = 0; a < n; ++a) offset[i][a][s] = P(i, a);
  }
  Z.Jinv.assign(n, std::vector<FTSeries>(n));
  Z.Jinv_offset.assign(n, std::vector<FTSeries>(n));
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < n; ++a) {
      auto p = project_values(offset[i][a], grid, K_keep, true);
      loss += p.truncation_loss;
      Z.Jinv_offset[i][a] = p.series;
      Z.Jinv[i][a] = std::move(p.series);
      if (i == a) Z.Jinv[i][a] += FTSeries::constant(n, 1.0);
    }
  Z.meta.truncation_loss = loss;
  return Z;
}

PhasePoint flow_point(const GeneratingFunction& dS, const std::vector<double>& xi,
                      const std::vector<double>& eta, int steps) {
  const int n = dS.dim();
  const detail::DirectFields fields(flow_fields(dS));
  std::vector<double> d(n, 0.0), y = eta, x(n);
  auto field = [&](const double* dd, double* F) {
    for (int i = 0; i < n; ++i) x[i] = xi[i] + dd[i];
    fields.eval(x.data(), F);
  };
  rk4(n, dS.lambda, steps, field, d.data(), y.data(), nullptr);
  PhasePoint p{std::vector<double>(n), y};
  for (int i = 0; i < n; ++i) p.x[i] = xi[i] + d[i];
  return p;
}

struct Chain::Entry {
  SimpleCanonicalMap map;
  detail::DirectFields fields;
};

Chain::Chain(std::vector<SimpleCanonicalMap> maps) {
  for (auto& Z : maps) {
    auto e = std::make_shared<Entry>();
    e->fields = detail::DirectFields(map_fields(Z));
    e->map = std::move(Z);
    maps_.push_back(std::move(e));
  }
}

const SimpleCanonicalMap& Chain::map(std::size_t i) const { return maps_.at(i)->map; }

Chain Chain::prefix(std::size_t k) const {
  Chain c;
  c.maps_.assign(maps_.begin(), maps_.begin() + std::min(k, maps_.size()));
  return c;
}

PhasePoint Chain::evaluate(const std::vector<double>& xi, const std::vector<double>& eta) const {
  PhasePoint p{xi, eta};
  std::vector<double> F;
  for (auto it = maps_.rbegin(); it != maps_.rend(); ++it) {
    const auto& e = **it;
    F.resize(e.fields.count());
    e.fields.eval(p.x.data(), F.data());
    p = map_point(e.map.dim(), F.data(), p.x, p.y);
  }
  return p;
}

PhasePoint Chain::evaluate_displacement(const std::vector<double>& xi,
                                        const std::vector<double>& eta) const {
  const std::size_t n = xi.size();
  PhasePoint p{std::vector<double>(n, 0.0), eta};
  std::vector<double> F, x(xi);
  for (auto it = maps_.rbegin(); it != maps_.rend(); ++it) {
    const auto& e = **it;
    F.resize(e.fields.count());
    e.fields.eval(x.data(), F.data());
    const PhasePoint next = map_point(e.map.dim(), F.data(), x, p.y);
    for (std::size_t i = 0; i < n; ++i) {
      p.x[i] += F[i];
      x[i] = xi[i] + p.x[i];
    }
    p.y = next.y;
  }
  return p;
}

std::pair<PhasePoint, Eigen::MatrixXd> Chain::evaluate_with_jacobian(
    const std::vector<double>& xi, const std::vector<double>& eta) const {
  const int n = static_cast<int>(xi.size());
  PhasePoint p{xi, eta};
  Eigen::MatrixXd W = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  std::vector<double> F;
  for (auto it = maps_.rbegin(); it != maps_.rend(); ++it) {
    const auto& e = **it;
    F.resize(e.fields.count());
    e.fields.eval(p.x.data(), F.data());
    W = map_jacobian(n, F.data(), p.y) * W;
    p = map_point(n, F.data(), p.x, p.y);
  }
  return {p, W};
}

Chain compose(std::vector<SimpleCanonicalMap> maps) { return Chain(std::move(maps)); }

PhasePoint evaluate_chain(const Chain& chain, const std::vector<double>& xi,
                          const std::vector<double>& eta) {
  return chain.evaluate(xi, eta);
}

PhasePoint apply(const SimpleCanonicalMap& Z, const std::vector<double>& xi,
                 const std::vector<double>& eta) {
  return Chain({Z}).evaluate(xi, eta);
}

Eigen::MatrixXd jacobian(const SimpleCanonicalMap& Z, const std::vector<double>& xi,
                         const std::vector<double>& eta) {
  return Chain({Z}).evaluate_with_jacobian(xi, eta).second;
}

double check_symplectic(const SimpleCanonicalMap& Z, int samples, std::uint64_t seed,
                        double eta_radius) {
  const int n = Z.dim();
  const Chain chain({Z});
  SplitMix64 rng(seed);
  double worst = 0.0;
  std::vector<double> xi(n), eta(n);
  for (int s = 0; s < samples; ++s) {
    for (int i = 0; i < n; ++i) xi[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int i = 0; i < n; ++i) eta[i] = rng.uniform(-eta_radius, eta_radius);
    worst = std::max(worst, symplectic_defect(chain.evaluate_with_jacobian(xi, eta).second));
  }
  return worst;
}

JacobianAudit jacobian_growth_audit(const SimpleCanonicalMap& Z, const FlowWindow& window) {
  const int n = Z.dim();
  const Chain chain({Z});
  const int points = Z.meta.grid_size > 0 ? Z.meta.grid_size : 16;
  const SpectralGrid grid(n, points);
  JacobianAudit audit;
  std::vector<double> eta(n);
  std::vector<int> corner(n);
  const Eigen::MatrixXd E = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  for (std::size_t s = 0; s < grid.size(); ++s) {
    const auto xi = grid.node(s);
    std::fill(corner.begin(), corner.end(), -1);
    while (true) {
      for (int j = 0; j < n; ++j) eta[j] = corner[j] * window.sigma;
      const auto A = chain.evaluate_with_jacobian(xi, eta).second;
      audit.norm = std::max(audit.norm, row_sum_norm(A));
      audit.defect = std::max(audit.defect, row_sum_norm(A - E));
      int j = n - 1;
      while (j >= 0 && corner[j] == 1) corner[j--] = -1;
      if (j < 0) break;
      corner[j] += 2;
    }
  }
  const double rate = window.K_bound > 0.0 ? 2.0 * n * window.K_bound / (window.delta * window.sigma)
                                           : 0.0;
  audit.norm_bound = std::exp(rate);
  audit.defect_bound = rate * std::exp(rate);
  audit.pass = audit.norm <= audit.norm_bound * (1.0 + 1e-12) &&
               audit.defect <= audit.defect_bound + 1e-12;
  return audit;
}

nlohmann::json to_json(const SimpleCanonicalMap& Z) {
  nlohmann::json Xp = nlohmann::json::array(), Y0 = nlohmann::json::array(),
                 Jinv = nlohmann::json::array();
  for (const auto& f : Z.Xp) Xp.push_back(to_json(f));
  for (const auto& f : Z.Y0) Y0.push_back(to_json(f));
  for (const auto& row : Z.Jinv) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& f : row) r.push_back(to_json(f));
    Jinv.push_back(r);
  }
  return {{"Xp", Xp},
          {"Y0", Y0},
          {"Jinv", Jinv},
          {"grid_meta",
           {{"grid_size", Z.meta.grid_size},
            {"steps", Z.meta.steps},
            {"integrator", Z.meta.integrator},
            {"taylor_order", Z.meta.taylor_order},
            {"halving_change", Z.meta.halving_change},
            {"truncation_loss", Z.meta.truncation_loss},
            {"max_displacement", Z.meta.max_displacement},
            {"max_momentum", Z.meta.max_momentum}}}};
}

SimpleCanonicalMap map_from_json(const nlohmann::json& j) {
  SimpleCanonicalMap Z;
  try {
    for (const auto& f : j.at("Xp")) Z.Xp.push_back(series_from_json(f));
    for (const auto& f : j.at("Y0")) Z.Y0.push_back(series_from_json(f));
    for (const auto& row : j.at("Jinv")) {
      std::vector<FTSeries> r;
      for (const auto& f : row) r.push_back(series_from_json(f));
      Z.Jinv.push_back(std::move(r));
    }
    const auto& m = j.at("grid_meta");
    Z.meta.grid_size = m.at("grid_size").get<int>();
    Z.meta.steps = m.at("steps").get<int>();
    Z.meta.integrator = m.at("integrator").get<std::string>();
    Z.meta.taylor_order = m.value("taylor_order", -1);
    Z.meta.halving_change = m.value("halving_change", -1.0);
    Z.meta.truncation_loss = m.value("truncation_loss", 0.0);
    Z.meta.max_displacement = m.value("max_displacement", 0.0);
    Z.meta.max_momentum = m.value("max_momentum", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed canonical map JSON: ") + e.what());
  }
  const std::size_t n = Z.Xp.size();
  if (Z.Y0.size() != n || Z.Jinv.size() != n)
    throw ValidationError("canonical map components have inconsistent sizes");
  for (const auto& row : Z.Jinv)
    if (row.size() != n) throw ValidationError("Jinv must be n x n");
  return Z;
}

nlohmann::json to_json(const Chain& chain) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < chain.size(); ++i) out.push_back(to_json(chain.map(i)));
  return out;
}

}  // namespace kam
