#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "kam/fourier_taylor.hpp"
#include "kam/linearized.hpp"

namespace kam {

/// Time budget of the flow of dS: it exists on [0, horizon) with
/// horizon = sigma*delta / (2 K_bound).
struct FlowWindow {
  double K_bound = 0.0;
  double delta = 0.0;
  double sigma = 0.0;
  double horizon = 0.0;
};

/// K = lipschitz * M * delta / s with sigma = s/4; lipschitz is c7 + c8.
/// Throws NumericalError when the horizon is <= 1.
FlowWindow flow_window(double lipschitz, double M, double s, double delta);

/// Same window with K from measured majorants:
/// K = max(delta |dS_x|_{D(rho,s)}, sigma |dS_y|_{S(rho)}), sigma = s/4.
FlowWindow measured_flow_window(const GeneratingFunction& dS, double rho, double s, double delta);

struct GridMeta {
  int grid_size = 0;
  int steps = 0;
  std::string integrator = "rk4";
  /// Order of the local Taylor evaluator, or -1 for direct Fourier summation.
  int taylor_order = -1;
  /// Largest nodal change of (X, Y0) when the step count is doubled; -1 if not run.
  double halving_change = -1.0;
  double truncation_loss = 0.0;
  double max_displacement = 0.0;
  double max_momentum = 0.0;
};

/// Z(xi, eta) = (X(xi), Y(xi, eta)) with X = xi + Xp(xi) and
/// Y(xi, eta) = Y0(xi) + eta . Jinv(xi), Jinv = X_xi^{-1}.
struct SimpleCanonicalMap {
  std::vector<FTSeries> Xp;
  std::vector<FTSeries> Y0;
  SeriesMatrix Jinv;
  /// Jinv - E with relative (not absolute) precision in the small entries.
  SeriesMatrix Jinv_offset;
  GridMeta meta;

  int dim() const { return static_cast<int>(Xp.size()); }
  /// Jinv_offset when present, otherwise Jinv - E.
  SeriesMatrix jinv_offset() const;

  static SimpleCanonicalMap identity(int n);
  /// X = xi + c, Y = eta.
  static SimpleCanonicalMap shift(const std::vector<double>& c);
};

struct PhasePoint {
  std::vector<double> x;
  std::vector<double> y;
};

/// Row-sum norm of A^T J A - J, J = [[0, E], [-E, 0]].
double symplectic_defect(const Eigen::MatrixXd& A);

struct FlowOptions {
  /// Retained Fourier cutoff of the map series; -1 means grid_size/2 - 1.
  int K_keep = -1;
  /// Repeat the integration with twice the steps and record the change.
  bool self_check = true;
};

/// Time-1 map of x' = V(x), y' = -(lambda + U_x(x) + y V_x(x)) sampled on a
/// uniform grid with classical RK4. Throws NumericalError on domain escape
/// (|x - xi| > delta/2 or |y| > sigma/2 from the window).
SimpleCanonicalMap integrate_flow(const GeneratingFunction& dS, int grid_size, int steps,
                                  const FlowWindow& window, const FlowOptions& options = {});

/// Full 2n-dimensional RK4 integration of one initial point (reference path).
PhasePoint flow_point(const GeneratingFunction& dS, const std::vector<double>& xi,
                      const std::vector<double>& eta, int steps);

/// Ordered list of maps W = Z_1 o Z_2 o ... o Z_k with cached derivative series.
class Chain {
 public:
  Chain() = default;
  explicit Chain(std::vector<SimpleCanonicalMap> maps);

  std::size_t size() const { return maps_.size(); }
  const SimpleCanonicalMap& map(std::size_t i) const;
  /// First k maps.
  Chain prefix(std::size_t k) const;

  PhasePoint evaluate(const std::vector<double>& xi, const std::vector<double>& eta) const;
  /// Like evaluate, but x holds X - xi summed map by map (no cancellation
  /// against xi).
  PhasePoint evaluate_displacement(const std::vector<double>& xi,
                                   const std::vector<double>& eta) const;
  /// Point and 2n x 2n Jacobian (product rule, right to left).
  std::pair<PhasePoint, Eigen::MatrixXd> evaluate_with_jacobian(
      const std::vector<double>& xi, const std::vector<double>& eta) const;

 private:
  struct Entry;
  std::vector<std::shared_ptr<const Entry>> maps_;
};

Chain compose(std::vector<SimpleCanonicalMap> maps);
PhasePoint evaluate_chain(const Chain& chain, const std::vector<double>& xi,
                          const std::vector<double>& eta);

PhasePoint apply(const SimpleCanonicalMap& Z, const std::vector<double>& xi,
                 const std::vector<double>& eta);
Eigen::MatrixXd jacobian(const SimpleCanonicalMap& Z, const std::vector<double>& xi,
                         const std::vector<double>& eta);

/// Max symplectic defect over seeded real samples with |eta|_inf <= eta_radius.
double check_symplectic(const SimpleCanonicalMap& Z, int samples, std::uint64_t seed = 1,
                        double eta_radius = 0.0);

struct JacobianAudit {
  double norm = 0.0;
  double defect = 0.0;
  double norm_bound = 0.0;
  double defect_bound = 0.0;
  bool pass = false;
};

/// Compares |Z_zeta| and |Z_zeta - E| (max over grid nodes and the corners of
/// |eta|_inf <= window.sigma) with exp(2nK/(delta sigma)) and
/// 2nK/(delta sigma) exp(2nK/(delta sigma)).
JacobianAudit jacobian_growth_audit(const SimpleCanonicalMap& Z, const FlowWindow& window);

nlohmann::json to_json(const SimpleCanonicalMap& Z);
SimpleCanonicalMap map_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Chain& chain);

}  // namespace kam
