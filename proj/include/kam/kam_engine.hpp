#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "kam/canonical_flow.hpp"
#include "kam/constants.hpp"
#include "kam/diophantine.hpp"
#include "kam/fourier_taylor.hpp"
#include "kam/linearized.hpp"
#include "kam/spectral_grid.hpp"

namespace kam {

struct DomainSpec {
  double r = 1.0;
  double s = 0.05;
};

/// H = a + <omega,y> + 1/2 <y.Q(x), y> + R
struct HamiltonianDecomposition {
  FTSeries H;
  double a = 0.0;
  FrequencyVector omega;
  SeriesMatrix Q;
  FTSeries R;
  DomainSpec domain;

  int dim() const { return omega.dim(); }
  /// a + <omega,y> + 1/2 <y.Q(x), y>
  FTSeries normal_part() const;
  /// Checks the decomposition identity and the symmetry of Q.
  void validate() const;

  static HamiltonianDecomposition assemble(double a, FrequencyVector omega, SeriesMatrix Q,
                                           FTSeries R, DomainSpec domain);
};

enum class Mode { Schedule, Measured };
std::string to_string(Mode mode);
Mode mode_from_string(const std::string& name);

struct EngineOptions {
  Mode mode = Mode::Measured;
  /// Defaults to c1.
  std::optional<double> theta;
  int k_max = 6;
  TruncationLimits limits{8, 4};
  int grid_size = 32;
  int ode_steps = 16;
  std::optional<Eigen::MatrixXd> C;
  std::optional<double> c6;
  int cert_kmax = 100;
  /// Fixed measurement domain of measured mode; defaults r/2 and s/2.
  std::optional<double> rho_measure;
  std::optional<double> sigma_measure;
  /// Stop when |R_k| drops below floor_rel * |R_0|; machine epsilon by default.
  double floor_rel = 2.220446049250313e-16;
  std::uint64_t seed = 1;
  int diagnostic_samples = 50;
};

struct EngineSetup {
  HamiltonianDecomposition H0;
  EngineOptions options;
  Eigen::MatrixXd C;
  ConstantsChain chain;
  double theta = 0.0;
  std::optional<Schedule> schedule;
  double rho_measure = 0.0;
  double sigma_measure = 0.0;
  /// |R|_{D(r,s)}
  double M_initial = 0.0;
  /// |Q - C|_{S(r)} against 1/(4|C^{-1}|)
  double nondegeneracy_lhs = 0.0;
  double nondegeneracy_rhs = 0.0;
  bool hypotheses_hold = false;
  std::vector<std::string> warnings;
};

/// Certifies omega, fills C and c6, builds the constants chain and (schedule
/// mode) the schedule. Resonant omega raises ResonanceError; violated
/// hypotheses raise HypothesisError in schedule mode and become warnings in
/// measured mode, except the nondegeneracy condition which always raises.
EngineSetup prepare_run(HamiltonianDecomposition H0, EngineOptions options);

struct IterateState {
  FTSeries N;
  FTSeries R;
  double a = 0.0;
};

/// Domains of one step. In schedule mode (rho, sigma, delta) = (r_k, s_k,
/// delta_k); in measured mode they stay fixed with delta = rho/8.
struct StepGeometry {
  double rho = 0.0;
  double sigma = 0.0;
  double delta = 0.0;
  double rho_next = 0.0;
  double sigma_next = 0.0;
  std::optional<double> M_schedule;
};

struct EstimateAudit {
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct StepReport {
  int k = 0;
  StepGeometry geometry;
  double R_majorant = 0.0;
  double R_next_majorant = 0.0;
  double Sx_majorant = 0.0;
  double Sy_majorant = 0.0;
  double deltaN0 = 0.0;
  double deltaN_variation = 0.0;
  double deltaN_yy = 0.0;
  double Z_minus_E = 0.0;
  double Z_norm = 0.0;
  double value_residual = 0.0;
  double gradient_residual = 0.0;
  double a = 0.0;
  double a_next = 0.0;
  double Q_drift = 0.0;
  double hessian_gap = 0.0;
  /// |R_+| s^2 / |R|^2
  double quadratic_ratio = 0.0;
  double truncation_loss = 0.0;
  double flow_horizon = 0.0;
  double halving_change = 0.0;
  int taylor_order = -1;
  double composition_error = 0.0;
  /// Chain-constant form of |R| <= s^2 / (16(c7+c8)); enforced only in schedule mode.
  bool smallness_chain_form = false;
  std::vector<EstimateAudit> audits;
};

struct StepResult {
  SimpleCanonicalMap Z;
  /// Generator of Z and the unprojected normal-form correction.
  GeneratingFunction dS;
  FTSeries deltaN;
  IterateState next;
  StepReport report;
};

StepGeometry step_geometry(const EngineSetup& setup, int k);

/// One Newton step: H_k = N + R -> H_k o Z = N_+ + R_+.
StepResult kam_step(const IterateState& state, const StepGeometry& geometry,
                    const EngineSetup& setup, int k);

/// (H o Z) - H computed at grid nodes from differences, then truncated to
/// |k|_inf <= K and degree <= D.
GridProjection composition_delta(const FTSeries& H, const SimpleCanonicalMap& Z, int grid_size,
                                 int K, int D);

struct EstimateVerdict {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  bool pass = false;
};

struct TheoremVerdict {
  double theta = 0.0;
  /// max(theta, M/(c2 s^2)); the bounds are evaluated with this value.
  double theta_effective = 0.0;
  bool hypotheses_hold = false;
  EstimateVerdict trafo, hesse, tayl3;
  bool pass = false;
};

struct RunFailure {
  std::string kind;  // "hypothesis" or "numerical"
  std::string message;
};

struct RunReport {
  EngineSetup setup;
  std::vector<StepReport> steps;
  Chain W;
  /// dS of each completed step, in order.
  std::vector<GeneratingFunction> generators;
  /// |R_k| on the measurement domain of step k, k = 0..steps.
  std::vector<double> R_majorants;
  std::vector<double> a_values;
  IterateState final_state;
  double floor = 0.0;
  std::string termination;
  std::optional<RunFailure> failure;
  /// Torus residual of W_1 .. W_K.
  std::vector<double> torus_residuals;
  std::optional<TheoremVerdict> verdict;
};

RunReport run(const EngineSetup& setup);

/// Least-squares slope of log|R_{k+1}| against log|R_k|; NaN with fewer than two pairs.
double quadratic_exponent(const std::vector<double>& majorants);

/// Max over sample times of |z' - J grad H(z)| along z(t) = W(omega t, 0),
/// with z' from central differences (step h) of the displacement.
double torus_residual(const Chain& W, const HamiltonianDecomposition& H0, int samples,
                      std::uint64_t seed, double h = 1e-4);

/// Max relative gap between H0(W(p)) and H(p) over seeded real points with
/// |eta|_inf <= eta_radius.
double composition_consistency(const Chain& W, const FTSeries& H0, const FTSeries& H,
                               int samples, std::uint64_t seed, double eta_radius);

TheoremVerdict verify_main_theorem(const RunReport& run, const ConstantsChain& chain,
                                   double theta, std::uint64_t seed = 1);

nlohmann::json to_json(const StepReport& report);
nlohmann::json to_json(const TheoremVerdict& verdict);

}  // namespace kam
