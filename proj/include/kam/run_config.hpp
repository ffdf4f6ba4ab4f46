#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "kam/kam_engine.hpp"

namespace kam {

/// Remainder specification: a named preset scaled by epsilon, or an inline series.
struct RemainderSpec {
  std::string preset = "cos-sum-linear";
  double epsilon = 1e-5;
  std::optional<nlohmann::json> series;
};

struct RunConfig {
  std::optional<std::string> preset;
  int n = 2;
  double tau = 1.0;
  std::optional<double> gamma;
  /// Catalog name or explicit vector; exactly one is set.
  std::optional<std::string> omega_name;
  std::vector<double> omega;
  double a = 0.0;
  /// "identity", an n x n array of numbers, or an n x n array of series.
  nlohmann::json Q = "identity";
  std::optional<Eigen::MatrixXd> C;
  RemainderSpec R;
  double r = 1.0;
  double s = 0.05;
  std::optional<double> theta;
  int K_max = 8;
  int D_max = 4;
  int grid_size = 32;
  int ode_steps = 16;
  int k_max = 6;
  Mode mode = Mode::Measured;
  std::optional<double> c6;
  std::uint64_t seed = 1;
  int cert_kmax = 100;
  std::optional<double> rho_measure;
  std::optional<double> sigma_measure;
  double floor_rel = 2.220446049250313e-16;
  int diagnostic_samples = 50;

  /// Throws ValidationError naming the offending field.
  void validate() const;
};

/// Named configurations: "golden-2d", "sqrt2-2d".
RunConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

/// Named remainders: "cos-sum-linear" = eps (sum_j cos(x_0 + ... + x_j)) (1 + y_0),
/// "cos-x0" = eps cos(x_0), "zero".
FTSeries remainder_preset(const std::string& name, int n, double epsilon);

/// Keys absent from j keep the preset (if "preset" is given) or built-in
/// defaults. Unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);

/// Throws IoError for unreadable files, ValidationError with line and column
/// for malformed JSON or invalid fields.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text);

HamiltonianDecomposition build_hamiltonian(const RunConfig& config);
EngineOptions engine_options(const RunConfig& config);
EngineSetup resolve(const RunConfig& config);

}  // namespace kam
