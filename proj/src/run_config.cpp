#include "kam/run_config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace kam {

namespace {

using nlohmann::json;

const std::set<std::string> kKeys = {
    "preset", "n",         "tau",       "gamma",     "omega",     "a",
    "Q",      "C",         "R",         "r",         "s",         "theta",
    "K_max",  "D_max",     "grid_size", "ode_steps", "k_max",     "mode",
    "c6",     "seed",      "cert_kmax", "rho_measure", "sigma_measure", "floor_rel",
    "diagnostic_samples"};

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw ValidationError("config field '" + field + "': " + why);
}

template <typename T>
T get(const json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    bad(field, "has the wrong type");
  }
}

std::optional<double> optional_number(const json& j, const std::string& field) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_number()) bad(field, "must be a number or null");
  return j.get<double>();
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) bad(field, "must be a nonempty array of rows");
  const auto rows = j.size();
  const auto cols = j[0].is_array() ? j[0].size() : 0;
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) bad(field, "rows must have equal length");
    for (std::size_t k = 0; k < cols; ++k) {
      if (!j[i][k].is_number()) bad(field, "entries must be numbers");
      m(i, k) = j[i][k].get<double>();
    }
  }
  return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    out.push_back(row);
  }
  return out;
}

std::string position(const std::string& text, std::size_t byte) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

}  // namespace

void RunConfig::validate() const {
  if (n < 2) bad("n", "must be >= 2");
  if (!(tau >= n - 1)) bad("tau", "must be >= n-1");
  if (gamma && !(*gamma > 0.0)) bad("gamma", "must be > 0");
  if (omega_name.has_value() == !omega.empty()) bad("omega", "give a catalog name or a vector");
  if (!omega.empty() && static_cast<int>(omega.size()) != n) bad("omega", "must have n entries");
  if (!std::isfinite(a)) bad("a", "must be finite");
  if (!(r > 0.0)) bad("r", "must be > 0");
  if (!(s > 0.0)) bad("s", "must be > 0");
  const double rt = std::pow(r, tau + 1.0);
  if (!(s <= rt)) bad("s", "must satisfy s <= r^(tau+1)");
  if (!(rt <= 1.0)) bad("r", "must satisfy r^(tau+1) <= 1");
  if (theta && !(*theta > 0.0)) bad("theta", "must be > 0");
  if (K_max < 1) bad("K_max", "must be >= 1");
  if (D_max < 2) bad("D_max", "must be >= 2");
  if (grid_size <= 2 * K_max) bad("grid_size", "must exceed 2 K_max");
  if (ode_steps < 1) bad("ode_steps", "must be >= 1");
  if (k_max < 0) bad("k_max", "must be >= 0");
  if (c6 && !(*c6 > 0.0)) bad("c6", "must be > 0");
  if (cert_kmax < 1) bad("cert_kmax", "must be >= 1");
  if (rho_measure && !(*rho_measure > 0.0 && *rho_measure <= r)) bad("rho_measure", "must lie in (0, r]");
  if (sigma_measure && !(*sigma_measure > 0.0 && *sigma_measure <= s))
    bad("sigma_measure", "must lie in (0, s]");
  if (!(floor_rel >= 0.0)) bad("floor_rel", "must be >= 0");
  if (diagnostic_samples < 1) bad("diagnostic_samples", "must be >= 1");
  if (C && (C->rows() != n || C->cols() != n)) bad("C", "must be n x n");
  if (R.series) {
    if (!R.series->is_object()) bad("R", "series must be an object");
  } else {
    if (!std::isfinite(R.epsilon)) bad("R", "epsilon must be finite");
    if (R.preset != "cos-sum-linear" && R.preset != "cos-x0" && R.preset != "zero")
      bad("R", "unknown preset '" + R.preset + "'");
  }
  if (Q.is_string()) {
    if (Q.get<std::string>() != "identity") bad("Q", "the only named value is \"identity\"");
  } else if (!Q.is_array() || static_cast<int>(Q.size()) != n) {
    bad("Q", "must be \"identity\" or an n x n array");
  }
}

std::vector<std::string> preset_names() { return {"golden-2d", "sqrt2-2d"}; }

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  if (name == "golden-2d") {
    c.omega_name = "golden";
  } else if (name == "sqrt2-2d") {
    c.omega_name = "sqrt2";
  } else {
    bad("preset", "unknown preset '" + name + "'");
  }
  c.preset = name;
  return c;
}

FTSeries remainder_preset(const std::string& name, int n, double epsilon) {
  FTSeries R(n, 1, 1);
  if (name == "zero" || epsilon == 0.0) return R;
  const Lattice zero(n, 0);
  Lattice y0(n, 0);
  y0[0] = 1;
  if (name == "cos-x0") {
    Lattice k(n, 0);
    k[0] = 1;
    return FTSeries::cosine(n, k, epsilon);
  }
  if (name != "cos-sum-linear") throw ValidationError("unknown remainder preset '" + name + "'");
  Lattice k(n, 0);
  for (int j = 0; j < n; ++j) {
    k[j] = 1;
    const FTSeries c = FTSeries::cosine(n, k, epsilon);
    for (const auto& [key, v] : c.terms()) {
      R.add(key.k, zero, v);
      R.add(key.k, y0, v);
    }
  }
  return R;
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!kKeys.count(key)) throw ValidationError("unknown config key '" + key + "'");

  RunConfig c;
  if (j.contains("preset") && !j["preset"].is_null())
    c = preset_config(get<std::string>(j["preset"], "preset"));
  if (j.contains("n")) c.n = get<int>(j["n"], "n");
  if (j.contains("tau")) c.tau = get<double>(j["tau"], "tau");
  if (j.contains("gamma")) c.gamma = optional_number(j["gamma"], "gamma");
  if (j.contains("omega")) {
    const auto& w = j["omega"];
    if (w.is_string()) {
      c.omega_name = w.get<std::string>();
      c.omega.clear();
    } else if (w.is_array()) {
      c.omega_name.reset();
      c.omega = get<std::vector<double>>(w, "omega");
    } else {
      bad("omega", "must be a catalog name or an array of numbers");
    }
  }
  if (j.contains("a")) c.a = get<double>(j["a"], "a");
  if (j.contains("Q")) c.Q = j["Q"];
  if (j.contains("C")) {
    if (j["C"].is_null())
      c.C.reset();
    else
      c.C = matrix_from_json(j["C"], "C");
  }
  if (j.contains("R")) {
    const auto& R = j["R"];
    if (!R.is_object()) bad("R", "must be an object");
    for (const auto& [key, value] : R.items())
      if (key != "preset" && key != "epsilon" && key != "series") bad("R", "unknown key '" + key + "'");
    RemainderSpec spec;
    if (R.contains("series")) {
      if (R.contains("preset") || R.contains("epsilon")) bad("R", "give either series or preset/epsilon");
      spec.series = R["series"];
    } else {
      if (R.contains("preset")) spec.preset = get<std::string>(R["preset"], "R.preset");
      if (R.contains("epsilon")) spec.epsilon = get<double>(R["epsilon"], "R.epsilon");
    }
    c.R = spec;
  }
  if (j.contains("r")) c.r = get<double>(j["r"], "r");
  if (j.contains("s")) c.s = get<double>(j["s"], "s");
  if (j.contains("theta")) c.theta = optional_number(j["theta"], "theta");
  if (j.contains("K_max")) c.K_max = get<int>(j["K_max"], "K_max");
  if (j.contains("D_max")) c.D_max = get<int>(j["D_max"], "D_max");
  if (j.contains("grid_size")) c.grid_size = get<int>(j["grid_size"], "grid_size");
  if (j.contains("ode_steps")) c.ode_steps = get<int>(j["ode_steps"], "ode_steps");
  if (j.contains("k_max")) c.k_max = get<int>(j["k_max"], "k_max");
  if (j.contains("mode")) c.mode = mode_from_string(get<std::string>(j["mode"], "mode"));
  if (j.contains("c6")) c.c6 = optional_number(j["c6"], "c6");
  if (j.contains("seed")) c.seed = get<std::uint64_t>(j["seed"], "seed");
  if (j.contains("cert_kmax")) c.cert_kmax = get<int>(j["cert_kmax"], "cert_kmax");
  if (j.contains("rho_measure")) c.rho_measure = optional_number(j["rho_measure"], "rho_measure");
  if (j.contains("sigma_measure"))
    c.sigma_measure = optional_number(j["sigma_measure"], "sigma_measure");
  if (j.contains("floor_rel")) c.floor_rel = get<double>(j["floor_rel"], "floor_rel");
  if (j.contains("diagnostic_samples"))
    c.diagnostic_samples = get<int>(j["diagnostic_samples"], "diagnostic_samples");
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(); };
  json R;
  if (c.R.series)
    R = {{"series", *c.R.series}};
  else
    R = {{"preset", c.R.preset}, {"epsilon", c.R.epsilon}};
  json j = {{"preset", c.preset ? json(*c.preset) : json()},
            {"n", c.n},
            {"tau", c.tau},
            {"gamma", opt(c.gamma)},
            {"omega", c.omega_name ? json(*c.omega_name) : json(c.omega)},
            {"a", c.a},
            {"Q", c.Q},
            {"C", c.C ? matrix_to_json(*c.C) : json()},
            {"R", R},
            {"r", c.r},
            {"s", c.s},
            {"theta", opt(c.theta)},
            {"K_max", c.K_max},
            {"D_max", c.D_max},
            {"grid_size", c.grid_size},
            {"ode_steps", c.ode_steps},
            {"k_max", c.k_max},
            {"mode", to_string(c.mode)},
            {"c6", opt(c.c6)},
            {"seed", c.seed},
            {"cert_kmax", c.cert_kmax},
            {"rho_measure", opt(c.rho_measure)},
            {"sigma_measure", opt(c.sigma_measure)},
            {"floor_rel", c.floor_rel},
            {"diagnostic_samples", c.diagnostic_samples}};
  return j;
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("malformed config JSON at " + position(text, e.byte > 0 ? e.byte - 1 : 0) +
                          ": " + e.what());
  }
  return config_from_json(j);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("cannot read config file '" + path + "'");
  return parse_config(buf.str());
}

HamiltonianDecomposition build_hamiltonian(const RunConfig& c) {
  c.validate();
  const int n = c.n;
  FrequencyVector omega;
  if (c.omega_name) {
    omega = catalog(*c.omega_name);
    if (omega.dim() != n) bad("omega", "catalog entry has the wrong dimension");
  } else {
    omega.omega = c.omega;
  }
  omega.tau = c.tau;
  omega.gamma_claimed = c.gamma;

  SeriesMatrix Q(n, std::vector<FTSeries>(n, FTSeries(n, 0, 0)));
  if (c.Q.is_string()) {
    for (int i = 0; i < n; ++i) Q[i][i] = FTSeries::constant(n, 1.0);
  } else {
    for (int i = 0; i < n; ++i) {
      const auto& row = c.Q[i];
      if (!row.is_array() || static_cast<int>(row.size()) != n) bad("Q", "must be n x n");
      for (int k = 0; k < n; ++k) {
        if (row[k].is_number())
          Q[i][k] = FTSeries::constant(n, row[k].get<double>());
        else if (row[k].is_object())
          Q[i][k] = series_from_json(row[k]);
        else
          bad("Q", "entries must be numbers or series objects");
      }
    }
  }

  FTSeries R = c.R.series ? series_from_json(*c.R.series) : remainder_preset(c.R.preset, n, c.R.epsilon);
  if (!R.empty() && R.dim() != n) bad("R", "series dimension differs from n");
  if (R.max_mode() > c.K_max) bad("R", "series has modes beyond K_max");
  if (R.max_degree() > c.D_max) bad("R", "series has degree beyond D_max");
  return HamiltonianDecomposition::assemble(c.a, std::move(omega), std::move(Q), std::move(R),
                                            {c.r, c.s});
}

EngineOptions engine_options(const RunConfig& c) {
  EngineOptions o;
  o.mode = c.mode;
  o.theta = c.theta;
  o.k_max = c.k_max;
  o.limits = {c.K_max, c.D_max};
  o.grid_size = c.grid_size;
  o.ode_steps = c.ode_steps;
  o.C = c.C;
  o.c6 = c.c6;
  o.cert_kmax = c.cert_kmax;
  o.rho_measure = c.rho_measure;
  o.sigma_measure = c.sigma_measure;
  o.floor_rel = c.floor_rel;
  o.seed = c.seed;
  o.diagnostic_samples = c.diagnostic_samples;
  return o;
}

EngineSetup resolve(const RunConfig& c) { return prepare_run(build_hamiltonian(c), engine_options(c)); }

}  // namespace kam
