#include "kam/report_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace kam {

namespace {

using nlohmann::json;

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(); }

}  // namespace

nlohmann::json report_to_json(const RunConfig& config, const RunReport& report) {
  const auto& setup = report.setup;
  json steps = json::array();
  for (const auto& s : report.steps) steps.push_back(to_json(s));
  json torus = json::array();
  for (double t : report.torus_residuals) torus.push_back(finite_or_null(t));

  json cert;
  if (setup.H0.omega.certification) cert = to_json(*setup.H0.omega.certification);

  json j = {
      {"config", to_json(config)},
      {"certification", cert},
      {"gamma_used", setup.H0.omega.gamma()},
      {"constants", to_json(setup.chain)},
      {"schedule", setup.schedule ? to_json(*setup.schedule) : json()},
      {"theta", setup.theta},
      {"hypotheses",
       {{"M_initial", setup.M_initial},
        {"nondegeneracy_lhs", setup.nondegeneracy_lhs},
        {"nondegeneracy_rhs", setup.nondegeneracy_rhs},
        {"hold", setup.hypotheses_hold}}},
      {"measurement_domain", {{"rho", setup.rho_measure}, {"sigma", setup.sigma_measure}}},
      {"warnings", setup.warnings},
      {"steps", steps},
      {"summary",
       {{"completed_steps", report.steps.size()},
        {"termination", report.termination},
        {"floor", report.floor},
        {"R_majorants", report.R_majorants},
        {"a_values", report.a_values},
        {"quadratic_exponent", finite_or_null(quadratic_exponent(report.R_majorants))}}},
      {"diagnostics", {{"torus_residuals", torus}}},
      {"verdict", report.verdict ? to_json(*report.verdict) : json()},
      {"failure", report.failure ? json{{"kind", report.failure->kind},
                                        {"message", report.failure->message}}
                                 : json()},
      {"chain", to_json(report.W)}};
  return j;
}

std::string format_number(double value) {
  if (!std::isfinite(value)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string report_csv(const RunReport& report) {
  std::ostringstream out;
  out << "k,r_k,delta_k,s_k,M_k_sched,R_majorant,ratio_rho_k,a_k,Q_drift\n";
  for (const auto& s : report.steps) {
    const auto& g = s.geometry;
    out << s.k << ',' << format_number(g.rho) << ',' << format_number(g.delta) << ','
        << format_number(g.sigma) << ','
        << (g.M_schedule ? format_number(*g.M_schedule) : std::string()) << ','
        << format_number(s.R_majorant) << ',' << format_number(s.quadratic_ratio) << ','
        << format_number(s.a) << ',' << format_number(s.Q_drift) << '\n';
  }
  return out.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace kam
