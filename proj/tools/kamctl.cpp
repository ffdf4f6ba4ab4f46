// Command line front end: run, certify-frequency, constants, selftest.
#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <sstream>

#include "kam/diophantine.hpp"
#include "kam/kam_engine.hpp"
#include "kam/report_io.hpp"
#include "kam/run_config.hpp"
#include "kam/selftest.hpp"

namespace {

enum Exit { kOk = 0, kHypothesis = 1, kNumerical = 2, kIo = 3 };

std::vector<double> parse_csv(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size() && item.find_first_not_of(" \t", used) != std::string::npos)
        throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw kam::ValidationError("cannot parse '" + item + "' as a number");
    }
  }
  if (out.empty()) throw kam::ValidationError("empty frequency vector");
  return out;
}

int cmd_run(const std::string& config_path, const std::string& out_path,
            const std::string& csv_path) {
  const auto config = kam::load_config(config_path);
  const auto setup = kam::resolve(config);
  for (const auto& w : setup.warnings) std::cerr << "warning: " << w << "\n";
  auto report = kam::run(setup);
  if (!report.failure && !report.steps.empty())
    report.verdict = kam::verify_main_theorem(report, setup.chain, setup.theta, config.seed);
  if (!out_path.empty()) kam::write_text(out_path, kam::report_to_json(config, report).dump(2) + "\n");
  if (!csv_path.empty()) kam::write_text(csv_path, kam::report_csv(report));

  std::cout << "steps: " << report.steps.size() << " (" << report.termination << ")\n";
  for (std::size_t k = 0; k < report.R_majorants.size(); ++k)
    std::cout << "  |R_" << k << "| = " << report.R_majorants[k] << "\n";
  const double p = kam::quadratic_exponent(report.R_majorants);
  if (std::isfinite(p)) std::cout << "quadratic exponent: " << p << "\n";
  if (report.verdict)
    std::cout << "main-theorem estimates: " << (report.verdict->pass ? "pass" : "fail")
              << (report.verdict->hypotheses_hold ? "" : " (hypotheses not met)") << "\n";
  if (report.failure) {
    std::cerr << "step aborted (" << report.failure->kind << "): " << report.failure->message << "\n";
    return report.failure->kind == "hypothesis" ? kHypothesis : kNumerical;
  }
  return kOk;
}

int cmd_certify(const std::string& omega_text, double tau, int kmax) {
  const auto omega = parse_csv(omega_text);
  const auto cert = kam::certify(omega, tau, kmax);
  std::cout << kam::to_json(cert).dump() << "\n";
  return cert.gamma_min > 0.0 ? kOk : kHypothesis;
}

int cmd_constants(const std::string& config_path) {
  const auto config = kam::load_config(config_path);
  const auto setup = kam::resolve(config);
  for (const auto& w : setup.warnings) std::cerr << "warning: " << w << "\n";
  nlohmann::json j = {{"constants", kam::to_json(setup.chain)},
                      {"theta", setup.theta},
                      {"schedule", setup.schedule ? kam::to_json(*setup.schedule) : nlohmann::json()}};
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int cmd_selftest() {
  int failed = 0;
  for (const auto& c : kam::run_selftest()) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) std::cout << "  [" << c.detail << "]";
    std::cout << "\n";
    failed += c.pass ? 0 : 1;
  }
  std::cout << (failed ? "selftest failed: " + std::to_string(failed) + " case(s)\n"
                       : std::string("selftest passed\n"));
  return failed ? kNumerical : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KAM iteration driver"};
  app.require_subcommand(1);

  std::string config_path, out_path, csv_path;
  auto* run = app.add_subcommand("run", "iterate the KAM step and write a report");
  run->add_option("--config", config_path, "run configuration (JSON)")->required();
  run->add_option("--out", out_path, "report JSON path");
  run->add_option("--csv", csv_path, "per-step CSV path");

  std::string omega_text;
  double tau = 1.0;
  int kmax = 100;
  auto* cert = app.add_subcommand("certify-frequency", "scan small divisors of a frequency vector");
  cert->add_option("--omega", omega_text, "comma-separated frequencies")->required();
  cert->add_option("--tau", tau, "Diophantine exponent");
  cert->add_option("--kmax", kmax, "scan box |k|_inf <= kmax");

  std::string constants_path;
  auto* constants = app.add_subcommand("constants", "print the constants chain for a config");
  constants->add_option("--config", constants_path, "run configuration (JSON)")->required();

  auto* selftest = app.add_subcommand("selftest", "run the built-in guard examples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kHypothesis;
  }

  try {
    if (*run) return cmd_run(config_path, out_path, csv_path);
    if (*cert) return cmd_certify(omega_text, tau, kmax);
    if (*constants) return cmd_constants(constants_path);
    if (*selftest) return cmd_selftest();
  } catch (const kam::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const kam::HypothesisError& e) {
    std::cerr << "hypothesis violated: " << e.what() << "\n";
    return kHypothesis;
  } catch (const kam::ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kHypothesis;
  } catch (const kam::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  }
  return kOk;
}
