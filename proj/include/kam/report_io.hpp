#pragma once

#include <string>

#include <json.hpp>

#include "kam/kam_engine.hpp"
#include "kam/run_config.hpp"

namespace kam {

/// {config, certification, constants, schedule, warnings, steps, summary,
/// diagnostics, verdict, failure, chain}
nlohmann::json report_to_json(const RunConfig& config, const RunReport& report);

/// Columns: k, r_k, delta_k, s_k, M_k_sched, R_majorant, ratio_rho_k, a_k, Q_drift.
std::string report_csv(const RunReport& report);

/// Writes text to path; throws IoError on failure.
void write_text(const std::string& path, const std::string& text);

/// Fixed-format number used in the CSV (%.17g); empty for NaN.
std::string format_number(double value);

}  // namespace kam
