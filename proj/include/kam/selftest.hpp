#pragma once

#include <string>
#include <vector>

namespace kam {

struct SelftestCase {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Guard and fixed-point examples plus the constants-chain and series-tail checks.
std::vector<SelftestCase> run_selftest();

}  // namespace kam
