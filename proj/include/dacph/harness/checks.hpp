#pragma once

#include <string>
#include <vector>

#include "dacph/harness/config.hpp"

namespace dacph::harness {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Structural and numerical invariants of the configured system: port
// attainability, energy conservation and passivity, the ideal closed loop
// against its matrix exponential, Lyapunov decrease, shield box and forward
// invariance, and the excitation Gram metric.
std::vector<CheckResult> check_invariants(const RunConfig& cfg);

}  // namespace dacph::harness
