#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gambo {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Fast oracle suites: finite-difference gradients, exact W1 against
/// permutation brute force, GP interpolation, motif maximum against a chain
/// dynamic program, alpha grid replay and checkpoint round trips.
/// `checkpoint`, when given, must load cleanly as well.
std::vector<CheckResult> run_selfcheck(const std::optional<std::filesystem::path>& checkpoint = std::nullopt);

}  // namespace gambo
