#pragma once

#include <functional>
#include <string>
#include <vector>

namespace cond::verify {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  double limit_seconds = 0.0;
};

struct Options {
  std::string scenario_dir;
  /// Only run these criterion ids; empty runs all.
  std::vector<int> only;
  /// Called as each criterion finishes.
  std::function<void(const CriterionResult&)> on_result;
};

std::vector<CriterionResult> run_acceptance(const Options& options);

/// One line per criterion: "[PASS] 3 strict SCC exactness: ... (0.12 s / 1 s)".
std::string format_line(const CriterionResult& r);

}  // namespace cond::verify
