#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace vibias {

struct SuiteOptions {
  /// Test hook: replace the Gaussian fit by V + 0.1 I before the
  /// orthogonality check.
  bool inject_v_perturbation = false;
  std::uint64_t seed = 20240917;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string measured;
  std::string threshold;
  std::string detail;
};

struct SuiteResult {
  std::vector<CriterionResult> criteria;
  /// File name -> CSV content. Deterministic: no timings, fixed seeds.
  std::map<std::string, std::string> artifacts;

  bool all_pass() const;
};

/// Criteria 1 to 9 plus their CSV artifacts.
SuiteResult run_battery(const SuiteOptions& opts = {});

/// run_battery twice (criterion 10 compares the artifacts byte for byte),
/// then writes summary.csv and the artifacts into `out_dir`, creating it if
/// needed.
SuiteResult run_suite(const std::filesystem::path& out_dir, const SuiteOptions& opts = {});

std::string summary_csv(const SuiteResult& r);

}  // namespace vibias
