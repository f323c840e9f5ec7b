#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ipula/config.hpp"

namespace ipula {

// One inequality checked by the suite. `bound` and `observed` are the values
// at the worst point found; margin = bound - observed unless noted in
// `detail`.
struct CheckResult {
  std::string name;
  std::string group;
  double bound = 0.0;
  double observed = 0.0;
  double margin = 0.0;
  bool pass = false;
  bool skipped = false;
  std::string detail;
};

// Check groups in suite order.
const std::vector<std::string>& verify_groups();

// Fixture constants shared by the transfer, adaptive and gap groups.
struct QuadraticFixture {
  std::size_t dimension = 10;
  double sigma = 1.0;
  double gamma = 1.0;
  double eta = 0.1;
};

std::vector<CheckResult> check_moreau_identities(std::uint64_t seed);
std::vector<CheckResult> check_residual_soundness(const VerifySpec& spec,
                                                  std::uint64_t seed);
std::vector<CheckResult> check_fixed_transfer(const VerifySpec& spec,
                                              std::uint64_t seed,
                                              std::size_t threads);
std::vector<CheckResult> check_adaptive_transfer(const VerifySpec& spec,
                                                 std::uint64_t seed,
                                                 std::size_t threads);
std::vector<CheckResult> check_objective_gap(const VerifySpec& spec,
                                             std::uint64_t seed,
                                             std::size_t threads);
std::vector<CheckResult> check_step_matched_scaling();
std::vector<CheckResult> check_stationary_1d(const VerifySpec& spec,
                                             std::uint64_t seed,
                                             std::size_t threads);

// Runs the selected groups (spec.checks; empty = all). Unselected groups
// appear as skipped entries.
std::vector<CheckResult> run_verify_suite(const VerifySpec& spec,
                                          std::uint64_t seed,
                                          std::size_t threads);

// Conjunction of all results; a skipped check fails unless allow_skips.
bool suite_passes(const std::vector<CheckResult>& results, bool allow_skips);

}  // namespace ipula
