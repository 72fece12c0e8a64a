#pragma once

#include <string>
#include <vector>

#include "skelact/gradcheck.hpp"
#include "skelact/model.hpp"

namespace skelact {

struct SuiteCheck {
  std::string name;
  GradCheckReport report;
  bool passed = false;
};

/// Finite-difference gradient verification over every layer type plus the
/// full two-branch model (selection frozen), at tiny shapes. The model check
/// uses the supplied config's structure. `corrupt_backward` deliberately
/// falsifies one analytic gradient as a negative control: the suite must
/// then fail.
std::vector<SuiteCheck> run_gradient_suite(const ModelConfig& config, double tolerance,
                                           bool corrupt_backward = false);

bool gradient_suite_passed(const std::vector<SuiteCheck>& checks);

/// Fixed-width table: one row per checked tensor, with entry counts, max
/// error, and status.
std::string gradient_suite_table(const std::vector<SuiteCheck>& checks, double tolerance);

}  // namespace skelact
