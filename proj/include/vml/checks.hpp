#pragma once

#include <string>
#include <vector>

#include "vml/table_io.hpp"

namespace vml::checks {

// Named property suites with fixed seeds: "identities" (Tweedie, covariance,
// second-moment lemmas, KL cross-checks), "gradients" (finite differences,
// preconditioning), "limits" (small-sigma decay and convergence), or "all".
// Throws std::invalid_argument on an unknown tag.
std::vector<CheckResult> run_suite(const std::string& suite);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace vml::checks
