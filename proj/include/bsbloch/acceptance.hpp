#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bsbloch {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
};

struct AcceptanceOptions {
  std::uint64_t seed = 20240611;
  int instances = 50;
  int jobs = 1;
};

CriterionResult check_oracle_equivalence(const AcceptanceOptions& opts);
CriterionResult check_rs_bw_bridge(const AcceptanceOptions& opts);
CriterionResult check_closed_form_fixed_points();
CriterionResult check_counterterm_continuity();
CriterionResult check_difference_ratio_limits();
CriterionResult check_energy_independent_limit(const AcceptanceOptions& opts);
CriterionResult check_photon_kernel();
CriterionResult check_normalization(const AcceptanceOptions& opts);

/// All eight criteria in order.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts = {});

/// "PASS  1 oracle-equivalence  <detail>"
std::string format_result(const CriterionResult& r);

}  // namespace bsbloch
