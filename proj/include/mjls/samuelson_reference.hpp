#pragma once

#include "mjls/model.hpp"

#include <string>
#include <vector>

namespace mjls {

/// One comparison cell of the benchmark reproduction table.
struct ReferenceCell {
  std::string name;
  double computed = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  // Informational rows are printed but do not gate the overall verdict.
  bool informational = false;
  std::string note;
};

struct ReferenceCheckOptions {
  double gain_tol = 5e-4;      // per printed gain entry
  double cost_rel_tol = 1e-3;  // relative, on cost values
  double rho_tol = 1e-3;       // absolute, on spectral radii
  double jsr_slack = 1e-3;     // upper bound may exceed the printed bound by this
  int jsr_depth = 400;
  double jsr_gap = 1e-4;
};

/// Reference values of the three-mode benchmark: spectral radii, steady-state
/// gains and costs for both polytopes, finite-horizon costs, and the
/// parsimonious branch-count profile.
std::vector<ReferenceCell> check_reference_example(const ReferenceCheckOptions& options = {});

}  // namespace mjls
