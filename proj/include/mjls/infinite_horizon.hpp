#pragma once

#include "mjls/finite_horizon.hpp"
#include "mjls/stability.hpp"

#include <vector>

namespace mjls {

struct CareOptions {
  double care_tol = 1e-10;
  int max_iter = 100000;
  double bracket_condition_limit = 1e12;
};

/// Stabilizing solution of the coupled algebraic Riccati equations under one
/// stationary vertex TPM.
struct CareBranch {
  int vertex = 0;  // 0-based polytope vertex index
  std::vector<Matrix> X;
  std::vector<Matrix> K;
  std::vector<Matrix> R;
  JsrCertificate certificate;  // for the closed-loop family over all vertices
  int iterations = 0;
  double residual = 0.0;
};

struct DiscardedBranch {
  int vertex = 0;
  // Dominating vertex per mode (a single entry repeated when one branch
  // dominates everywhere).
  std::vector<int> dominators;
};

struct StabilizingSolution {
  std::vector<CareBranch> branches;
  std::vector<DiscardedBranch> discarded;
  bool certified = false;

  const CareBranch& branch(int index) const {
    return branches.at(static_cast<std::size_t>(index));
  }
};

class CareConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Value iteration of the coupled Riccati operator from the zero sequence
/// under the fixed TPM `P_v`. Returns the iterate whose residual (one more
/// operator application, relative) is certified below care_tol.
CareBranch solve_vertex_care(const MjlsModel& model, const Matrix& P_v,
                             const CareOptions& options = {});

/// Solves one CARE set per polytope vertex, prunes dominated solutions, and
/// certifies every retained branch with a closed-loop JSR bound.
StabilizingSolution stabilizing_solution(const MjlsModel& model, const TpmPolytope& polytope,
                                         const CareOptions& care_options = {},
                                         const JsrOptions& jsr_options = {});

struct InfiniteCost {
  double value = 0.0;
  int branch = 0;                     // argmax branch index
  std::vector<double> branch_values;  // per retained branch
};

/// Worst-case steady-state cost over the retained branches.
InfiniteCost infinite_cost(const StabilizingSolution& solution, const Vector& x0,
                           const ModeInfo& mode);

/// Steady-state control law: the argmax branch's gain at the observed mode.
Vector steady_policy(const StabilizingSolution& solution, const Vector& x, int theta);

struct ConvergenceReport {
  double finite_cost = 0.0;    // J_T
  double infinite_cost = 0.0;  // J_inf
  double gap = 0.0;            // J_T - J_inf, raw
  double lemma_bound = 0.0;    // norm bound on J_T from the decay constants
  double zeta = 0.0;           // certified decay rate used in the bound
  double beta = 0.0;
};

/// Finite-vs-infinite cost diagnostics for one initial condition.
ConvergenceReport convergence_report(const MjlsModel& model, const TpmPolytope& polytope,
                                     const StabilizingSolution& solution,
                                     const TerminalWeights& terminal, int horizon,
                                     const Vector& x0, const ModeInfo& mode,
                                     const SolveOptions& solve_options = {});

}  // namespace mjls
