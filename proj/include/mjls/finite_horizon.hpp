#pragma once

#include "mjls/model.hpp"

#include <memory>
#include <vector>

namespace mjls {

/// Immutable cons list recording which polytope vertex produced each backward
/// step, most recent step first. Shared tails keep long-horizon memory flat.
struct LineageNode {
  int vertex;
  std::shared_ptr<const LineageNode> parent;
};
using Lineage = std::shared_ptr<const LineageNode>;

Lineage lineage_push(int vertex, const Lineage& parent);
std::vector<int> lineage_vector(const Lineage& lineage);
/// Lexicographic order on the vertex sequences (most recent first).
int lineage_compare(const Lineage& a, const Lineage& b);

/// One candidate Riccati solution at a time step: per-mode (X_i, K_i, R_i)
/// plus the vertex lineage that produced it.
struct RiccatiBranch {
  std::vector<Matrix> X;  // symmetric PSD, nx x nx
  std::vector<Matrix> K;  // nu x nx
  std::vector<Matrix> R;  // symmetric PD, nu x nu
  Lineage lineage;
};

/// Pruned branch set at a time step.
struct ParsimoniousSet {
  int step = 0;
  std::vector<RiccatiBranch> branches;
  int pruned_count = 0;
  int candidate_count = 0;
};

struct PruneOptions {
  // Scale-relative tolerance of the pairwise PSD dominance test.
  double tol = 1e-9;
  // Also discard branches whose every mode is dominated by some other branch
  // (dominators may differ per mode). Sound when the mode is observed online;
  // required to reproduce the benchmark's published branch counts.
  bool observed_mode_coverage = false;
  // When positive, the pairwise pass additionally merges branches that
  // dominate each other within this coarser scale-relative tolerance.
  double consolidation_tol = 0.0;

  /// Configuration reproducing the published example's parsimonious sets.
  static PruneOptions paper();
};

struct SolveOptions {
  bool prune = true;
  PruneOptions prune_options{};
  // Hard cap on candidates per step; exceeding it is an error, not a
  // truncation, so the min-max guarantee is never silently lost.
  int branch_budget = 10000;
  double bracket_condition_limit = 1e12;
};

struct FiniteHorizonSolution {
  int horizon = 0;
  // sets[0] is step k = T-1, sets[T-1] is step k = 0.
  std::vector<ParsimoniousSet> sets;
  TerminalWeights terminal;

  const ParsimoniousSet& at_step(int k) const;
};

/// Mode information for cost queries: a known mode or a distribution.
struct ModeInfo {
  int theta = -1;
  Vector p;

  static ModeInfo known(int theta0) { return {theta0, {}}; }
  static ModeInfo distribution(Vector p0) { return {-1, std::move(p0)}; }
  bool mode_known() const { return theta >= 0; }
};

/// One backward coupled-Riccati step: every (vertex, parent branch) pair
/// yields a candidate. Throws SingularBracketError when a control bracket is
/// numerically singular.
std::vector<RiccatiBranch> cdre_step(const ParsimoniousSet& next, const MjlsModel& model,
                                     const TpmPolytope& polytope,
                                     double bracket_condition_limit = 1e12);

/// Discards branches dominated in the PSD order (and, optionally, branches
/// covered mode-wise). Deterministic: candidates are processed in
/// lexicographic lineage order and ties keep the smaller lineage.
ParsimoniousSet prune_parsimonious(std::vector<RiccatiBranch> candidates, double tol);
ParsimoniousSet prune_parsimonious(std::vector<RiccatiBranch> candidates,
                                   const PruneOptions& options);

/// Backward solve over the horizon T from the terminal weights.
FiniteHorizonSolution solve_finite_horizon(const MjlsModel& model,
                                           const TpmPolytope& polytope,
                                           const TerminalWeights& terminal, int horizon,
                                           const SolveOptions& options = {});

struct CostToGo {
  double value = 0.0;
  int branch = 0;  // argmax branch index within the set
};

/// Worst-case cost over the branch set for state x and mode information.
CostToGo cost_to_go(const ParsimoniousSet& set, const Vector& x, const ModeInfo& mode);

/// Control input of the argmax branch's gain at the observed mode.
Vector optimal_input(const ParsimoniousSet& set, const Vector& x, int theta);

struct StepProfile {
  int step = 0;
  int candidate_count = 0;
  int retained_count = 0;
};

/// Per-step candidate and retained branch counts, in backward solve order.
std::vector<StepProfile> branch_profile(const FiniteHorizonSolution& solution);

class SingularBracketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class BranchBudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mjls
