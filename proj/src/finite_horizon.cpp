#include "mjls/finite_horizon.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace mjls {

Lineage lineage_push(int vertex, const Lineage& parent) {
  return std::make_shared<const LineageNode>(LineageNode{vertex, parent});
}

std::vector<int> lineage_vector(const Lineage& lineage) {
  std::vector<int> out;
  for (const LineageNode* n = lineage.get(); n != nullptr; n = n->parent.get())
    out.push_back(n->vertex);
  return out;
}

int lineage_compare(const Lineage& a, const Lineage& b) {
  const LineageNode* pa = a.get();
  const LineageNode* pb = b.get();
  while (pa && pb) {
    if (pa->vertex != pb->vertex) return pa->vertex < pb->vertex ? -1 : 1;
    pa = pa->parent.get();
    pb = pb->parent.get();
  }
  if (pa) return 1;
  if (pb) return -1;
  return 0;
}

PruneOptions PruneOptions::paper() {
  PruneOptions o;
  o.observed_mode_coverage = true;
  o.consolidation_tol = 3e-4;
  return o;
}

const ParsimoniousSet& FiniteHorizonSolution::at_step(int k) const {
  if (k < 0 || k >= horizon) throw std::out_of_range("step outside the solved horizon");
  return sets[static_cast<std::size_t>(horizon - 1 - k)];
}

namespace {

// True when Xo - Xl is PSD for every mode, each within tol*(1+||Xo_i||).
bool dominates(const std::vector<Matrix>& Xo, const std::vector<Matrix>& Xl, double tol) {
  for (std::size_t i = 0; i < Xo.size(); ++i) {
    const double scaled = tol * (1.0 + Xo[i].norm());
    if (min_eigenvalue_sym(Xo[i] - Xl[i]) < -scaled) return false;
  }
  return true;
}

// Pareto filter in lineage order; ties keep the lexicographically smaller.
std::vector<RiccatiBranch> dominance_filter(std::vector<RiccatiBranch> candidates,
                                            double tol) {
  std::sort(candidates.begin(), candidates.end(),
            [](const RiccatiBranch& a, const RiccatiBranch& b) {
              return lineage_compare(a.lineage, b.lineage) < 0;
            });
  std::vector<RiccatiBranch> retained;
  for (RiccatiBranch& c : candidates) {
    bool is_dominated = false;
    for (const RiccatiBranch& r : retained) {
      if (dominates(r.X, c.X, tol)) {
        is_dominated = true;
        break;
      }
    }
    if (is_dominated) continue;
    std::erase_if(retained,
                  [&](const RiccatiBranch& r) { return dominates(c.X, r.X, tol); });
    retained.push_back(std::move(c));
  }
  return retained;
}

// Removes branches whose every mode matrix is dominated by some other
// surviving branch (the dominator may differ per mode). Lex-largest first so
// the smaller lineage survives among near-equals.
void coverage_filter(std::vector<RiccatiBranch>& retained, double tol) {
  bool changed = true;
  while (changed && retained.size() > 1) {
    changed = false;
    for (std::size_t pos = retained.size(); pos-- > 0;) {
      if (retained.size() == 1) break;
      const RiccatiBranch& c = retained[pos];
      const std::size_t n_modes = c.X.size();
      bool covered = true;
      for (std::size_t i = 0; i < n_modes && covered; ++i) {
        const double scaled = tol * (1.0 + c.X[i].norm());
        bool mode_covered = false;
        for (std::size_t r = 0; r < retained.size(); ++r) {
          if (r == pos) continue;
          if (min_eigenvalue_sym(retained[r].X[i] - c.X[i]) >= -scaled) {
            mode_covered = true;
            break;
          }
        }
        covered = mode_covered;
      }
      if (covered) {
        retained.erase(retained.begin() + static_cast<std::ptrdiff_t>(pos));
        changed = true;
      }
    }
  }
}

Vector mode_weights(int n_modes, const ModeInfo& mode) {
  if (mode.mode_known()) {
    if (mode.theta < 0 || mode.theta >= n_modes)
      throw std::invalid_argument("mode index out of range");
    Vector p = Vector::Zero(n_modes);
    p(mode.theta) = 1.0;
    return p;
  }
  if (mode.p.size() != n_modes)
    throw std::invalid_argument("mode distribution length does not match the mode count");
  return mode.p;
}

}  // namespace

std::vector<RiccatiBranch> cdre_step(const ParsimoniousSet& next, const MjlsModel& model,
                                     const TpmPolytope& polytope,
                                     double bracket_condition_limit) {
  const int n_modes = model.mode_count();
  const int n_vertices = polytope.vertex_count();
  std::vector<RiccatiBranch> candidates;
  candidates.reserve(next.branches.size() * static_cast<std::size_t>(n_vertices));

  for (std::size_t l = 0; l < next.branches.size(); ++l) {
    const RiccatiBranch& parent = next.branches[l];
    for (int v = 0; v < n_vertices; ++v) {
      const Matrix& P = polytope.vertices[static_cast<std::size_t>(v)];
      RiccatiBranch child;
      child.X.reserve(static_cast<std::size_t>(n_modes));
      child.K.reserve(static_cast<std::size_t>(n_modes));
      child.R.reserve(static_cast<std::size_t>(n_modes));
      child.lineage = lineage_push(v, parent.lineage);
      for (int i = 0; i < n_modes; ++i) {
        const auto& mode = model.modes[static_cast<std::size_t>(i)];
        Matrix S = Matrix::Zero(model.dims.nx, model.dims.nx);
        for (int j = 0; j < n_modes; ++j)
          S += P(i, j) * parent.X[static_cast<std::size_t>(j)];
        const Matrix bracket =
            symmetrize(mode.D.transpose() * mode.D + mode.B.transpose() * S * mode.B);
        Eigen::SelfAdjointEigenSolver<Matrix> es(bracket, Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        if (!(lo > 0.0) || hi / lo >= bracket_condition_limit) {
          std::ostringstream msg;
          msg << "singular control bracket at step " << next.step - 1 << ", vertex "
              << (v + 1) << ", parent branch " << (l + 1) << ", mode " << (i + 1);
          throw SingularBracketError(msg.str());
        }
        Eigen::LDLT<Matrix> ldlt(bracket);
        const Matrix R =
            ldlt.solve(Matrix::Identity(model.dims.nu, model.dims.nu));
        const Matrix K = -R * mode.B.transpose() * S * mode.A;
        const Matrix X = symmetrize(mode.C.transpose() * mode.C +
                                    mode.A.transpose() * S * mode.A +
                                    mode.A.transpose() * S * mode.B * K);
        child.R.push_back(symmetrize(R));
        child.K.push_back(K);
        child.X.push_back(X);
      }
      candidates.push_back(std::move(child));
    }
  }
  return candidates;
}

ParsimoniousSet prune_parsimonious(std::vector<RiccatiBranch> candidates, double tol) {
  PruneOptions options;
  options.tol = tol;
  return prune_parsimonious(std::move(candidates), options);
}

ParsimoniousSet prune_parsimonious(std::vector<RiccatiBranch> candidates,
                                   const PruneOptions& options) {
  if (candidates.empty()) throw std::invalid_argument("prune_parsimonious: no candidates");
  ParsimoniousSet set;
  set.candidate_count = static_cast<int>(candidates.size());
  std::vector<RiccatiBranch> retained = dominance_filter(std::move(candidates), options.tol);
  if (options.consolidation_tol > options.tol)
    retained = dominance_filter(std::move(retained), options.consolidation_tol);
  if (options.observed_mode_coverage) coverage_filter(retained, options.tol);
  set.pruned_count = set.candidate_count - static_cast<int>(retained.size());
  set.branches = std::move(retained);
  return set;
}

FiniteHorizonSolution solve_finite_horizon(const MjlsModel& model,
                                           const TpmPolytope& polytope,
                                           const TerminalWeights& terminal, int horizon,
                                           const SolveOptions& options) {
  if (horizon < 1) throw std::invalid_argument("solve_finite_horizon: horizon must be >= 1");
  FiniteHorizonSolution solution;
  solution.horizon = horizon;
  solution.terminal = terminal;

  RiccatiBranch terminal_branch;
  terminal_branch.X = terminal.Z;
  ParsimoniousSet current;
  current.step = horizon;
  current.branches.push_back(std::move(terminal_branch));

  for (int k = horizon - 1; k >= 0; --k) {
    std::vector<RiccatiBranch> candidates =
        cdre_step(current, model, polytope, options.bracket_condition_limit);
    if (static_cast<int>(candidates.size()) > options.branch_budget) {
      std::ostringstream msg;
      msg << "branch budget exceeded at step " << k << ": " << candidates.size()
          << " candidates over budget " << options.branch_budget;
      throw BranchBudgetError(msg.str());
    }
    ParsimoniousSet pruned;
    if (options.prune) {
      pruned = prune_parsimonious(std::move(candidates), options.prune_options);
    } else {
      pruned.candidate_count = static_cast<int>(candidates.size());
      pruned.branches = std::move(candidates);
    }
    pruned.step = k;
    solution.sets.push_back(pruned);
    current = std::move(pruned);
  }
  return solution;
}

CostToGo cost_to_go(const ParsimoniousSet& set, const Vector& x, const ModeInfo& mode) {
  if (set.branches.empty()) throw std::invalid_argument("cost_to_go: empty branch set");
  const int n_modes = static_cast<int>(set.branches.front().X.size());
  if (x.size() != set.branches.front().X.front().rows())
    throw std::invalid_argument("cost_to_go: state dimension mismatch");
  const Vector p = mode_weights(n_modes, mode);
  CostToGo best;
  best.value = -std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < set.branches.size(); ++l) {
    double value = 0.0;
    for (int i = 0; i < n_modes; ++i)
      if (p(i) != 0.0)
        value += p(i) * x.dot(set.branches[l].X[static_cast<std::size_t>(i)] * x);
    if (value > best.value) {
      best.value = value;
      best.branch = static_cast<int>(l);
    }
  }
  if (best.value < 0.0 && best.value > -1e-12) best.value = 0.0;
  return best;
}

Vector optimal_input(const ParsimoniousSet& set, const Vector& x, int theta) {
  const CostToGo sel = cost_to_go(set, x, ModeInfo::known(theta));
  const RiccatiBranch& branch = set.branches[static_cast<std::size_t>(sel.branch)];
  if (branch.K.empty())
    throw std::logic_error("optimal_input: branch carries no gains (terminal set)");
  return branch.K[static_cast<std::size_t>(theta)] * x;
}

std::vector<StepProfile> branch_profile(const FiniteHorizonSolution& solution) {
  std::vector<StepProfile> profile;
  profile.reserve(solution.sets.size());
  for (const ParsimoniousSet& s : solution.sets)
    profile.push_back({s.step, s.candidate_count, static_cast<int>(s.branches.size())});
  return profile;
}

}  // namespace mjls
