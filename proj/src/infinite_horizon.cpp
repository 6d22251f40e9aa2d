#include "mjls/infinite_horizon.hpp"

#include "mjls/detail/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace mjls {

namespace {

// One application of the coupled Riccati operator under a fixed TPM.
// Reuses the CDRE step machinery with a single-vertex polytope.
std::vector<RiccatiBranch> care_operator(const std::vector<Matrix>& X,
                                         const MjlsModel& model, const Matrix& P_v,
                                         double bracket_condition_limit) {
  TpmPolytope single;
  single.vertices.push_back(P_v);
  ParsimoniousSet parent;
  RiccatiBranch b;
  b.X = X;
  parent.branches.push_back(std::move(b));
  return cdre_step(parent, model, single, bracket_condition_limit);
}

double relative_diff(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, (a[i] - b[i]).norm() / (1.0 + a[i].norm()));
  return worst;
}

Vector weights_from_mode(int n_modes, const ModeInfo& mode) {
  if (mode.mode_known()) {
    Vector p = Vector::Zero(n_modes);
    if (mode.theta < 0 || mode.theta >= n_modes)
      throw std::invalid_argument("mode index out of range");
    p(mode.theta) = 1.0;
    return p;
  }
  if (mode.p.size() != n_modes)
    throw std::invalid_argument("mode distribution length does not match the mode count");
  return mode.p;
}

}  // namespace

CareBranch solve_vertex_care(const MjlsModel& model, const Matrix& P_v,
                             const CareOptions& options) {
  const int n_modes = model.mode_count();
  CareBranch branch;
  std::vector<Matrix> X(static_cast<std::size_t>(n_modes),
                        Matrix::Zero(model.dims.nx, model.dims.nx));
  for (int it = 1; it <= options.max_iter; ++it) {
    std::vector<RiccatiBranch> stepped =
        care_operator(X, model, P_v, options.bracket_condition_limit);
    const std::vector<Matrix>& X_next = stepped.front().X;
    const double res = relative_diff(X_next, X);
    if (res <= options.care_tol) {
      // X has certified residual `res`; evaluate the gains at X itself.
      branch.X = X;
      branch.K = std::move(stepped.front().K);
      branch.R = std::move(stepped.front().R);
      branch.iterations = it;
      branch.residual = res;
      return branch;
    }
    X = X_next;
  }
  std::ostringstream msg;
  msg << "coupled Riccati iteration did not reach tolerance " << options.care_tol
      << " within " << options.max_iter << " iterations (vertex system not "
      << "mean-square stabilizable/detectable under this stationary TPM)";
  throw CareConvergenceError(msg.str());
}

StabilizingSolution stabilizing_solution(const MjlsModel& model, const TpmPolytope& polytope,
                                         const CareOptions& care_options,
                                         const JsrOptions& jsr_options) {
  const int n_vertices = polytope.vertex_count();
  const int n_modes = model.mode_count();
  StabilizingSolution solution;

  std::vector<CareBranch> all(static_cast<std::size_t>(n_vertices));
  std::vector<std::string> failures(static_cast<std::size_t>(n_vertices));
  detail::parallel_for(n_vertices, [&](int v) {
    try {
      all[static_cast<std::size_t>(v)] =
          solve_vertex_care(model, polytope.vertices[static_cast<std::size_t>(v)], care_options);
      all[static_cast<std::size_t>(v)].vertex = v;
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(v)] = e.what();
    }
  });
  for (int v = 0; v < n_vertices; ++v) {
    if (!failures[static_cast<std::size_t>(v)].empty()) {
      std::ostringstream msg;
      msg << "vertex " << (v + 1) << ": " << failures[static_cast<std::size_t>(v)];
      throw CareConvergenceError(msg.str());
    }
  }

  // Dominance pruning over the vertex solutions: a branch is redundant when a
  // single other branch dominates it everywhere, or when every mode is
  // dominated by some other branch (observed-mode coverage).
  const double tol = 1e-9;
  std::vector<bool> removed(static_cast<std::size_t>(n_vertices), false);
  auto dominates_mode = [&](const CareBranch& a, const CareBranch& b, int i) {
    const Matrix& Xa = a.X[static_cast<std::size_t>(i)];
    const Matrix& Xb = b.X[static_cast<std::size_t>(i)];
    return min_eigenvalue_sym(Xa - Xb) >= -tol * (1.0 + Xa.norm());
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (int l = n_vertices - 1; l >= 0; --l) {
      if (removed[static_cast<std::size_t>(l)]) continue;
      int live = 0;
      for (int o = 0; o < n_vertices; ++o)
        if (!removed[static_cast<std::size_t>(o)]) ++live;
      if (live == 1) break;
      std::vector<int> dominators;
      bool covered = true;
      for (int i = 0; i < n_modes && covered; ++i) {
        bool mode_covered = false;
        for (int o = 0; o < n_vertices; ++o) {
          if (o == l || removed[static_cast<std::size_t>(o)]) continue;
          if (dominates_mode(all[static_cast<std::size_t>(o)],
                             all[static_cast<std::size_t>(l)], i)) {
            dominators.push_back(o);
            mode_covered = true;
            break;
          }
        }
        covered = mode_covered;
      }
      if (covered) {
        removed[static_cast<std::size_t>(l)] = true;
        solution.discarded.push_back({l, dominators});
        changed = true;
      }
    }
  }

  for (int v = 0; v < n_vertices; ++v)
    if (!removed[static_cast<std::size_t>(v)])
      solution.branches.push_back(std::move(all[static_cast<std::size_t>(v)]));

  // Certify each retained branch against the whole vertex family.
  solution.certified = true;
  for (CareBranch& branch : solution.branches) {
    branch.certificate = jsr_bounds(lift_closed_loop(model, polytope, branch.K), jsr_options);
    if (!(branch.certificate.upper < 1.0)) solution.certified = false;
  }
  return solution;
}

InfiniteCost infinite_cost(const StabilizingSolution& solution, const Vector& x0,
                           const ModeInfo& mode) {
  if (!solution.certified)
    throw std::logic_error("infinite_cost: stabilizing solution is not certified");
  if (solution.branches.empty()) throw std::logic_error("infinite_cost: no branches");
  const int n_modes = static_cast<int>(solution.branches.front().X.size());
  const Vector p = weights_from_mode(n_modes, mode);
  InfiniteCost result;
  result.branch_values.reserve(solution.branches.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < solution.branches.size(); ++l) {
    double value = 0.0;
    for (int i = 0; i < n_modes; ++i)
      if (p(i) != 0.0)
        value += p(i) * x0.dot(solution.branches[l].X[static_cast<std::size_t>(i)] * x0);
    result.branch_values.push_back(value);
    if (value > best) {
      best = value;
      result.branch = static_cast<int>(l);
    }
  }
  result.value = std::max(best, 0.0);
  return result;
}

Vector steady_policy(const StabilizingSolution& solution, const Vector& x, int theta) {
  const InfiniteCost sel = infinite_cost(solution, x, ModeInfo::known(theta));
  const CareBranch& branch = solution.branches[static_cast<std::size_t>(sel.branch)];
  return branch.K[static_cast<std::size_t>(theta)] * x;
}

ConvergenceReport convergence_report(const MjlsModel& model, const TpmPolytope& polytope,
                                     const StabilizingSolution& solution,
                                     const TerminalWeights& terminal, int horizon,
                                     const Vector& x0, const ModeInfo& mode,
                                     const SolveOptions& solve_options) {
  ConvergenceReport report;
  const FiniteHorizonSolution finite =
      solve_finite_horizon(model, polytope, terminal, horizon, solve_options);
  report.finite_cost = cost_to_go(finite.at_step(0), x0, mode).value;
  const InfiniteCost infinite = infinite_cost(solution, x0, mode);
  report.infinite_cost = infinite.value;
  report.gap = report.finite_cost - report.infinite_cost;

  double zeta = 0.0;
  for (const CareBranch& b : solution.branches) zeta = std::max(zeta, b.certificate.upper);
  report.zeta = zeta;
  report.beta = static_cast<double>(model.dims.nx) * model.mode_count();

  const int n_modes = model.mode_count();
  const Vector p = weights_from_mode(n_modes, mode);
  const CareBranch& selected = solution.branches[static_cast<std::size_t>(infinite.branch)];
  double x_norm_term = 0.0;
  for (int i = 0; i < n_modes; ++i)
    if (p(i) != 0.0)
      x_norm_term += p(i) * selected.X[static_cast<std::size_t>(i)].operatorNorm();
  double z_norm = 0.0;
  for (const Matrix& Z : terminal.Z) z_norm = std::max(z_norm, Z.operatorNorm());
  report.lemma_bound =
      (x_norm_term + report.beta * std::pow(zeta, horizon) * z_norm) * x0.squaredNorm();
  return report;
}

}  // namespace mjls
