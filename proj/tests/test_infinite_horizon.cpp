#include <doctest.h>

#include "mjls/infinite_horizon.hpp"
#include "test_helpers.hpp"

#include <cmath>

using namespace mjls;

namespace {

MjlsModel scalar_model(double a, double b) {
  MjlsModel model;
  model.dims = {1, 1, 2};
  ModeMatrices m;
  m.A = Matrix::Constant(1, 1, a);
  m.B = Matrix::Constant(1, 1, b);
  m.C = (Matrix(2, 1) << 1.0, 0.0).finished();
  m.D = (Matrix(2, 1) << 0.0, 1.0).finished();
  model.modes.push_back(m);
  return model;
}

TpmPolytope single_vertex(int n = 1) {
  TpmPolytope p;
  p.vertices.push_back(Matrix::Identity(n, n));
  return p;
}

}  // namespace

TEST_CASE("stable uncontrollable scalar solves the Lyapunov fixed point") {
  // x = 1 + a^2 x with a = 0.5: x = 4/3, and K = 0 because B = 0.
  const CareBranch branch = solve_vertex_care(scalar_model(0.5, 0.0), Matrix::Identity(1, 1));
  CHECK(branch.X[0](0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-9));
  CHECK(branch.K[0].norm() == 0.0);
  CHECK(branch.residual <= 1e-10);
}

TEST_CASE("scalar Riccati fixed point is the golden ratio") {
  // x = 1 + x - x^2/(1+x)  =>  x^2 = 1 + x  =>  x = (1+sqrt(5))/2
  const CareBranch branch = solve_vertex_care(scalar_model(1.0, 1.0), Matrix::Identity(1, 1));
  const double golden = 0.5 * (1.0 + std::sqrt(5.0));
  CHECK(branch.X[0](0, 0) == doctest::Approx(golden).epsilon(1e-10));
  CHECK(branch.residual <= 1e-10);
}

TEST_CASE("value iteration is PSD-monotone and matches the solver") {
  // Iterate the operator by hand (independent route) and compare.
  const MjlsModel model = samuelson_model();
  const Matrix P = samuelson_polytope(4).vertices[2];
  TpmPolytope single;
  single.vertices.push_back(P);

  std::vector<Matrix> X(3, Matrix::Zero(2, 2));
  for (int it = 0; it < 200; ++it) {
    ParsimoniousSet parent;
    RiccatiBranch b;
    b.X = X;
    parent.branches.push_back(b);
    const auto stepped = cdre_step(parent, model, single);
    for (int i = 0; i < 3; ++i) {
      const Matrix diff = stepped.front().X[i] - X[i];
      CHECK(min_eigenvalue_sym(diff) >= -1e-9 * (1.0 + X[i].norm()));
    }
    X = stepped.front().X;
  }
  const CareBranch branch = solve_vertex_care(model, P);
  for (int i = 0; i < 3; ++i)
    CHECK((branch.X[i] - X[i]).norm() <= 1e-8 * (1.0 + X[i].norm()));
}

TEST_CASE("returned iterate satisfies the fixed-point residual bound") {
  const MjlsModel model = samuelson_model();
  const TpmPolytope polytope = samuelson_polytope(4);
  for (int v = 0; v < 4; ++v) {
    const CareBranch branch = solve_vertex_care(model, polytope.vertices[v]);
    // re-evaluate the operator at the returned iterate
    TpmPolytope single;
    single.vertices.push_back(polytope.vertices[v]);
    ParsimoniousSet parent;
    RiccatiBranch b;
    b.X = branch.X;
    parent.branches.push_back(b);
    const auto stepped = cdre_step(parent, model, single);
    double residual = 0.0;
    for (int i = 0; i < 3; ++i)
      residual = std::max(residual, (stepped.front().X[i] - branch.X[i]).norm() /
                                        (1.0 + stepped.front().X[i].norm()));
    CHECK(residual <= 1e-10);
    CHECK(branch.residual <= 1e-10);
  }
}

TEST_CASE("non-stabilizable vertex fails loudly") {
  CareOptions opts;
  opts.max_iter = 3000;
  CHECK_THROWS_AS(solve_vertex_care(scalar_model(2.0, 0.0), Matrix::Identity(1, 1), opts),
                  CareConvergenceError);

  TpmPolytope polytope = single_vertex();
  try {
    stabilizing_solution(scalar_model(2.0, 0.0), polytope, opts);
    FAIL("expected a convergence error");
  } catch (const CareConvergenceError& e) {
    CHECK(std::string(e.what()).find("vertex 1") != std::string::npos);
  }
}

TEST_CASE("degenerate single-vertex polytope reduces to the classical solution") {
  const MjlsModel model = samuelson_model();
  TpmPolytope polytope;
  polytope.vertices.push_back(samuelson_polytope(4).vertices[3]);
  const StabilizingSolution sol = stabilizing_solution(model, polytope);
  REQUIRE(sol.branches.size() == 1);
  CHECK(sol.discarded.empty());
  CHECK(sol.certified);
  const CareBranch direct = solve_vertex_care(model, polytope.vertices[0]);
  for (int i = 0; i < 3; ++i)
    CHECK((sol.branches[0].X[i] - direct.X[i]).norm() == 0.0);
}

TEST_CASE("stationary fixed point is invariant under the finite-horizon recursion") {
  const MjlsModel model = samuelson_model();
  TpmPolytope polytope;
  polytope.vertices.push_back(samuelson_polytope(4).vertices[2]);
  const CareBranch care = solve_vertex_care(model, polytope.vertices[0]);
  TerminalWeights terminal;
  terminal.Z = care.X;
  const FiniteHorizonSolution sol = solve_finite_horizon(model, polytope, terminal, 12);
  for (const auto& set : sol.sets) {
    REQUIRE(set.branches.size() == 1);
    for (int i = 0; i < 3; ++i)
      CHECK((set.branches[0].X[i] - care.X[i]).norm() <=
            1e-8 * (1.0 + care.X[i].norm()));
  }
}

TEST_CASE("per-vertex solves that cannot be jointly certified are flagged") {
  // Two nilpotent modes that are stable under either fixed chain but explode
  // when the chains can swap modes every step.
  MjlsModel model;
  model.dims = {2, 1, 3};
  const double alpha = 1.3;
  ModeMatrices m1, m2;
  m1.A = (Matrix(2, 2) << 0.0, alpha, 0.0, 0.0).finished();
  m2.A = (Matrix(2, 2) << 0.0, 0.0, alpha, 0.0).finished();
  m1.B = m2.B = Matrix::Zero(2, 1);
  m1.C = m2.C = (Matrix(3, 2) << 1, 0, 0, 1, 0, 0).finished();
  m1.D = m2.D = (Matrix(3, 1) << 0, 0, 1).finished();
  model.modes = {m1, m2};

  TpmPolytope polytope;
  polytope.vertices.push_back(Matrix::Identity(2, 2));
  polytope.vertices.push_back((Matrix(2, 2) << 0.5, 0.5, 0.5, 0.5).finished());

  // Each vertex admits a CARE solution...
  CHECK_NOTHROW(solve_vertex_care(model, polytope.vertices[0]));
  CHECK_NOTHROW(solve_vertex_care(model, polytope.vertices[1]));
  // ...but the family is not mean square stabilizable with B = 0.
  const StabilizingSolution sol = stabilizing_solution(model, polytope);
  CHECK_FALSE(sol.certified);
  bool some_unstable = false;
  for (const auto& b : sol.branches)
    if (b.certificate.lower >= 1.0) some_unstable = true;
  CHECK(some_unstable);
  CHECK_THROWS_AS(infinite_cost(sol, (Vector(2) << 1, 1).finished(), ModeInfo::known(0)),
                  std::logic_error);
}

TEST_CASE("infinite cost and steady policy") {
  const MjlsModel model = samuelson_model();
  const StabilizingSolution sol = stabilizing_solution(model, samuelson_polytope(4));
  REQUIRE(sol.certified);
  REQUIRE(sol.branches.size() == 2);

  SUBCASE("zero state costs nothing") {
    const InfiniteCost c = infinite_cost(sol, Vector::Zero(2), ModeInfo::known(0));
    CHECK(c.value == 0.0);
    CHECK(c.branch == 0);
  }
  SUBCASE("policy selection is invariant under state scaling") {
    mjls::testing::Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
      const Vector x = mjls::testing::random_matrix(rng, 2, 1, 2.0).col(0);
      if (x.norm() < 1e-6) continue;
      const int theta = rng.integer(0, 2);
      const double c = rng.uniform(0.2, 4.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      const InfiniteCost base = infinite_cost(sol, x, ModeInfo::known(theta));
      const InfiniteCost scaled = infinite_cost(sol, Vector(c * x), ModeInfo::known(theta));
      CHECK(base.branch == scaled.branch);
      CHECK(steady_policy(sol, Vector(c * x), theta).isApprox(
          c * steady_policy(sol, x, theta), 1e-12));
    }
  }
  SUBCASE("single-branch solutions always use their own gain") {
    TpmPolytope single;
    single.vertices.push_back(samuelson_polytope(4).vertices[2]);
    const StabilizingSolution one = stabilizing_solution(model, single);
    const Vector x = (Vector(2) << -0.4, 2.0).finished();
    CHECK(steady_policy(one, x, 1).isApprox(one.branches[0].K[1] * x, 1e-14));
  }
}

TEST_CASE("discarded vertices are covered mode-wise by retained ones") {
  const StabilizingSolution sol =
      stabilizing_solution(samuelson_model(), samuelson_polytope(4));
  REQUIRE_FALSE(sol.discarded.empty());
  std::vector<CareBranch> all;
  for (int v = 0; v < 4; ++v)
    all.push_back(solve_vertex_care(samuelson_model(), samuelson_polytope(4).vertices[v]));
  for (const DiscardedBranch& d : sol.discarded) {
    for (int i = 0; i < 3; ++i) {
      bool covered = false;
      for (const CareBranch& r : sol.branches) {
        const double tol = 1e-8 * (1.0 + r.X[i].norm());
        if (min_eigenvalue_sym(r.X[i] - all[d.vertex].X[i]) >= -tol) covered = true;
      }
      CHECK(covered);
    }
  }
}

TEST_CASE("convergence report tracks the finite-to-infinite gap") {
  const MjlsModel model = samuelson_model();
  const TpmPolytope polytope = samuelson_polytope(3);
  const StabilizingSolution sol = stabilizing_solution(model, polytope);
  const Vector x0 = (Vector(2) << 1.0, 1.0).finished();
  const ConvergenceReport report = convergence_report(
      model, polytope, sol, samuelson_terminal_weights(), 50, x0, ModeInfo::known(0));
  CHECK(report.zeta < 1.0);
  CHECK(report.beta == doctest::Approx(6.0));  // nx * N
  CHECK(report.finite_cost > 0.0);
  CHECK(report.lemma_bound >= report.infinite_cost * 0.9);
  // at T = 50 the decay term is numerically dead: bound ~ selected ||X|| * ||x0||^2
  CHECK(std::abs(report.gap) <= 1e-3 * report.infinite_cost);
}
