#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace mjls {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Default tolerances for problem-data validation. The fixture data are exact
// decimals; these absorb only parse/representation noise.
inline constexpr double kStochasticTol = 1e-9;
inline constexpr double kOrthogonalityTol = 1e-8;

/// Per-mode system matrices of x_{k+1} = A x_k + B u_k, z_k = C x_k + D u_k.
struct ModeMatrices {
  Matrix A;  // n_x x n_x
  Matrix B;  // n_x x n_u
  Matrix C;  // n_z x n_x
  Matrix D;  // n_z x n_u
};

struct Dims {
  Eigen::Index nx = 0;
  Eigen::Index nu = 0;
  Eigen::Index nz = 0;
};

/// Markov jump linear system over N operational modes.
struct MjlsModel {
  std::vector<ModeMatrices> modes;
  Dims dims;

  int mode_count() const { return static_cast<int>(modes.size()); }
};

/// Convex polytope of row-stochastic transition probability matrices,
/// given by its V vertex matrices (each N x N).
struct TpmPolytope {
  std::vector<Matrix> vertices;

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int mode_count() const {
    return vertices.empty() ? 0 : static_cast<int>(vertices.front().rows());
  }
};

/// Initial state plus either a known mode (0-based internally) or a
/// distribution over modes.
struct InitialCondition {
  Vector x0;
  int theta0 = -1;  // >= 0 when the initial mode is known
  Vector p0;        // used when theta0 < 0

  bool mode_known() const { return theta0 >= 0; }
};

/// Terminal cost weighting matrices Z_i, one symmetric PSD matrix per mode.
struct TerminalWeights {
  std::vector<Matrix> Z;

  static TerminalWeights zero(int n_modes, Eigen::Index nx);
};

struct ValidationIssue {
  std::string kind;     // "orthogonality", "row-stochastic", ...
  std::string message;  // human-readable, names the offending index
  double residual = 0.0;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool valid() const { return issues.empty(); }
};

/// Checks every model/polytope invariant and reports all violations.
/// Never throws on bad data; any parseable input yields a report.
ValidationReport validate_model(const MjlsModel& model, const TpmPolytope& polytope);

/// Validates an initial condition against the model dimensions.
ValidationReport validate_initial(const MjlsModel& model, const InitialCondition& ic);

/// Validates terminal weights (symmetry, PSD, dimensions).
ValidationReport validate_terminal(const MjlsModel& model, const TerminalWeights& weights);

// Small shared helpers used across modules.
Matrix symmetrize(const Matrix& m);
double min_eigenvalue_sym(const Matrix& m);

/// The three-mode multiplier-accelerator benchmark model with its four
/// TPM polytope vertices, bundled for the CLI and tests.
MjlsModel samuelson_model();
TpmPolytope samuelson_polytope(int n_vertices = 4);
TerminalWeights samuelson_terminal_weights();

}  // namespace mjls
