#include "mjls/model.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace mjls {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double min_eigenvalue_sym(const Matrix& m) {
  if (m.rows() == 1) return m(0, 0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

TerminalWeights TerminalWeights::zero(int n_modes, Eigen::Index nx) {
  TerminalWeights w;
  w.Z.assign(static_cast<std::size_t>(n_modes), Matrix::Zero(nx, nx));
  return w;
}

namespace {

void add_issue(ValidationReport& report, std::string kind, std::string message,
               double residual) {
  report.issues.push_back({std::move(kind), std::move(message), residual});
}

}  // namespace

ValidationReport validate_model(const MjlsModel& model, const TpmPolytope& polytope) {
  ValidationReport report;
  const int n_modes = model.mode_count();
  if (n_modes < 1) {
    add_issue(report, "mode-count", "model has no modes", 0.0);
    return report;
  }
  const auto& dims = model.dims;
  for (int i = 0; i < n_modes; ++i) {
    const auto& m = model.modes[static_cast<std::size_t>(i)];
    std::ostringstream where;
    where << "mode " << (i + 1);
    if (m.A.rows() != dims.nx || m.A.cols() != dims.nx)
      add_issue(report, "dimension", where.str() + ": A is not nx x nx", 0.0);
    if (m.B.rows() != dims.nx || m.B.cols() != dims.nu)
      add_issue(report, "dimension", where.str() + ": B is not nx x nu", 0.0);
    if (m.C.rows() != dims.nz || m.C.cols() != dims.nx)
      add_issue(report, "dimension", where.str() + ": C is not nz x nx", 0.0);
    if (m.D.rows() != dims.nz || m.D.cols() != dims.nu)
      add_issue(report, "dimension", where.str() + ": D is not nz x nu", 0.0);
    if (!report.issues.empty() && report.issues.back().kind == "dimension") continue;

    // C_i' D_i = 0, relative to ||C|| ||D||.
    const double scale = m.C.norm() * m.D.norm();
    const double orth = (m.C.transpose() * m.D).norm();
    if (orth > kOrthogonalityTol * (scale > 0 ? scale : 1.0))
      add_issue(report, "orthogonality", where.str() + ": C'D is not zero", orth);

    const Matrix dtd = m.D.transpose() * m.D;
    const double asym = (dtd - dtd.transpose()).norm();
    if (asym > kOrthogonalityTol * (1.0 + dtd.norm()))
      add_issue(report, "dtd-symmetric", where.str() + ": D'D is not symmetric", asym);
    const double dtd_min = min_eigenvalue_sym(dtd);
    if (dtd_min < -kStochasticTol * (1.0 + dtd.norm()))
      add_issue(report, "dtd-psd", where.str() + ": D'D is not PSD", dtd_min);
  }

  for (int v = 0; v < polytope.vertex_count(); ++v) {
    const Matrix& P = polytope.vertices[static_cast<std::size_t>(v)];
    std::ostringstream where;
    where << "vertex " << (v + 1);
    if (P.rows() != n_modes || P.cols() != n_modes) {
      add_issue(report, "dimension", where.str() + ": TPM is not N x N", 0.0);
      continue;
    }
    for (int r = 0; r < n_modes; ++r) {
      double row_sum = 0.0;
      for (int c = 0; c < n_modes; ++c) {
        const double p = P(r, c);
        if (p < -kStochasticTol) {
          std::ostringstream msg;
          msg << where.str() << ", row " << (r + 1) << ", col " << (c + 1)
              << ": negative transition probability";
          add_issue(report, "nonnegative", msg.str(), p);
        }
        row_sum += p;
      }
      if (std::abs(row_sum - 1.0) > kStochasticTol) {
        std::ostringstream msg;
        msg << where.str() << ", row " << (r + 1) << ": row sum is " << row_sum;
        add_issue(report, "row-stochastic", msg.str(), row_sum - 1.0);
      }
    }
  }
  if (polytope.vertex_count() < 1)
    add_issue(report, "vertex-count", "polytope has no vertices", 0.0);
  return report;
}

ValidationReport validate_initial(const MjlsModel& model, const InitialCondition& ic) {
  ValidationReport report;
  if (ic.x0.size() != model.dims.nx)
    add_issue(report, "dimension", "x0 length does not match nx", 0.0);
  if (ic.mode_known()) {
    if (ic.theta0 >= model.mode_count())
      add_issue(report, "mode-index", "theta0 exceeds the mode count", 0.0);
  } else {
    if (ic.p0.size() != model.mode_count()) {
      add_issue(report, "dimension", "p0 length does not match the mode count", 0.0);
    } else {
      if (ic.p0.minCoeff() < -kStochasticTol)
        add_issue(report, "nonnegative", "p0 has a negative entry", ic.p0.minCoeff());
      const double s = ic.p0.sum();
      if (std::abs(s - 1.0) > kStochasticTol)
        add_issue(report, "distribution-sum", "p0 does not sum to 1", s - 1.0);
    }
  }
  return report;
}

ValidationReport validate_terminal(const MjlsModel& model, const TerminalWeights& weights) {
  ValidationReport report;
  if (static_cast<int>(weights.Z.size()) != model.mode_count()) {
    add_issue(report, "dimension", "terminal weights count does not match the mode count", 0.0);
    return report;
  }
  for (int i = 0; i < model.mode_count(); ++i) {
    const Matrix& Z = weights.Z[static_cast<std::size_t>(i)];
    std::ostringstream where;
    where << "terminal weight " << (i + 1);
    if (Z.rows() != model.dims.nx || Z.cols() != model.dims.nx) {
      add_issue(report, "dimension", where.str() + ": not nx x nx", 0.0);
      continue;
    }
    const double asym = (Z - Z.transpose()).norm();
    if (asym > kOrthogonalityTol * (1.0 + Z.norm()))
      add_issue(report, "terminal-symmetric", where.str() + ": not symmetric", asym);
    const double zmin = min_eigenvalue_sym(Z);
    if (zmin < -kStochasticTol * (1.0 + Z.norm()))
      add_issue(report, "terminal-psd", where.str() + ": not PSD", zmin);
  }
  return report;
}

MjlsModel samuelson_model() {
  MjlsModel model;
  model.dims = {2, 1, 3};
  ModeMatrices m1, m2, m3;
  m1.A = (Matrix(2, 2) << 0.0, 1.0, -2.2308, 2.5462).finished();
  m2.A = (Matrix(2, 2) << 0.0, 1.0, -38.9103, 2.5462).finished();
  m3.A = (Matrix(2, 2) << 0.0, 1.0, 4.6384, -4.7455).finished();
  m1.B = m2.B = m3.B = (Matrix(2, 1) << 0.0, 1.0).finished();
  m1.C = (Matrix(3, 2) << 1.5049, -1.0709, -1.0709, 1.6160, 0.0, 0.0).finished();
  m2.C = (Matrix(3, 2) << 10.2036, -10.3952, -10.3952, 11.2819, 0.0, 0.0).finished();
  m3.C = (Matrix(3, 2) << 1.7335, -1.2255, -1.2255, 1.6639, 0.0, 0.0).finished();
  m1.D = (Matrix(3, 1) << 0.0, 0.0, 1.6125).finished();
  m2.D = (Matrix(3, 1) << 0.0, 0.0, 1.0794).finished();
  m3.D = (Matrix(3, 1) << 0.0, 0.0, 1.0540).finished();
  model.modes = {m1, m2, m3};
  return model;
}

TpmPolytope samuelson_polytope(int n_vertices) {
  TpmPolytope poly;
  poly.vertices.push_back(
      (Matrix(3, 3) << 0.51, 0.25, 0.24, 0.14, 0.55, 0.31, 0.10, 0.18, 0.72).finished());
  poly.vertices.push_back(
      (Matrix(3, 3) << 0.83, 0.09, 0.08, 0.46, 0.39, 0.15, 0.42, 0.02, 0.56).finished());
  poly.vertices.push_back(
      (Matrix(3, 3) << 0.50, 0.25, 0.25, 0.20, 0.50, 0.30, 0.30, 0.30, 0.40).finished());
  poly.vertices.push_back(Matrix::Identity(3, 3));
  if (n_vertices < static_cast<int>(poly.vertices.size()))
    poly.vertices.resize(static_cast<std::size_t>(n_vertices));
  return poly;
}

TerminalWeights samuelson_terminal_weights() {
  TerminalWeights w;
  w.Z = {2.0 * Matrix::Identity(2, 2), Matrix::Identity(2, 2), 4.0 * Matrix::Identity(2, 2)};
  return w;
}

}  // namespace mjls
