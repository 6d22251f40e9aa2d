#pragma once

#include "mjls/model.hpp"

#include <cstddef>
#include <limits>
#include <vector>

namespace mjls {

enum class LiftKind { open_loop, closed_loop, filter };

/// Second-moment lifted family: one matrix of order N*nx^2 per polytope vertex.
struct LiftedFamily {
  std::vector<Matrix> matrices;
  LiftKind kind = LiftKind::open_loop;

  int size() const { return static_cast<int>(matrices.size()); }
  Eigen::Index order() const { return matrices.empty() ? 0 : matrices.front().rows(); }
};

struct JsrOptions {
  int max_depth = 400;
  double gap = 1e-4;
  std::size_t max_nodes = 500000;
  // Early exit once the lower bound reaches this value (used by stability
  // verdicts, where lower >= 1 already decides instability).
  double stop_if_lower_at_least = std::numeric_limits<double>::infinity();
};

struct JsrCertificate {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
  int depth = 0;           // deepest product length explored
  bool converged = false;  // upper - lower <= requested gap
  std::size_t nodes = 0;   // products formed
};

/// Lifts the autonomous dynamics: Lambda_v = (P_v' kron I)(blkdiag_i A_i kron A_i).
LiftedFamily lift_open_loop(const MjlsModel& model, const TpmPolytope& polytope);

/// Same lift with A_i replaced by A_i + B_i K_i.
LiftedFamily lift_closed_loop(const MjlsModel& model, const TpmPolytope& polytope,
                              const std::vector<Matrix>& gains);

/// Same lift with A_i replaced by A_i + G_i C_i (filter error dynamics).
LiftedFamily lift_filter(const MjlsModel& model, const TpmPolytope& polytope,
                         const std::vector<Matrix>& filter_gains);

/// Largest eigenvalue modulus of a dense square matrix.
/// Throws std::runtime_error if the eigenvalue iteration fails to converge.
double spectral_radius(const Matrix& m);

/// Certified bounds on the joint spectral radius of the family via a
/// norm-product branch-and-bound with spectral-radius lower refinement.
JsrCertificate jsr_bounds(const LiftedFamily& family, const JsrOptions& options = {});
JsrCertificate jsr_bounds(const LiftedFamily& family, int max_depth, double gap);

enum class MssVerdict { stable, unstable, undecided };

struct MssResult {
  MssVerdict verdict = MssVerdict::undecided;
  JsrCertificate certificate;
  std::vector<double> vertex_spectral_radii;  // rho(Lambda_v) per vertex
};

/// Mean square stability of the open loop: stable iff the JSR upper bound of
/// the lifted family is < 1, unstable iff the lower bound is >= 1.
MssResult is_mss(const MjlsModel& model, const TpmPolytope& polytope,
                 const JsrOptions& options = {});

/// One certificate per gain set; a set is certified stabilizing iff upper < 1.
std::vector<JsrCertificate> verify_stabilizing(
    const MjlsModel& model, const TpmPolytope& polytope,
    const std::vector<std::vector<Matrix>>& gain_sets, const JsrOptions& options = {});

}  // namespace mjls
