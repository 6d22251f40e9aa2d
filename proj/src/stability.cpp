#include "mjls/stability.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace mjls {

namespace {

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

LiftedFamily lift(const std::vector<Matrix>& closed, const TpmPolytope& polytope,
                  LiftKind kind) {
  const int n_modes = static_cast<int>(closed.size());
  const Eigen::Index n2 = closed.front().rows() * closed.front().rows();
  std::vector<Matrix> kron_blocks;
  kron_blocks.reserve(closed.size());
  for (const Matrix& g : closed) kron_blocks.push_back(kron(g, g));

  LiftedFamily family;
  family.kind = kind;
  for (const Matrix& P : polytope.vertices) {
    Matrix M = Matrix::Zero(n_modes * n2, n_modes * n2);
    for (int i = 0; i < n_modes; ++i)
      for (int j = 0; j < n_modes; ++j)
        M.block(i * n2, j * n2, n2, n2) = P(j, i) * kron_blocks[static_cast<std::size_t>(j)];
    family.matrices.push_back(std::move(M));
  }
  return family;
}

double operator_norm(const Matrix& m) {
  if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.transpose() * m, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

// Common quadratic norm adapted to the scaled family: fixed point of
// W <- I + (1/V) sum (M/s)' W (M/s), returned as the Cholesky factor of W.
std::optional<Matrix> averaged_lyapunov_factor(const std::vector<Matrix>& family,
                                               double scale) {
  if (!(scale > 0.0)) return std::nullopt;
  const Eigen::Index n = family.front().rows();
  std::vector<Matrix> scaled;
  scaled.reserve(family.size());
  for (const Matrix& m : family) scaled.push_back(m / scale);
  Matrix W = Matrix::Identity(n, n);
  for (int it = 0; it < 500; ++it) {
    Matrix Wn = Matrix::Identity(n, n);
    for (const Matrix& m : scaled)
      Wn += m.transpose() * W * m / static_cast<double>(scaled.size());
    const double change = (Wn - W).norm();
    W = std::move(Wn);
    if (W.norm() > 1e14) return std::nullopt;
    if (change <= 1e-12 * W.norm()) break;
  }
  Eigen::LLT<Matrix> llt(symmetrize(W));
  if (llt.info() != Eigen::Success) return std::nullopt;
  return Matrix(llt.matrixL());
}

struct SearchNode {
  Matrix product;  // in the transformed, scaled coordinates
  double pi;       // min over prefixes of ||prefix||^(1/len)
};

struct RunResult {
  double lower;
  double upper = std::numeric_limits<double>::infinity();
  int depth = 0;
  std::size_t nodes = 0;
};

// Depth-synchronous branch-and-bound over one fixed coordinate system.
// `transformed` is pointwise similar to the original family divided by
// `scale`; spectral radii scale back by `scale`, norm bounds likewise.
RunResult branch_and_bound(const std::vector<Matrix>& transformed, double scale,
                           const JsrOptions& opt, double initial_lower) {
  RunResult st;
  st.lower = initial_lower;
  const int n_members = static_cast<int>(transformed.size());
  double pruned_ceiling = 0.0;  // scaled units

  std::vector<SearchNode> frontier;
  double level_max_pi = 0.0;
  for (const Matrix& m : transformed) {
    ++st.nodes;
    st.lower = std::max(st.lower, spectral_radius(m) * scale);
    SearchNode node{m, operator_norm(m)};
    level_max_pi = std::max(level_max_pi, node.pi);
    frontier.push_back(std::move(node));
  }
  st.depth = 1;
  st.upper = std::min(st.upper, level_max_pi * scale);

  auto prune_level = [&](std::vector<SearchNode>& nodes) {
    const double threshold = (st.lower + opt.gap) / scale;
    std::vector<SearchNode> kept;
    for (SearchNode& n : nodes) {
      if (n.pi <= threshold)
        pruned_ceiling = std::max(pruned_ceiling, n.pi);
      else
        kept.push_back(std::move(n));
    }
    nodes = std::move(kept);
  };
  prune_level(frontier);

  int depth = 1;
  while (!frontier.empty() && depth < opt.max_depth && st.nodes < opt.max_nodes &&
         st.lower < opt.stop_if_lower_at_least) {
    ++depth;
    std::vector<SearchNode> next;
    next.reserve(frontier.size() * static_cast<std::size_t>(n_members));
    double max_pi = 0.0;
    const double inv_depth = 1.0 / static_cast<double>(depth);
    bool level_complete = true;
    for (const SearchNode& node : frontier) {
      for (int v = 0; v < n_members; ++v) {
        Matrix prod = node.product * transformed[static_cast<std::size_t>(v)];
        ++st.nodes;
        st.lower = std::max(st.lower, std::pow(spectral_radius(prod), inv_depth) * scale);
        const double pi = std::min(node.pi, std::pow(operator_norm(prod), inv_depth));
        max_pi = std::max(max_pi, pi);
        next.push_back({std::move(prod), pi});
      }
      if (st.nodes >= opt.max_nodes && &node != &frontier.back()) {
        level_complete = false;
        break;
      }
    }
    st.depth = depth;
    // An incomplete level cannot certify an upper bound.
    if (level_complete)
      st.upper = std::min(st.upper, std::max(max_pi, pruned_ceiling) * scale);
    prune_level(next);
    frontier = std::move(next);
    if (!level_complete) break;
  }
  if (frontier.empty())
    st.upper = std::min(st.upper, std::max(st.lower + opt.gap, pruned_ceiling * scale));
  return st;
}

}  // namespace

LiftedFamily lift_open_loop(const MjlsModel& model, const TpmPolytope& polytope) {
  std::vector<Matrix> a;
  a.reserve(model.modes.size());
  for (const auto& m : model.modes) a.push_back(m.A);
  return lift(a, polytope, LiftKind::open_loop);
}

LiftedFamily lift_closed_loop(const MjlsModel& model, const TpmPolytope& polytope,
                              const std::vector<Matrix>& gains) {
  if (static_cast<int>(gains.size()) != model.mode_count())
    throw std::invalid_argument("lift_closed_loop: one gain per mode required");
  std::vector<Matrix> closed;
  closed.reserve(gains.size());
  for (std::size_t i = 0; i < gains.size(); ++i) {
    const auto& m = model.modes[i];
    if (gains[i].rows() != model.dims.nu || gains[i].cols() != model.dims.nx)
      throw std::invalid_argument("lift_closed_loop: gain must be nu x nx");
    closed.push_back(m.A + m.B * gains[i]);
  }
  return lift(closed, polytope, LiftKind::closed_loop);
}

LiftedFamily lift_filter(const MjlsModel& model, const TpmPolytope& polytope,
                         const std::vector<Matrix>& filter_gains) {
  if (static_cast<int>(filter_gains.size()) != model.mode_count())
    throw std::invalid_argument("lift_filter: one gain per mode required");
  std::vector<Matrix> closed;
  closed.reserve(filter_gains.size());
  for (std::size_t i = 0; i < filter_gains.size(); ++i) {
    const auto& m = model.modes[i];
    if (filter_gains[i].rows() != model.dims.nx || filter_gains[i].cols() != model.dims.nz)
      throw std::invalid_argument("lift_filter: gain must be nx x nz");
    closed.push_back(m.A + filter_gains[i] * m.C);
  }
  return lift(closed, polytope, LiftKind::filter);
}

double spectral_radius(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("spectral_radius: matrix not square");
  if (!m.allFinite()) throw std::invalid_argument("spectral_radius: non-finite entries");
  if (m.rows() == 1) return std::abs(m(0, 0));
  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "spectral_radius: eigenvalue iteration did not converge within "
        << 30 * m.rows() << " iterations";
    throw std::runtime_error(msg.str());
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

JsrCertificate jsr_bounds(const LiftedFamily& family, const JsrOptions& options) {
  if (family.matrices.empty()) throw std::invalid_argument("jsr_bounds: empty family");
  if (options.max_depth < 1) throw std::invalid_argument("jsr_bounds: max_depth must be >= 1");

  double lower = 0.0;
  std::size_t nodes = 0;

  // Preliminary lower bound from short products (capped enumeration).
  {
    std::vector<Matrix> level = family.matrices;
    for (const Matrix& m : level) lower = std::max(lower, spectral_radius(m));
    const int prelim_depth = std::min(4, options.max_depth);
    for (int depth = 2; depth <= prelim_depth && level.size() < 3000; ++depth) {
      std::vector<Matrix> next;
      next.reserve(level.size() * family.matrices.size());
      for (const Matrix& p : level)
        for (const Matrix& m : family.matrices) {
          next.push_back(p * m);
          lower = std::max(lower, std::pow(spectral_radius(next.back()),
                                           1.0 / static_cast<double>(depth)));
          ++nodes;
        }
      level = std::move(next);
    }
  }

  double norm_scale = 0.0;
  for (const Matrix& m : family.matrices) norm_scale = std::max(norm_scale, operator_norm(m));
  if (norm_scale == 0.0) return {0.0, 0.0, 1, true, nodes};
  const double scale = lower > 0.0 ? lower : norm_scale;

  // Candidate coordinate systems: raw, plus the averaged-Lyapunov norm.
  std::vector<std::vector<Matrix>> coords;
  coords.push_back(family.matrices);
  if (auto factor = averaged_lyapunov_factor(family.matrices, 1.02 * scale)) {
    const Matrix Lt = factor->transpose();
    const Matrix Lt_inv =
        Lt.triangularView<Eigen::Upper>().solve(Matrix::Identity(Lt.rows(), Lt.cols()));
    std::vector<Matrix> transformed;
    transformed.reserve(family.matrices.size());
    bool ok = true;
    for (const Matrix& m : family.matrices) {
      Matrix t = Lt * m * Lt_inv;
      if (!t.allFinite()) {
        ok = false;
        break;
      }
      transformed.push_back(std::move(t));
    }
    if (ok) coords.push_back(std::move(transformed));
  }

  auto scaled_copy = [&](const std::vector<Matrix>& ms) {
    std::vector<Matrix> out;
    out.reserve(ms.size());
    for (const Matrix& m : ms) out.push_back(m / scale);
    return out;
  };

  double upper = std::numeric_limits<double>::infinity();
  int depth_explored = 0;
  constexpr int kTrialDepth = 8;

  if (options.max_depth <= kTrialDepth || coords.size() == 1) {
    // Shallow budget: run every coordinate system in full and take the best.
    for (const auto& coord : coords) {
      RunResult run = branch_and_bound(scaled_copy(coord), scale, options, lower);
      lower = std::max(lower, run.lower);
      nodes += run.nodes;
      upper = std::min(upper, run.upper);
      depth_explored = std::max(depth_explored, run.depth);
    }
  } else {
    // Fixed-depth trials pick the coordinate system; their bounds still count.
    std::size_t best = 0;
    double best_upper = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < coords.size(); ++c) {
      JsrOptions topt = options;
      topt.max_depth = kTrialDepth;
      topt.max_nodes = 20000;
      RunResult trial = branch_and_bound(scaled_copy(coords[c]), scale, topt, lower);
      lower = std::max(lower, trial.lower);
      nodes += trial.nodes;
      upper = std::min(upper, trial.upper);
      depth_explored = std::max(depth_explored, trial.depth);
      if (trial.upper < best_upper) {
        best_upper = trial.upper;
        best = c;
      }
    }
    RunResult main_run = branch_and_bound(scaled_copy(coords[best]), scale, options, lower);
    lower = std::max(lower, main_run.lower);
    nodes += main_run.nodes;
    upper = std::min(upper, main_run.upper);
    depth_explored = std::max(depth_explored, main_run.depth);
  }

  JsrCertificate cert;
  cert.lower = lower;
  cert.upper = std::max(upper, lower);
  cert.depth = depth_explored;
  cert.nodes = nodes;
  cert.converged = (cert.upper - cert.lower) <= options.gap;
  return cert;
}

JsrCertificate jsr_bounds(const LiftedFamily& family, int max_depth, double gap) {
  JsrOptions opt;
  opt.max_depth = max_depth;
  opt.gap = gap;
  return jsr_bounds(family, opt);
}

MssResult is_mss(const MjlsModel& model, const TpmPolytope& polytope,
                 const JsrOptions& options) {
  MssResult result;
  const LiftedFamily family = lift_open_loop(model, polytope);
  for (const Matrix& m : family.matrices)
    result.vertex_spectral_radii.push_back(spectral_radius(m));
  JsrOptions opt = options;
  opt.stop_if_lower_at_least = 1.0;
  result.certificate = jsr_bounds(family, opt);
  if (result.certificate.lower >= 1.0)
    result.verdict = MssVerdict::unstable;
  else if (result.certificate.upper < 1.0)
    result.verdict = MssVerdict::stable;
  else
    result.verdict = MssVerdict::undecided;
  return result;
}

std::vector<JsrCertificate> verify_stabilizing(
    const MjlsModel& model, const TpmPolytope& polytope,
    const std::vector<std::vector<Matrix>>& gain_sets, const JsrOptions& options) {
  std::vector<JsrCertificate> certs;
  certs.reserve(gain_sets.size());
  for (const auto& gains : gain_sets)
    certs.push_back(jsr_bounds(lift_closed_loop(model, polytope, gains), options));
  return certs;
}

}  // namespace mjls
