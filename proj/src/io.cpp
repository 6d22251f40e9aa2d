#include "mjls/io.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <ostream>
#include <sstream>

namespace mjls {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ParseError(where + ": " + what);
}

const json& require(const json& j, const char* field, const std::string& where) {
  auto it = j.find(field);
  if (it == j.end()) fail(where, std::string("missing field '") + field + "'");
  return *it;
}

Matrix parse_matrix(const json& j, Eigen::Index rows, Eigen::Index cols,
                    const std::string& where) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    fail(where, "expected a " + std::to_string(rows) + "-row matrix");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      fail(where, "row " + std::to_string(r + 1) + " must have " + std::to_string(cols) +
                      " entries");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& cell = row[static_cast<std::size_t>(c)];
      if (!cell.is_number()) fail(where, "non-numeric entry");
      m(r, c) = cell.get<double>();
    }
  }
  return m;
}

Vector parse_vector(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(where, "non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json certificate_to_json(const JsrCertificate& cert) {
  return json{{"lower", cert.lower},
              {"upper", cert.upper},
              {"depth", cert.depth},
              {"converged", cert.converged},
              {"nodes", cert.nodes}};
}

json mode_info_to_json(const ModeInfo& mode) {
  if (mode.mode_known()) return json{{"theta0", mode.theta + 1}};
  return json{{"p0", vector_to_json(mode.p)}};
}

Problem parse_problem_json(const json& root) {
  Problem problem;
  const json& dims = require(root, "dims", "dims");
  problem.model.dims.nx = require(dims, "nx", "dims").get<Eigen::Index>();
  problem.model.dims.nu = require(dims, "nu", "dims").get<Eigen::Index>();
  problem.model.dims.nz = require(dims, "nz", "dims").get<Eigen::Index>();
  if (problem.model.dims.nx < 1 || problem.model.dims.nu < 1 || problem.model.dims.nz < 1)
    fail("dims", "nx, nu, nz must be positive");

  const int n_modes = require(root, "n_modes", "n_modes").get<int>();
  if (n_modes < 1) fail("n_modes", "must be >= 1");

  const json& modes = require(root, "modes", "modes");
  if (!modes.is_array() || static_cast<int>(modes.size()) != n_modes)
    fail("modes", "expected an array of n_modes entries");
  const auto& d = problem.model.dims;
  for (int i = 0; i < n_modes; ++i) {
    const json& m = modes[static_cast<std::size_t>(i)];
    const std::string where = "modes[" + std::to_string(i + 1) + "]";
    ModeMatrices mm;
    mm.A = parse_matrix(require(m, "A", where + ".A"), d.nx, d.nx, where + ".A");
    mm.B = parse_matrix(require(m, "B", where + ".B"), d.nx, d.nu, where + ".B");
    mm.C = parse_matrix(require(m, "C", where + ".C"), d.nz, d.nx, where + ".C");
    mm.D = parse_matrix(require(m, "D", where + ".D"), d.nz, d.nu, where + ".D");
    problem.model.modes.push_back(std::move(mm));
  }

  const json& vertices = require(root, "tpm_vertices", "tpm_vertices");
  if (!vertices.is_array() || vertices.empty())
    fail("tpm_vertices", "expected a nonempty array of N x N matrices");
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    const std::string where = "tpm_vertices[" + std::to_string(v + 1) + "]";
    problem.polytope.vertices.push_back(
        parse_matrix(vertices[v], n_modes, n_modes, where));
  }

  if (auto it = root.find("terminal_weights"); it != root.end() && !it->is_null()) {
    if (!it->is_array() || static_cast<int>(it->size()) != n_modes)
      fail("terminal_weights", "expected one nx x nx matrix per mode");
    TerminalWeights w;
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string where = "terminal_weights[" + std::to_string(i + 1) + "]";
      w.Z.push_back(parse_matrix((*it)[i], d.nx, d.nx, where));
    }
    problem.terminal = std::move(w);
  }

  if (auto it = root.find("initial"); it != root.end() && !it->is_null()) {
    InitialCondition ic;
    ic.x0 = parse_vector(require(*it, "x0", "initial.x0"), "initial.x0");
    if (ic.x0.size() != d.nx) fail("initial.x0", "length does not match dims.nx");
    const bool has_theta = it->contains("theta0");
    const bool has_p = it->contains("p0");
    if (has_theta == has_p)
      fail("initial", "exactly one of theta0 and p0 must be given");
    if (has_theta) {
      const int theta1 = (*it)["theta0"].get<int>();
      if (theta1 < 1 || theta1 > n_modes) fail("initial.theta0", "mode index out of range");
      ic.theta0 = theta1 - 1;
    } else {
      ic.p0 = parse_vector((*it)["p0"], "initial.p0");
      if (ic.p0.size() != n_modes) fail("initial.p0", "length does not match n_modes");
    }
    problem.initial = std::move(ic);
  }
  return problem;
}

}  // namespace

Problem parse_problem_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  return parse_problem_json(root);
}

Problem parse_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_problem_text(buffer.str());
}

Problem load_problem(const std::string& path) {
  Problem problem = parse_problem(path);
  ValidationReport report = validate_model(problem.model, problem.polytope);
  if (problem.terminal) {
    ValidationReport t = validate_terminal(problem.model, *problem.terminal);
    report.issues.insert(report.issues.end(), t.issues.begin(), t.issues.end());
  }
  if (problem.initial) {
    ValidationReport t = validate_initial(problem.model, *problem.initial);
    report.issues.insert(report.issues.end(), t.issues.begin(), t.issues.end());
  }
  if (!report.valid()) {
    std::ostringstream msg;
    msg << "problem data violates " << report.issues.size() << " invariant(s); first: "
        << report.issues.front().message;
    throw ValidationError(msg.str(), std::move(report));
  }
  return problem;
}

std::string serialize_problem(const Problem& problem) {
  json root;
  root["n_modes"] = problem.model.mode_count();
  root["dims"] = {{"nx", problem.model.dims.nx},
                  {"nu", problem.model.dims.nu},
                  {"nz", problem.model.dims.nz}};
  json modes = json::array();
  for (const auto& m : problem.model.modes)
    modes.push_back(json{{"A", matrix_to_json(m.A)},
                         {"B", matrix_to_json(m.B)},
                         {"C", matrix_to_json(m.C)},
                         {"D", matrix_to_json(m.D)}});
  root["modes"] = std::move(modes);
  json vertices = json::array();
  for (const auto& v : problem.polytope.vertices) vertices.push_back(matrix_to_json(v));
  root["tpm_vertices"] = std::move(vertices);
  if (problem.terminal) {
    json weights = json::array();
    for (const auto& z : problem.terminal->Z) weights.push_back(matrix_to_json(z));
    root["terminal_weights"] = std::move(weights);
  }
  if (problem.initial) {
    json initial;
    initial["x0"] = vector_to_json(problem.initial->x0);
    if (problem.initial->mode_known())
      initial["theta0"] = problem.initial->theta0 + 1;
    else
      initial["p0"] = vector_to_json(problem.initial->p0);
    root["initial"] = std::move(initial);
  }
  return root.dump(2);
}

void save_problem(const Problem& problem, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write file: " + path);
  out << serialize_problem(problem) << "\n";
}

std::string validation_report_json(const ValidationReport& report) {
  json issues = json::array();
  for (const auto& issue : report.issues)
    issues.push_back(json{{"kind", issue.kind},
                          {"message", issue.message},
                          {"residual", issue.residual}});
  return json{{"valid", report.valid()}, {"issues", std::move(issues)}}.dump(2);
}

std::string stability_report_json(const MssResult& result) {
  const char* verdict = result.verdict == MssVerdict::stable     ? "stable"
                        : result.verdict == MssVerdict::unstable ? "unstable"
                                                                 : "undecided";
  json radii = json::array();
  for (double r : result.vertex_spectral_radii) radii.push_back(r);
  return json{{"verdict", verdict},
              {"vertex_spectral_radii", std::move(radii)},
              {"jsr", certificate_to_json(result.certificate)}}
      .dump(2);
}

std::string finite_report_json(const FiniteHorizonSolution& solution, const Vector& x0,
                               const ModeInfo& mode) {
  json steps = json::array();
  for (const StepProfile& p : branch_profile(solution))
    steps.push_back(json{{"step", p.step},
                         {"candidates", p.candidate_count},
                         {"retained", p.retained_count}});
  json branches = json::array();
  const ParsimoniousSet& first = solution.at_step(0);
  for (const RiccatiBranch& b : first.branches) {
    json gains = json::array();
    for (const Matrix& k : b.K) gains.push_back(matrix_to_json(k));
    branches.push_back(json{{"lineage_head", lineage_vector(b.lineage)},
                            {"gains", std::move(gains)}});
  }
  const CostToGo cost = cost_to_go(first, x0, mode);
  json root{{"horizon", solution.horizon},
            {"steps", std::move(steps)},
            {"step0_branches", std::move(branches)},
            {"initial", mode_info_to_json(mode)},
            {"x0", vector_to_json(x0)},
            {"optimal_cost", cost.value},
            {"selected_branch", cost.branch + 1}};
  return root.dump(2);
}

std::string infinite_report_json(const StabilizingSolution& solution, const Vector& x0,
                                 const ModeInfo& mode) {
  json branches = json::array();
  for (const CareBranch& b : solution.branches) {
    json gains = json::array();
    for (const Matrix& k : b.K) gains.push_back(matrix_to_json(k));
    json xs = json::array();
    for (const Matrix& x : b.X) xs.push_back(matrix_to_json(x));
    branches.push_back(json{{"vertex", b.vertex + 1},
                            {"gains", std::move(gains)},
                            {"X", std::move(xs)},
                            {"iterations", b.iterations},
                            {"residual", b.residual},
                            {"jsr", certificate_to_json(b.certificate)}});
  }
  json discarded = json::array();
  for (const DiscardedBranch& d : solution.discarded) {
    json doms = json::array();
    for (int v : d.dominators) doms.push_back(v + 1);
    discarded.push_back(json{{"vertex", d.vertex + 1}, {"dominators", std::move(doms)}});
  }
  const InfiniteCost cost = infinite_cost(solution, x0, mode);
  json values = json::array();
  for (double v : cost.branch_values) values.push_back(v);
  json root{{"certified", solution.certified},
            {"branches", std::move(branches)},
            {"discarded", std::move(discarded)},
            {"initial", mode_info_to_json(mode)},
            {"x0", vector_to_json(x0)},
            {"cost", json{{"value", cost.value},
                          {"selected_branch", cost.branch + 1},
                          {"branch_values", std::move(values)}}}};
  return root.dump(2);
}

std::string monte_carlo_report_json(const MonteCarloCost& cost, std::uint64_t seed) {
  return json{{"mean", cost.mean},
              {"stderr", cost.stderr_mean},
              {"n_runs", cost.n_runs},
              {"seed", seed}}
      .dump(2);
}

void write_trajectory_csv(const ClosedLoopTrajectory& trajectory, std::ostream& out) {
  const Eigen::Index nx = trajectory.x.front().size();
  const Eigen::Index nu = trajectory.u.empty() ? 0 : trajectory.u.front().size();
  out << "k,theta,vertex";
  for (Eigen::Index i = 1; i <= nx; ++i) out << ",x_" << i;
  for (Eigen::Index i = 1; i <= nu; ++i) out << ",u_" << i;
  out << ",cost_stage,cost_cum\n";
  out.precision(17);
  double cum = 0.0;
  const std::size_t horizon = trajectory.u.size();
  for (std::size_t k = 0; k < horizon; ++k) {
    cum += trajectory.stage_cost[k];
    out << k << ',' << trajectory.theta[k] + 1 << ','
        << (trajectory.vertex[k] >= 0 ? trajectory.vertex[k] + 1 : 0);
    for (Eigen::Index i = 0; i < nx; ++i) out << ',' << trajectory.x[k](i);
    for (Eigen::Index i = 0; i < nu; ++i) out << ',' << trajectory.u[k](i);
    out << ',' << trajectory.stage_cost[k] << ',' << cum << '\n';
  }
  // Final row: terminal state; stage column carries the terminal cost.
  out << horizon << ',' << trajectory.theta[horizon] + 1 << ",0";
  for (Eigen::Index i = 0; i < nx; ++i) out << ',' << trajectory.x[horizon](i);
  for (Eigen::Index i = 0; i < nu; ++i) out << ",0";
  out << ',' << trajectory.terminal_cost << ',' << trajectory.total_cost << '\n';
}

}  // namespace mjls
