// Command-line front end: validate problems, certify stability, solve the
// finite- and infinite-horizon robust control problems, simulate, and
// reproduce the bundled benchmark example.
#include <CLI11.hpp>

#include "mjls/io.hpp"
#include "mjls/samuelson_reference.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;   // invariant violations / unstable
constexpr int kExitParse = 2;     // unreadable or unparseable input
constexpr int kExitUndecided = 3; // stability verdict undecided
constexpr int kExitSolver = 4;    // solver failure

mjls::Vector parse_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    values.push_back(std::stod(item));
  }
  mjls::Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v(static_cast<Eigen::Index>(i)) = values[i];
  return v;
}

struct CommonArgs {
  std::string problem_path;
  int horizon = 8;
  std::string x0_text;
  int theta0 = 0;  // 1-based; 0 means unset
  std::string p0_text;
  std::uint64_t seed = 1;
  int runs = 1;
  std::string out_path;
  bool json = false;
  double tol = 0.0;  // 0 means command default
  int jsr_depth = 400;
  double jsr_gap = 1e-4;
  bool no_prune = false;
  bool paper_prune = false;
  int budget = 10000;
};

void add_common_flags(CLI::App* cmd, CommonArgs& args, bool with_problem = true) {
  if (with_problem)
    cmd->add_option("problem", args.problem_path, "problem file (JSON)")->required();
  cmd->add_option("-T,--horizon", args.horizon, "finite horizon length");
  cmd->add_option("--x0", args.x0_text, "initial state, comma separated");
  cmd->add_option("--theta0", args.theta0, "initial mode (1-based)");
  cmd->add_option("--p0", args.p0_text, "initial mode distribution, comma separated");
  cmd->add_option("--seed", args.seed, "random seed");
  cmd->add_option("--runs", args.runs, "Monte Carlo run count");
  cmd->add_option("--out", args.out_path, "write the report to this path");
  cmd->add_flag("--json", args.json, "machine-readable output");
  cmd->add_option("--tol", args.tol, "tolerance override (command specific)");
  cmd->add_option("--jsr-depth", args.jsr_depth, "max product length for JSR bounds");
  cmd->add_option("--jsr-gap", args.jsr_gap, "requested JSR bound gap");
  cmd->add_flag("--no-prune", args.no_prune, "keep every Riccati branch");
  cmd->add_flag("--paper-prune", args.paper_prune,
                "use the benchmark-reproduction pruning (consolidation + coverage)");
  cmd->add_option("--budget", args.budget, "branch budget per backward step");
}

void emit(const CommonArgs& args, const std::string& text) {
  if (!args.out_path.empty()) {
    std::ofstream out(args.out_path);
    out << text << "\n";
  }
  std::cout << text << "\n";
}

mjls::ModeInfo initial_mode(const CommonArgs& args, const mjls::Problem& problem) {
  if (args.theta0 > 0) return mjls::ModeInfo::known(args.theta0 - 1);
  if (!args.p0_text.empty()) return mjls::ModeInfo::distribution(parse_list(args.p0_text));
  if (problem.initial) {
    if (problem.initial->mode_known()) return mjls::ModeInfo::known(problem.initial->theta0);
    return mjls::ModeInfo::distribution(problem.initial->p0);
  }
  throw mjls::ParseError("no initial mode: pass --theta0/--p0 or add 'initial' to the file");
}

mjls::Vector initial_state(const CommonArgs& args, const mjls::Problem& problem) {
  if (!args.x0_text.empty()) return parse_list(args.x0_text);
  if (problem.initial) return problem.initial->x0;
  throw mjls::ParseError("no initial state: pass --x0 or add 'initial' to the file");
}

mjls::SolveOptions solve_options(const CommonArgs& args) {
  mjls::SolveOptions options;
  options.prune = !args.no_prune;
  if (args.paper_prune) options.prune_options = mjls::PruneOptions::paper();
  if (args.tol > 0.0) options.prune_options.tol = args.tol;
  options.branch_budget = args.budget;
  return options;
}

mjls::JsrOptions jsr_options(const CommonArgs& args) {
  mjls::JsrOptions options;
  options.max_depth = args.jsr_depth;
  options.gap = args.jsr_gap;
  return options;
}

int cmd_validate(const CommonArgs& args) {
  mjls::Problem problem;
  try {
    problem = mjls::parse_problem(args.problem_path);
  } catch (const mjls::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  }
  mjls::ValidationReport report = mjls::validate_model(problem.model, problem.polytope);
  if (problem.terminal) {
    auto t = mjls::validate_terminal(problem.model, *problem.terminal);
    report.issues.insert(report.issues.end(), t.issues.begin(), t.issues.end());
  }
  if (problem.initial) {
    auto t = mjls::validate_initial(problem.model, *problem.initial);
    report.issues.insert(report.issues.end(), t.issues.begin(), t.issues.end());
  }
  if (args.json) {
    emit(args, mjls::validation_report_json(report));
  } else if (report.valid()) {
    emit(args, "valid: all invariants hold");
  } else {
    std::ostringstream out;
    out << report.issues.size() << " violation(s):";
    for (const auto& issue : report.issues)
      out << "\n  [" << issue.kind << "] " << issue.message
          << " (residual " << issue.residual << ")";
    emit(args, out.str());
  }
  return report.valid() ? kExitOk : kExitInvalid;
}

int cmd_stability(const CommonArgs& args) {
  mjls::Problem problem;
  try {
    problem = mjls::load_problem(args.problem_path);
  } catch (const mjls::ValidationError& e) {
    std::cerr << "invalid problem: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const mjls::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  }
  const mjls::MssResult result = mjls::is_mss(problem.model, problem.polytope, jsr_options(args));
  if (args.json) {
    emit(args, mjls::stability_report_json(result));
  } else {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    for (std::size_t v = 0; v < result.vertex_spectral_radii.size(); ++v)
      out << "rho(Lambda_" << (v + 1) << ") = " << result.vertex_spectral_radii[v] << "\n";
    out << "JSR bounds: [" << result.certificate.lower << ", " << result.certificate.upper
        << "] depth " << result.certificate.depth
        << (result.certificate.converged ? " (converged)" : " (budget exhausted)") << "\n";
    out << "verdict: "
        << (result.verdict == mjls::MssVerdict::stable     ? "mean square stable"
            : result.verdict == mjls::MssVerdict::unstable ? "not mean square stable"
                                                           : "undecided");
    emit(args, out.str());
  }
  switch (result.verdict) {
    case mjls::MssVerdict::stable: return kExitOk;
    case mjls::MssVerdict::unstable: return kExitInvalid;
    case mjls::MssVerdict::undecided: return kExitUndecided;
  }
  return kExitUndecided;
}

int cmd_finite(const CommonArgs& args) {
  try {
    const mjls::Problem problem = mjls::load_problem(args.problem_path);
    const mjls::TerminalWeights terminal =
        problem.terminal ? *problem.terminal
                         : mjls::TerminalWeights::zero(problem.model.mode_count(),
                                                       problem.model.dims.nx);
    const mjls::FiniteHorizonSolution solution = mjls::solve_finite_horizon(
        problem.model, problem.polytope, terminal, args.horizon, solve_options(args));
    const mjls::Vector x0 = initial_state(args, problem);
    const mjls::ModeInfo mode = initial_mode(args, problem);
    if (args.json) {
      emit(args, mjls::finite_report_json(solution, x0, mode));
    } else {
      const mjls::CostToGo cost = mjls::cost_to_go(solution.at_step(0), x0, mode);
      std::ostringstream out;
      out << "horizon " << solution.horizon << ", step-0 branches "
          << solution.at_step(0).branches.size() << "\n";
      out << std::fixed << std::setprecision(4);
      const auto& branches = solution.at_step(0).branches;
      for (std::size_t l = 0; l < branches.size(); ++l) {
        out << "branch " << (l + 1) << " gains:";
        for (const auto& K : branches[l].K) out << " [" << K << "]";
        out << "\n";
      }
      out << "optimal cost " << cost.value << " (branch " << cost.branch + 1 << ")";
      emit(args, out.str());
    }
    return kExitOk;
  } catch (const mjls::ValidationError& e) {
    std::cerr << "invalid problem: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const mjls::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  }
}

int cmd_infinite(const CommonArgs& args) {
  try {
    const mjls::Problem problem = mjls::load_problem(args.problem_path);
    mjls::CareOptions care;
    if (args.tol > 0.0) care.care_tol = args.tol;
    const mjls::StabilizingSolution solution = mjls::stabilizing_solution(
        problem.model, problem.polytope, care, jsr_options(args));
    const mjls::Vector x0 = initial_state(args, problem);
    const mjls::ModeInfo mode = initial_mode(args, problem);
    if (!solution.certified) {
      std::cerr << "solver failure: a retained branch is not certified stabilizing\n";
      return kExitSolver;
    }
    if (args.json) {
      emit(args, mjls::infinite_report_json(solution, x0, mode));
    } else {
      std::ostringstream out;
      out << std::fixed << std::setprecision(4);
      for (std::size_t l = 0; l < solution.branches.size(); ++l) {
        const auto& b = solution.branches[l];
        out << "branch " << (l + 1) << " (vertex P_" << b.vertex + 1 << ", "
            << b.iterations << " iterations, residual " << std::scientific
            << b.residual << std::fixed << ")\n";
        for (std::size_t i = 0; i < b.K.size(); ++i)
          out << "  K_" << (i + 1) << " = [" << b.K[i] << "]\n";
        out << "  JSR upper bound " << std::setprecision(5) << b.certificate.upper
            << std::setprecision(4) << "\n";
      }
      const mjls::InfiniteCost cost = mjls::infinite_cost(solution, x0, mode);
      out << "optimal cost " << cost.value << " (branch " << cost.branch + 1 << ")";
      emit(args, out.str());
    }
    return kExitOk;
  } catch (const mjls::ValidationError& e) {
    std::cerr << "invalid problem: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const mjls::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  }
}

int cmd_simulate(const CommonArgs& args, const std::string& controller_kind,
                 const std::string& adversary_kind) {
  try {
    const mjls::Problem problem = mjls::load_problem(args.problem_path);
    const mjls::Vector x0 = initial_state(args, problem);
    const mjls::ModeInfo mode = initial_mode(args, problem);

    mjls::AdversaryPolicy adversary = mjls::AdversaryPolicy::greedy();
    if (adversary_kind == "random") {
      adversary = mjls::AdversaryPolicy::random();
    } else if (adversary_kind.rfind("vertex:", 0) == 0) {
      adversary = mjls::AdversaryPolicy::fixed(std::stoi(adversary_kind.substr(7)) - 1);
    } else if (adversary_kind != "greedy") {
      std::cerr << "unknown adversary '" << adversary_kind << "'\n";
      return kExitParse;
    }

    mjls::FiniteHorizonSolution finite;
    mjls::StabilizingSolution steady;
    mjls::ControllerRef controller;
    if (controller_kind == "finite") {
      const mjls::TerminalWeights terminal =
          problem.terminal ? *problem.terminal
                           : mjls::TerminalWeights::zero(problem.model.mode_count(),
                                                         problem.model.dims.nx);
      finite = mjls::solve_finite_horizon(problem.model, problem.polytope, terminal,
                                          args.horizon, solve_options(args));
      controller = mjls::ControllerRef::finite_horizon(finite);
    } else if (controller_kind == "infinite") {
      steady = mjls::stabilizing_solution(problem.model, problem.polytope, {},
                                          jsr_options(args));
      controller = mjls::ControllerRef::steady_state(steady);
    } else {
      std::cerr << "unknown controller '" << controller_kind << "'\n";
      return kExitParse;
    }

    if (args.runs <= 1) {
      int theta0 = mode.theta;
      std::uint64_t rng = args.seed;
      if (!mode.mode_known()) {
        double cum = 0.0;
        const double draw = mjls::detail::uniform01(rng);
        theta0 = problem.model.mode_count() - 1;
        for (int j = 0; j < problem.model.mode_count(); ++j) {
          cum += mode.p(j);
          if (draw < cum) {
            theta0 = j;
            break;
          }
        }
      }
      const mjls::ClosedLoopTrajectory traj = mjls::simulate(
          problem.model, problem.polytope, controller, adversary, x0, theta0,
          args.horizon, rng);
      if (!args.out_path.empty()) {
        std::ofstream out(args.out_path);
        mjls::write_trajectory_csv(traj, out);
      } else {
        mjls::write_trajectory_csv(traj, std::cout);
      }
      std::cerr << "realized cost " << traj.total_cost << "\n";
    } else {
      const mjls::MonteCarloCost cost =
          mjls::monte_carlo_cost(problem.model, problem.polytope, controller, adversary,
                                 x0, mode, args.horizon, args.runs, args.seed);
      emit(args, mjls::monte_carlo_report_json(cost, args.seed));
    }
    return kExitOk;
  } catch (const mjls::ValidationError& e) {
    std::cerr << "invalid problem: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const mjls::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  }
}

int cmd_reproduce(const CommonArgs& args) {
  const double gain_tol = args.tol > 0.0 ? args.tol : 5e-4;
  mjls::ReferenceCheckOptions options;
  options.gain_tol = gain_tol;
  options.jsr_depth = args.jsr_depth;
  options.jsr_gap = args.jsr_gap;
  const std::vector<mjls::ReferenceCell> cells = mjls::check_reference_example(options);

  bool all_pass = true;
  if (args.json) {
    std::ostringstream out;
    out << "[";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& c = cells[i];
      out << (i ? ",\n " : "\n ") << "{\"cell\": \"" << c.name << "\", \"computed\": "
          << std::setprecision(17) << c.computed << ", \"expected\": " << c.expected
          << ", \"tolerance\": " << c.tolerance << ", \"pass\": "
          << (c.pass ? "true" : "false")
          << ", \"informational\": " << (c.informational ? "true" : "false") << "}";
      if (!c.informational) all_pass = all_pass && c.pass;
    }
    out << "\n]";
    emit(args, out.str());
  } else {
    std::ostringstream out;
    out << std::left;
    for (const auto& c : cells) {
      const char* tag = c.informational ? (c.pass ? "[info] " : "[info*] ")
                                        : (c.pass ? "[pass] " : "[FAIL] ");
      out << tag << std::setw(44) << c.name << " computed " << std::setprecision(6)
          << c.computed << "  expected " << c.expected << "  (tol " << c.tolerance << ")\n";
      if (!c.note.empty()) out << "        note: " << c.note << "\n";
      if (!c.informational) all_pass = all_pass && c.pass;
    }
    out << (all_pass ? "all cells pass" : "some cells FAILED");
    emit(args, out.str());
  }
  return all_pass ? kExitOk : kExitSolver;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust optimal control of Markov jump linear systems with "
               "polytopic time-inhomogeneous transition probabilities"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string controller_kind = "infinite";
  std::string adversary_kind = "greedy";

  CLI::App* validate = app.add_subcommand("validate", "check problem invariants");
  add_common_flags(validate, args);
  CLI::App* stability = app.add_subcommand("stability", "mean square stability verdict");
  add_common_flags(stability, args);
  CLI::App* finite = app.add_subcommand("finite", "finite-horizon robust control");
  add_common_flags(finite, args);
  CLI::App* infinite = app.add_subcommand("infinite", "infinite-horizon robust control");
  add_common_flags(infinite, args);
  CLI::App* simulate = app.add_subcommand("simulate", "closed-loop simulation");
  add_common_flags(simulate, args);
  simulate->add_option("--controller", controller_kind, "finite | infinite");
  simulate->add_option("--adversary", adversary_kind, "greedy | random | vertex:<v>");
  CLI::App* reproduce =
      app.add_subcommand("reproduce-example", "reproduce the bundled benchmark tables");
  add_common_flags(reproduce, args, /*with_problem=*/false);

  CLI11_PARSE(app, argc, argv);

  if (validate->parsed()) return cmd_validate(args);
  if (stability->parsed()) return cmd_stability(args);
  if (finite->parsed()) return cmd_finite(args);
  if (infinite->parsed()) return cmd_infinite(args);
  if (simulate->parsed()) return cmd_simulate(args, controller_kind, adversary_kind);
  if (reproduce->parsed()) return cmd_reproduce(args);
  return kExitParse;
}
