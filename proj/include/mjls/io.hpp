#pragma once

#include "mjls/finite_horizon.hpp"
#include "mjls/infinite_horizon.hpp"
#include "mjls/model.hpp"
#include "mjls/simulate.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace mjls {

struct Problem {
  MjlsModel model;
  TpmPolytope polytope;
  std::optional<TerminalWeights> terminal;
  std::optional<InitialCondition> initial;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string msg, ValidationReport report)
      : std::runtime_error(std::move(msg)), report(std::move(report)) {}
  ValidationReport report;
};

/// Parses a problem file; checks schema and dimensional consistency only.
/// Throws ParseError naming the offending field.
Problem parse_problem(const std::string& path);
Problem parse_problem_text(const std::string& text);

/// parse_problem plus full invariant validation; throws ValidationError
/// listing every violated invariant.
Problem load_problem(const std::string& path);

/// Serializes a problem losslessly (numbers round-trip bit-exactly).
std::string serialize_problem(const Problem& problem);
void save_problem(const Problem& problem, const std::string& path);

// Report rendering. Machine output keeps full precision; human output
// rounds gains to 4 decimals.
std::string validation_report_json(const ValidationReport& report);
std::string stability_report_json(const MssResult& result);
std::string finite_report_json(const FiniteHorizonSolution& solution,
                               const Vector& x0, const ModeInfo& mode);
std::string infinite_report_json(const StabilizingSolution& solution,
                                 const Vector& x0, const ModeInfo& mode);
std::string monte_carlo_report_json(const MonteCarloCost& cost, std::uint64_t seed);

void write_trajectory_csv(const ClosedLoopTrajectory& trajectory, std::ostream& out);

}  // namespace mjls
