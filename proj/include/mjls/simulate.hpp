#pragma once

#include "mjls/finite_horizon.hpp"
#include "mjls/infinite_horizon.hpp"

#include <cstdint>
#include <vector>

namespace mjls {

/// Transition-probability process the simulation plays against.
struct AdversaryPolicy {
  enum class Kind { fixed_vertex, greedy_worst_case, random_mixture };
  Kind kind = Kind::greedy_worst_case;
  int vertex = 0;  // for fixed_vertex, 0-based

  static AdversaryPolicy fixed(int vertex) {
    return {Kind::fixed_vertex, vertex};
  }
  static AdversaryPolicy greedy() { return {Kind::greedy_worst_case, 0}; }
  static AdversaryPolicy random() { return {Kind::random_mixture, 0}; }
};

/// Controller under simulation: a finite-horizon solution or a certified
/// steady-state solution. `forced_branch` pins the branch instead of the
/// online argmax selection.
struct ControllerRef {
  const FiniteHorizonSolution* finite = nullptr;
  const StabilizingSolution* steady = nullptr;
  int forced_branch = -1;

  static ControllerRef finite_horizon(const FiniteHorizonSolution& s) {
    return {&s, nullptr, -1};
  }
  static ControllerRef steady_state(const StabilizingSolution& s) {
    return {nullptr, &s, -1};
  }
};

struct ClosedLoopTrajectory {
  std::vector<Vector> x;        // length T+1
  std::vector<int> theta;       // length T+1, 0-based
  std::vector<Vector> u;        // length T
  std::vector<Vector> z;        // length T
  std::vector<int> vertex;      // length T; -1 when a mixture was played
  std::vector<Vector> lambda;   // length T; empty unless random_mixture
  std::vector<double> stage_cost;  // ||z_k||^2
  double terminal_cost = 0.0;
  double total_cost = 0.0;
};

/// Simulates the closed loop for T steps. Deterministic in (seed, inputs).
ClosedLoopTrajectory simulate(const MjlsModel& model, const TpmPolytope& polytope,
                              const ControllerRef& controller,
                              const AdversaryPolicy& adversary, const Vector& x0,
                              int theta0, int horizon, std::uint64_t seed);

struct MonteCarloCost {
  double mean = 0.0;
  double stderr_mean = 0.0;
  int n_runs = 0;
};

/// Sample mean and standard error of the realized cost over independently
/// seeded runs (per-run seeds derived by counter splitting).
MonteCarloCost monte_carlo_cost(const MjlsModel& model, const TpmPolytope& polytope,
                                const ControllerRef& controller,
                                const AdversaryPolicy& adversary, const Vector& x0,
                                const ModeInfo& mode, int horizon, int n_runs,
                                std::uint64_t seed);

struct DecayEstimate {
  double rate = 0.0;  // fitted per-step factor of the mean squared state norm
  bool below_floor = false;
};

/// Least-squares decay rate of log mean ||x_k||^2 over k in [burn_in, T].
DecayEstimate empirical_decay(const std::vector<ClosedLoopTrajectory>& trajectories,
                              int burn_in);

namespace detail {
/// SplitMix64 step; used to derive independent per-run seeds from a counter.
std::uint64_t splitmix64(std::uint64_t& state);
/// Uniform draw in [0,1) from 53 random bits.
double uniform01(std::uint64_t& state);
}  // namespace detail

}  // namespace mjls
