#include "mjls/simulate.hpp"

#include "mjls/detail/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

namespace mjls {

namespace detail {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double uniform01(std::uint64_t& state) {
  return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

}  // namespace detail

namespace {

// Picks the controller's branch set "one step ahead" for the greedy adversary.
struct NextStepValue {
  const MjlsModel* model;
  const ControllerRef* controller;
  int horizon;

  double operator()(const Vector& x_next, const Vector& row, int k) const {
    const int n_modes = model->mode_count();
    if (controller->steady != nullptr) {
      double best = -std::numeric_limits<double>::infinity();
      for (const CareBranch& b : controller->steady->branches) {
        double v = 0.0;
        for (int j = 0; j < n_modes; ++j)
          if (row(j) != 0.0) v += row(j) * x_next.dot(b.X[static_cast<std::size_t>(j)] * x_next);
        best = std::max(best, v);
      }
      return best;
    }
    const FiniteHorizonSolution& fh = *controller->finite;
    if (k + 1 < horizon) {
      double best = -std::numeric_limits<double>::infinity();
      for (const RiccatiBranch& b : fh.at_step(k + 1).branches) {
        double v = 0.0;
        for (int j = 0; j < n_modes; ++j)
          if (row(j) != 0.0) v += row(j) * x_next.dot(b.X[static_cast<std::size_t>(j)] * x_next);
        best = std::max(best, v);
      }
      return best;
    }
    double v = 0.0;
    for (int j = 0; j < n_modes; ++j)
      if (row(j) != 0.0)
        v += row(j) * x_next.dot(fh.terminal.Z[static_cast<std::size_t>(j)] * x_next);
    return v;
  }
};

Vector control_input(const ControllerRef& controller, const Vector& x, int theta, int k) {
  if (controller.steady != nullptr) {
    const StabilizingSolution& s = *controller.steady;
    if (controller.forced_branch >= 0) {
      const CareBranch& b = s.branches.at(static_cast<std::size_t>(controller.forced_branch));
      return b.K[static_cast<std::size_t>(theta)] * x;
    }
    return steady_policy(s, x, theta);
  }
  const FiniteHorizonSolution& fh = *controller.finite;
  const ParsimoniousSet& set = fh.at_step(k);
  if (controller.forced_branch >= 0) {
    const RiccatiBranch& b = set.branches.at(static_cast<std::size_t>(controller.forced_branch));
    return b.K[static_cast<std::size_t>(theta)] * x;
  }
  return optimal_input(set, x, theta);
}

int sample_mode(const Vector& row, double draw) {
  double cum = 0.0;
  const int n = static_cast<int>(row.size());
  for (int j = 0; j < n; ++j) {
    cum += std::max(0.0, row(j));
    if (draw < cum) return j;
  }
  return n - 1;
}

}  // namespace

ClosedLoopTrajectory simulate(const MjlsModel& model, const TpmPolytope& polytope,
                              const ControllerRef& controller,
                              const AdversaryPolicy& adversary, const Vector& x0,
                              int theta0, int horizon, std::uint64_t seed) {
  if (controller.finite == nullptr && controller.steady == nullptr)
    throw std::invalid_argument("simulate: controller is empty");
  if (controller.finite != nullptr && controller.finite->horizon < horizon)
    throw std::invalid_argument("simulate: controller does not cover the horizon");
  if (controller.steady != nullptr && !controller.steady->certified)
    throw std::invalid_argument("simulate: steady-state controller is not certified");
  if (theta0 < 0 || theta0 >= model.mode_count())
    throw std::invalid_argument("simulate: initial mode out of range");
  if (adversary.kind == AdversaryPolicy::Kind::fixed_vertex &&
      (adversary.vertex < 0 || adversary.vertex >= polytope.vertex_count()))
    throw std::invalid_argument("simulate: fixed vertex index out of range");

  const int n_vertices = polytope.vertex_count();
  NextStepValue next_value{&model, &controller, horizon};

  ClosedLoopTrajectory traj;
  traj.x.reserve(static_cast<std::size_t>(horizon) + 1);
  traj.theta.reserve(static_cast<std::size_t>(horizon) + 1);
  std::uint64_t rng = seed;

  Vector x = x0;
  int theta = theta0;
  traj.x.push_back(x);
  traj.theta.push_back(theta);
  double cumulative = 0.0;

  for (int k = 0; k < horizon; ++k) {
    const auto& mode = model.modes[static_cast<std::size_t>(theta)];
    const Vector u = control_input(controller, x, theta, k);
    const Vector z = mode.C * x + mode.D * u;
    const Vector x_next = mode.A * x + mode.B * u;

    Vector row;
    int used_vertex = -1;
    Vector used_lambda;
    switch (adversary.kind) {
      case AdversaryPolicy::Kind::fixed_vertex: {
        used_vertex = adversary.vertex;
        row = polytope.vertices[static_cast<std::size_t>(used_vertex)].row(theta);
        break;
      }
      case AdversaryPolicy::Kind::greedy_worst_case: {
        double best = -std::numeric_limits<double>::infinity();
        for (int v = 0; v < n_vertices; ++v) {
          const Vector candidate_row =
              polytope.vertices[static_cast<std::size_t>(v)].row(theta);
          const double value = next_value(x_next, candidate_row, k);
          if (value > best) {
            best = value;
            used_vertex = v;
          }
        }
        row = polytope.vertices[static_cast<std::size_t>(used_vertex)].row(theta);
        break;
      }
      case AdversaryPolicy::Kind::random_mixture: {
        used_lambda = Vector(n_vertices);
        double total = 0.0;
        for (int v = 0; v < n_vertices; ++v) {
          const double e = -std::log1p(-detail::uniform01(rng));
          used_lambda(v) = e;
          total += e;
        }
        used_lambda /= total;
        row = Vector::Zero(model.mode_count());
        for (int v = 0; v < n_vertices; ++v)
          row += used_lambda(v) *
                 Vector(polytope.vertices[static_cast<std::size_t>(v)].row(theta));
        break;
      }
    }

    const int theta_next = sample_mode(row, detail::uniform01(rng));

    const double stage = z.squaredNorm();
    cumulative += stage;
    traj.u.push_back(u);
    traj.z.push_back(z);
    traj.vertex.push_back(used_vertex);
    traj.lambda.push_back(used_lambda);
    traj.stage_cost.push_back(stage);
    traj.x.push_back(x_next);
    traj.theta.push_back(theta_next);

    x = x_next;
    theta = theta_next;
  }

  if (controller.finite != nullptr) {
    const Matrix& Z = controller.finite->terminal.Z[static_cast<std::size_t>(theta)];
    traj.terminal_cost = x.dot(Z * x);
  }
  traj.total_cost = cumulative + traj.terminal_cost;
  return traj;
}

MonteCarloCost monte_carlo_cost(const MjlsModel& model, const TpmPolytope& polytope,
                                const ControllerRef& controller,
                                const AdversaryPolicy& adversary, const Vector& x0,
                                const ModeInfo& mode, int horizon, int n_runs,
                                std::uint64_t seed) {
  if (n_runs < 1) throw std::invalid_argument("monte_carlo_cost: n_runs must be >= 1");
  std::vector<double> costs(static_cast<std::size_t>(n_runs));
  detail::parallel_for(n_runs, [&](int run) {
    std::uint64_t s = seed + static_cast<std::uint64_t>(run);
    const std::uint64_t run_seed = detail::splitmix64(s);
    int theta0 = mode.theta;
    std::uint64_t rng = run_seed;
    if (!mode.mode_known()) theta0 = sample_mode(mode.p, detail::uniform01(rng));
    costs[static_cast<std::size_t>(run)] =
        simulate(model, polytope, controller, adversary, x0, theta0, horizon, rng)
            .total_cost;
  });
  MonteCarloCost out;
  out.n_runs = n_runs;
  double mean = 0.0;
  for (double c : costs) mean += c;
  mean /= n_runs;
  out.mean = mean;
  if (n_runs > 1) {
    double ss = 0.0;
    for (double c : costs) ss += (c - mean) * (c - mean);
    out.stderr_mean = std::sqrt(ss / (n_runs - 1)) / std::sqrt(static_cast<double>(n_runs));
  }
  return out;
}

DecayEstimate empirical_decay(const std::vector<ClosedLoopTrajectory>& trajectories,
                              int burn_in) {
  if (trajectories.size() < 100)
    throw std::invalid_argument("empirical_decay: at least 100 trajectories required");
  const int horizon = static_cast<int>(trajectories.front().x.size()) - 1;
  if (horizon <= burn_in + 10)
    throw std::invalid_argument("empirical_decay: horizon too short for the burn-in");

  DecayEstimate est;
  std::vector<double> logs;
  std::vector<double> ks;
  for (int k = burn_in; k <= horizon; ++k) {
    double mean = 0.0;
    for (const ClosedLoopTrajectory& t : trajectories)
      mean += t.x[static_cast<std::size_t>(k)].squaredNorm();
    mean /= static_cast<double>(trajectories.size());
    if (mean < 1e-280) {
      est.below_floor = true;
      break;
    }
    logs.push_back(std::log(mean));
    ks.push_back(static_cast<double>(k));
  }
  if (logs.size() < 2) {
    est.below_floor = true;
    return est;
  }
  const double n = static_cast<double>(logs.size());
  double sk = 0.0, sl = 0.0, skk = 0.0, skl = 0.0;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    sk += ks[i];
    sl += logs[i];
    skk += ks[i] * ks[i];
    skl += ks[i] * logs[i];
  }
  const double slope = (n * skl - sk * sl) / (n * skk - sk * sk);
  est.rate = std::exp(slope);
  return est;
}

}  // namespace mjls
