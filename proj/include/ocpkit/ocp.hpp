#pragma once

#include "ocpkit/models.hpp"
#include "ocpkit/nlp.hpp"
#include "ocpkit/sim.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ocpkit {

/// One local solution of the steady-state problem.
struct SteadyCandidate {
  Vec x;
  Vec u;
  double cost = 0.0;
  double residual = 0.0;
  NlpStatus status = NlpStatus::max_iter;
};

/// z_bar = (x_bar, u_bar) with f(z_bar) = 0.
struct SteadyStatePair {
  Vec x_bar;
  Vec u_bar;
  double cost_value = 0.0;
  double dynamics_residual = 0.0;  // Euclidean norm of f(z_bar)
  bool is_best_found = false;
  NlpStatus status = NlpStatus::max_iter;
  std::vector<SteadyCandidate> candidates;  // in multistart order

  [[nodiscard]] Vec z() const;
};

struct SteadyStateOptions {
  int multistart = 16;
  unsigned long long seed = 0;
  int jobs = 1;
  double residual_tolerance = 1e-8;
  NlpOptions nlp;
};

/// min F(z) s.t. f(z) = 0, z in X x U. The NLP runs in [-1, 1] scaled
/// coordinates; the winner is polished by Newton on x with u fixed.
SteadyStatePair optimal_steady_state(const ControlSystem& sys, const CostFunction& cost,
                                     const SteadyStateOptions& opts = {});

enum class ObjectiveMode { averaged, integral };

std::string to_string(ObjectiveMode m);

struct OcpSpec {
  OcpSpec(ControlSystem sys, CostFunction F, Vec initial_state, double horizon, int intervals)
      : system(std::move(sys)), cost(std::move(F)), x0(std::move(initial_state)), T(horizon), N(intervals) {}

  ControlSystem system;
  CostFunction cost;
  Vec x0;
  double T = 1.0;
  int N = 10;
  ObjectiveMode objective_mode = ObjectiveMode::averaged;
  double step = 1e-3;       // RK4 step inside the transcription
  double fine_step = 1e-3;  // re-integration of the optimal signal
  double transcription_tolerance = 1e-6;
  double constraint_tolerance = 1e-4;  // scaled admissibility tolerance of the result
  std::optional<Vec> initial_input;    // cold-start constant input, box midpoint if absent
  NlpOptions nlp;

  void validate() const;
};

/// Multiple-shooting NLP. Decision vector, all entries scaled to [-1, 1]:
/// [u_0 .. u_{N-1}, s_1 .. s_{N-1}].
struct Transcription {
  NlpProblem problem;
  int N = 0;
  int n_x = 0;
  int n_u = 0;
  double T = 0.0;
  int substeps = 1;  // RK4 steps per control interval
  Box state_box;
  Box input_box;
  Vec x0;

  [[nodiscard]] ControlSignal decode_signal(const Vec& v) const;
  /// Shooting-node states s_0 = x0, s_1 .. s_{N-1}.
  [[nodiscard]] std::vector<Vec> decode_nodes(const Vec& v) const;
  [[nodiscard]] Vec encode(const ControlSignal& u, const std::vector<Vec>& nodes) const;
};

Transcription transcribe(const OcpSpec& spec);

enum class OcpStatus { solved, not_converged, inadmissible };

std::string to_string(OcpStatus s);

struct OcpSolution {
  Trajectory trajectory;  // fine re-integration of `signal`
  ControlSignal signal;
  std::vector<Vec> nodes;
  double J_T = 0.0;        // averaged cost of the re-integrated trajectory
  double objective = 0.0;  // NLP objective in the requested mode
  NlpSolution nlp;
  double shooting_defect = 0.0;  // max scaled matching residual at the NLP point
  double node_deviation = 0.0;   // max scaled gap between re-integration and nodes
  std::vector<Violation> violations;
  OcpStatus status = OcpStatus::not_converged;
};

/// Transcribes and solves. A warm-start signal on any grid is resampled at
/// the interval midpoints; nodes are simulated from it.
OcpSolution solve_ocp(const OcpSpec& spec, const ControlSignal* warm_start = nullptr);

/// Cumulative trapezoid integral of g(x, u) along the samples; inputs[j]
/// is used on both ends of [t_j, t_{j+1}].
std::vector<double> cumulative_integral(const Trajectory& traj,
                                        const std::function<double(const Vec&, const Vec&)>& g);

/// (1/T) * integral of F along the trajectory.
double averaged_cost(const Trajectory& traj, const CostFunction& cost);

enum class StorageVerdict { bounded_so_far, diverging };

std::string to_string(StorageVerdict v);

struct StorageOptions {
  /// Strictness alpha(x, u); the supply becomes w - alpha when set.
  std::function<double(const Vec&, const Vec&)> alpha;
  /// Candidate set = solve_ocp solutions of F and their truncations.
  bool restricted = false;
  double intervals_per_unit = 4.0;
  int max_intervals = 60;
  double step = 1e-2;
  double growth_tolerance = 1e-3;
  NlpOptions nlp;
};

struct StorageEstimate {
  Vec x0;
  std::vector<double> probed_horizons;
  std::vector<double> values;
  std::vector<double> running_sup;
  StorageVerdict verdict = StorageVerdict::bounded_so_far;
  std::vector<std::string> errors;  // per-horizon solver failures
};

/// Grid over the free end time of sup_T sup_u -integral (w [- alpha]).
/// The verdict is a heuristic: "diverging" when the running supremum grows
/// by more than the tolerance over the last grid interval without slowing
/// down relative to the previous one.
StorageEstimate available_storage(const ControlSystem& sys, const CostFunction& cost, const SteadyStatePair& z_bar,
                                  const Vec& x0, const std::vector<double>& T_grid, const StorageOptions& opts = {});

}  // namespace ocpkit
