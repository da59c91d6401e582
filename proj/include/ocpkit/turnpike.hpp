#pragma once

#include "ocpkit/ocp.hpp"

#include <limits>
#include <string>
#include <vector>

namespace ocpkit {

/// Which part of z = (x, u) is compared against the turnpike.
enum class ThetaKind { state, input_state };

std::string to_string(ThetaKind k);
ThetaKind theta_kind_from_string(const std::string& s);

/// Ball of radius epsilon around `reference` in the Euclidean norm of
/// (xi - reference) ./ scale. An empty scale means unit weights.
struct ThetaQuery {
  ThetaKind kind = ThetaKind::state;
  Vec reference;
  double epsilon = 0.0;
  Vec scale;
};

/// Query distance of sample j.
double theta_distance(const Trajectory& traj, std::size_t j, const ThetaQuery& q);

struct MeasureEstimate {
  double measure = 0.0;    // time units
  double error_bar = 0.0;  // one grid step per boundary crossing
};

/// Lebesgue measure of {t : dist(t) > epsilon}, left-endpoint rule on the sample grid.
MeasureEstimate theta_measure(const Trajectory& traj, const ThetaQuery& q);

/// theta_measure with epsilon = delta0, the numerical stand-in for epsilon = 0.
MeasureEstimate exactness_measure(const Trajectory& traj, ThetaQuery q, double delta0);

/// True when T - measure grows linearly in T across a sweep (least-squares
/// slope of T - measure against T of at least `min_slope`).
bool exact_turnpike_flag(const std::vector<double>& horizons, const std::vector<double>& measures,
                         double min_slope = 0.5);

struct ArcDecomposition {
  bool enters = false;  // false: no turnpike at this epsilon
  double entry = 0.0;   // first sample inside the ball
  double exit = 0.0;    // last sample inside the ball
  double horizon = 0.0;
  /// Approach [0, entry), middle [entry, exit], leaving (exit, T].
  [[nodiscard]] double approach_length() const { return enters ? entry : horizon; }
  [[nodiscard]] double middle_length() const { return enters ? exit - entry : 0.0; }
  [[nodiscard]] double leaving_length() const { return enters ? horizon - exit : 0.0; }
};

ArcDecomposition arc_decomposition(const Trajectory& traj, const ThetaQuery& q);

/// One solved OCP in a sweep.
struct SweepRun {
  Trajectory trajectory;
  double T = 0.0;
  int x0_index = 0;
};

struct TurnpikeOptions {
  ThetaKind kind = ThetaKind::state;
  std::vector<double> epsilon_grid;
  double delta0 = 1e-6;
  Vec scale;
  /// A slope of mu against T above max(slope_floor, 2 * grid step / T range)
  /// counts as growth with the horizon.
  double slope_floor = 0.02;
};

struct TurnpikeCell {
  int run = 0;
  int x0_index = 0;
  double T = 0.0;
  double epsilon = 0.0;
  MeasureEstimate theta;
  ArcDecomposition arcs;
};

struct TurnpikeReport {
  ThetaKind kind = ThetaKind::state;
  std::vector<double> epsilon_grid;
  double delta0 = 0.0;
  std::vector<TurnpikeCell> cells;          // run-major, epsilon-minor
  std::vector<double> nu_envelope;          // per epsilon, max over runs
  std::vector<double> max_relative_spread;  // per epsilon, (max - min) / mean over T, worst x0
  std::vector<double> max_slope;            // per epsilon, worst least-squares slope of mu vs T
  double slope_tolerance = 0.0;
  bool turnpike_consistent = true;
  std::vector<MeasureEstimate> exactness;  // per run at delta0
  bool exact_turnpike = false;
};

/// Envelope nu(eps) = max over the sweep of mu[Theta(eps)] and the growth flags.
TurnpikeReport nu_envelope(const std::vector<SweepRun>& sweep, const Vec& reference, const TurnpikeOptions& opts);

struct ReachabilityOptions {
  int intervals = 40;
  double step = 1e-2;
  /// The fit window ends where the trace first drops below
  /// max(floor, 1e-3 * initial distance).
  double floor = 1e-8;
  Vec scale;            // weights on (x, u); empty means unit
  NlpOptions nlp;
};

struct ReachabilityResult {
  Trajectory trajectory;
  OcpStatus status = OcpStatus::not_converged;
  std::vector<double> distance;  // |z(t) - z_bar| per sample
  double c = 0.0;                // least-squares fit of log distance
  double lambda = 0.0;
  double c_dominating = 0.0;  // smallest c dominating the trace on the fit window
  bool dominates = false;     // fitted envelope already dominates
  bool trivial = false;       // the trace never left the floor
};

/// Tracking OCP towards z_bar from x0 and an exponential envelope fit.
/// A positive lambda is evidence, not proof, of exponential reachability.
ReachabilityResult reachability_probe(const ControlSystem& sys, const SteadyStatePair& z_bar, const Vec& x0,
                                      double T_max, const ReachabilityOptions& opts = {});

/// Horizon-independent bound (K_S + K_F) / alpha(eps) with K_S = 2 sup|S|
/// and K_F = c L_F / lambda.
double nu_bound(double sup_abs_storage, double c, double lambda, double lipschitz, double alpha_eps);

}  // namespace ocpkit
