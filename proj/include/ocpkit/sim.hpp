#pragma once

#include "ocpkit/models.hpp"
#include "ocpkit/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace ocpkit {

/// Piecewise-constant input: values[k] holds on [breakpoints[k], breakpoints[k+1]).
struct ControlSignal {
  std::vector<double> breakpoints;
  std::vector<Vec> values;

  static ControlSignal constant(double horizon, const Vec& value, int intervals = 1);
  static ControlSignal uniform(double horizon, std::vector<Vec> values);

  [[nodiscard]] int intervals() const { return static_cast<int>(values.size()); }
  [[nodiscard]] double horizon() const { return breakpoints.back(); }
  /// Value on the interval containing t (the last interval for t >= T).
  [[nodiscard]] const Vec& at(double t) const;

  /// Throws InvalidArgument unless breakpoints start at 0, increase strictly
  /// and match the number of values.
  void validate() const;
  [[nodiscard]] bool admissible(const Box& input_box, double tol = 0.0) const;
};

/// Sampled admissible pair z(t) = (x(t), u(t)).
///
/// inputs[j] is the input applied on [times[j], times[j+1]); the last entry
/// repeats the final interval's value.
struct Trajectory {
  std::string label;
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> inputs;

  [[nodiscard]] std::size_t size() const { return times.size(); }
  [[nodiscard]] double horizon() const { return times.empty() ? 0.0 : times.back(); }
  [[nodiscard]] int n_x() const { return states.empty() ? 0 : static_cast<int>(states.front().size()); }
  [[nodiscard]] int n_u() const { return inputs.empty() ? 0 : static_cast<int>(inputs.front().size()); }
  /// Checks the structural invariants; throws InvalidArgument on failure.
  void validate() const;
};

/// Raised when the state stops being finite during integration.
class IntegrationDiverged : public Error {
 public:
  IntegrationDiverged(double last_valid_time, const std::string& what)
      : Error(what), last_valid_time_(last_valid_time) {}
  [[nodiscard]] double last_valid_time() const { return last_valid_time_; }

 private:
  double last_valid_time_;
};

/// Number of equal RK4 substeps used for an interval of length `duration`
/// when the requested step is `step`.
int substeps_for(double duration, double step);

/// Classical RK4 with fixed step; each control interval is split into
/// equal substeps so every breakpoint is a sample time.
Trajectory integrate(const ControlSystem& sys, const Vec& x0, const ControlSignal& u, double step);

/// One RK4 segment under a constant input, with optional forward
/// sensitivities of every sample with respect to (x0, u).
struct Segment {
  std::vector<Vec> states;          // nsteps + 1 samples, states[0] = x0
  std::vector<Mat> sensitivities;   // each n_x x (n_x + n_u); empty unless requested
};

Segment integrate_segment(const ControlSystem& sys, const Vec& x0, const Vec& u, double duration, int nsteps,
                          bool with_sensitivities);

struct Violation {
  double time = 0.0;
  int coordinate = 0;  // index into x, or into u when is_input
  bool is_input = false;
  double excess = 0.0;
};

/// Every sample where a box constraint is exceeded by more than tol.
std::vector<Violation> admissibility_report(const Trajectory& traj, const ControlSystem& sys, double tol);

/// CSV with header "t,x1..xn,u1..um", 17 significant digits per value.
void write_trajectory_csv(const Trajectory& traj, std::ostream& os);
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory_csv(std::istream& is, const std::string& label = "");
Trajectory read_trajectory_csv(const std::string& path);

}  // namespace ocpkit
