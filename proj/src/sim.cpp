#include "ocpkit/sim.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace ocpkit {

ControlSignal ControlSignal::constant(double horizon, const Vec& value, int intervals) {
  return uniform(horizon, std::vector<Vec>(static_cast<std::size_t>(intervals), value));
}

ControlSignal ControlSignal::uniform(double horizon, std::vector<Vec> values) {
  if (!(horizon > 0)) throw InvalidArgument(fmt::format("horizon must be positive, got {}", horizon));
  if (values.empty()) throw InvalidArgument("control signal needs at least one interval");
  ControlSignal s;
  const auto n = values.size();
  s.breakpoints.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) s.breakpoints[k] = horizon * static_cast<double>(k) / static_cast<double>(n);
  s.breakpoints[n] = horizon;
  s.values = std::move(values);
  return s;
}

const Vec& ControlSignal::at(double t) const {
  // Last k with breakpoints[k] <= t.
  std::size_t lo = 0, hi = values.size();
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (breakpoints[mid] <= t) lo = mid;
    else hi = mid;
  }
  return values[lo];
}

void ControlSignal::validate() const {
  if (values.empty()) throw InvalidArgument("control signal needs at least one interval");
  if (breakpoints.size() != values.size() + 1) {
    throw InvalidArgument(fmt::format("control signal has {} breakpoints for {} values", breakpoints.size(),
                                      values.size()));
  }
  if (breakpoints.front() != 0.0) throw InvalidArgument("control signal must start at t = 0");
  for (std::size_t k = 0; k + 1 < breakpoints.size(); ++k) {
    if (!(breakpoints[k + 1] > breakpoints[k])) {
      throw InvalidArgument(fmt::format("breakpoints not strictly increasing at index {}", k + 1));
    }
  }
}

bool ControlSignal::admissible(const Box& input_box, double tol) const {
  for (const auto& v : values) {
    if (!input_box.contains(v, tol)) return false;
  }
  return true;
}

void Trajectory::validate() const {
  if (times.empty()) throw InvalidArgument("empty trajectory");
  if (states.size() != times.size() || inputs.size() != times.size()) {
    throw InvalidArgument(fmt::format("trajectory arrays have lengths {}, {}, {}", times.size(), states.size(),
                                      inputs.size()));
  }
  if (times.front() != 0.0) throw InvalidArgument("trajectory must start at t = 0");
  for (std::size_t j = 0; j + 1 < times.size(); ++j) {
    if (times[j + 1] < times[j]) throw InvalidArgument("trajectory times decrease");
  }
}

int substeps_for(double duration, double step) {
  if (!(step > 0)) throw InvalidArgument(fmt::format("integration step must be positive, got {}", step));
  return std::max(1, static_cast<int>(std::ceil(duration / step - 1e-9)));
}

namespace {

struct Rk4Work {
  Vec k1, k2, k3, k4, tmp;
  explicit Rk4Work(int n) : k1(n), k2(n), k3(n), k4(n), tmp(n) {}
};

void rk4_step(const ControlSystem& sys, const Vec& x, const Vec& u, double h, Rk4Work& w, Vec& out) {
  sys.dynamics(x, u, w.k1);
  w.tmp = x + 0.5 * h * w.k1;
  sys.dynamics(w.tmp, u, w.k2);
  w.tmp = x + 0.5 * h * w.k2;
  sys.dynamics(w.tmp, u, w.k3);
  w.tmp = x + h * w.k3;
  sys.dynamics(w.tmp, u, w.k4);
  out = x + (h / 6.0) * (w.k1 + 2.0 * w.k2 + 2.0 * w.k3 + w.k4);
}

bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace

Trajectory integrate(const ControlSystem& sys, const Vec& x0, const ControlSignal& u, double step) {
  u.validate();
  require_size(x0.size(), sys.n_x(), "initial state");
  if (!all_finite(x0)) throw InvalidArgument("initial state is not finite");
  Trajectory traj;
  traj.label = sys.label();
  Rk4Work work(sys.n_x());
  Vec x = x0, next(sys.n_x());
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  traj.inputs.push_back(u.values.front());
  for (int k = 0; k < u.intervals(); ++k) {
    const double t0 = u.breakpoints[k], t1 = u.breakpoints[k + 1];
    const int n = substeps_for(t1 - t0, step);
    const double h = (t1 - t0) / n;
    const Vec& uk = u.values[k];
    traj.inputs.back() = uk;
    for (int j = 1; j <= n; ++j) {
      rk4_step(sys, x, uk, h, work, next);
      const double t = j == n ? t1 : t0 + j * h;
      if (!all_finite(next)) {
        throw IntegrationDiverged(traj.times.back(),
                                  fmt::format("integration diverged after t = {}", traj.times.back()));
      }
      x = next;
      traj.times.push_back(t);
      traj.states.push_back(x);
      traj.inputs.push_back(uk);
    }
  }
  return traj;
}

Segment integrate_segment(const ControlSystem& sys, const Vec& x0, const Vec& u, double duration, int nsteps,
                          bool with_sensitivities) {
  const int nx = sys.n_x(), nu = sys.n_u();
  const double h = duration / nsteps;
  Segment seg;
  seg.states.reserve(static_cast<std::size_t>(nsteps) + 1);
  seg.states.push_back(x0);
  if (!with_sensitivities) {
    Rk4Work work(nx);
    Vec x = x0, next(nx);
    for (int j = 0; j < nsteps; ++j) {
      rk4_step(sys, x, u, h, work, next);
      if (!all_finite(next)) throw IntegrationDiverged(j * h, "segment integration diverged");
      x = next;
      seg.states.push_back(x);
    }
    return seg;
  }
  // Differentiate the RK4 map itself, so sensitivities are exact for the
  // discrete scheme (given exact Jacobians of f).
  Mat D = Mat::Zero(nx, nx + nu);
  D.leftCols(nx).setIdentity();
  seg.sensitivities.reserve(static_cast<std::size_t>(nsteps) + 1);
  seg.sensitivities.push_back(D);
  Vec x = x0, k1(nx), k2(nx), k3(nx), k4(nx), xs(nx);
  Mat jx(nx, nx), ju(nx, nu), dk1(nx, nx + nu), dk2(nx, nx + nu), dk3(nx, nx + nu), dk4(nx, nx + nu),
      Ds(nx, nx + nu);
  auto stage = [&](const Vec& xstage, const Mat& Dstage, Vec& k, Mat& dk) {
    sys.dynamics(xstage, u, k);
    sys.jacobian(xstage, u, jx, ju);
    dk.noalias() = jx * Dstage;
    dk.rightCols(nu) += ju;
  };
  for (int j = 0; j < nsteps; ++j) {
    stage(x, D, k1, dk1);
    xs = x + 0.5 * h * k1;
    Ds = D + 0.5 * h * dk1;
    stage(xs, Ds, k2, dk2);
    xs = x + 0.5 * h * k2;
    Ds = D + 0.5 * h * dk2;
    stage(xs, Ds, k3, dk3);
    xs = x + h * k3;
    Ds = D + h * dk3;
    stage(xs, Ds, k4, dk4);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    D += (h / 6.0) * (dk1 + 2.0 * dk2 + 2.0 * dk3 + dk4);
    if (!all_finite(x)) throw IntegrationDiverged(j * h, "segment integration diverged");
    seg.states.push_back(x);
    seg.sensitivities.push_back(D);
  }
  return seg;
}

std::vector<Violation> admissibility_report(const Trajectory& traj, const ControlSystem& sys, double tol) {
  traj.validate();
  std::vector<Violation> out;
  const Box& X = sys.state_box();
  const Box& U = sys.input_box();
  for (std::size_t j = 0; j < traj.size(); ++j) {
    require_size(traj.states[j].size(), sys.n_x(), "trajectory state");
    require_size(traj.inputs[j].size(), sys.n_u(), "trajectory input");
    auto check = [&](const Vec& v, const Box& b, bool is_input) {
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double excess = std::max(v[i] - b.upper[i], b.lower[i] - v[i]);
        if (excess > tol) out.push_back({traj.times[j], static_cast<int>(i), is_input, excess});
      }
    };
    check(traj.states[j], X, false);
    check(traj.inputs[j], U, true);
  }
  return out;
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
  traj.validate();
  const int nx = traj.n_x(), nu = traj.n_u();
  os << "t";
  for (int i = 0; i < nx; ++i) os << ",x" << i + 1;
  for (int i = 0; i < nu; ++i) os << ",u" << i + 1;
  os << '\n';
  for (std::size_t j = 0; j < traj.size(); ++j) {
    os << format_double(traj.times[j]);
    for (int i = 0; i < nx; ++i) os << ',' << format_double(traj.states[j][i]);
    for (int i = 0; i < nu; ++i) os << ',' << format_double(traj.inputs[j][i]);
    os << '\n';
  }
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(fmt::format("cannot write {}", path));
  write_trajectory_csv(traj, os);
}

Trajectory read_trajectory_csv(std::istream& is, const std::string& label) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("trajectory CSV is empty");
  int nx = 0, nu = 0;
  {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    if (cell != "t") throw InvalidArgument("trajectory CSV header must start with 't'");
    while (std::getline(ss, cell, ',')) {
      if (!cell.empty() && cell[0] == 'x') ++nx;
      else if (!cell.empty() && cell[0] == 'u') ++nu;
      else throw InvalidArgument(fmt::format("unexpected CSV column '{}'", cell));
    }
  }
  Trajectory traj;
  traj.label = label;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::strtod(cell.c_str(), nullptr));
    if (static_cast<int>(vals.size()) != 1 + nx + nu) {
      throw InvalidArgument(fmt::format("CSV row {} has {} columns, expected {}", row, vals.size(), 1 + nx + nu));
    }
    traj.times.push_back(vals[0]);
    traj.states.push_back(Eigen::Map<const Vec>(vals.data() + 1, nx));
    traj.inputs.push_back(Eigen::Map<const Vec>(vals.data() + 1 + nx, nu));
  }
  traj.validate();
  return traj;
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(fmt::format("cannot read {}", path));
  return read_trajectory_csv(is, path);
}

}  // namespace ocpkit
