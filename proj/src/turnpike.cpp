#include "ocpkit/turnpike.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace ocpkit {

std::string to_string(ThetaKind k) { return k == ThetaKind::state ? "state" : "input_state"; }

ThetaKind theta_kind_from_string(const std::string& s) {
  if (s == "state") return ThetaKind::state;
  if (s == "input_state") return ThetaKind::input_state;
  throw InvalidArgument("unknown turnpike kind '" + s + "' (expected state or input_state)");
}

namespace {

void check_query(const Trajectory& traj, const ThetaQuery& q) {
  if (traj.size() < 2) throw InvalidArgument("trajectory needs at least two samples");
  const Eigen::Index n = q.kind == ThetaKind::state ? traj.n_x() : traj.n_x() + traj.n_u();
  require_size(q.reference.size(), n, "turnpike reference");
  if (q.scale.size() != 0) {
    require_size(q.scale.size(), n, "turnpike scale");
    if ((q.scale.array() <= 0).any()) throw InvalidArgument("turnpike scale must be positive");
  }
  if (!(q.epsilon >= 0)) throw InvalidArgument("epsilon must be non-negative");
}

double max_step(const Trajectory& traj) {
  double h = 0.0;
  for (std::size_t j = 1; j < traj.size(); ++j) h = std::max(h, traj.times[j] - traj.times[j - 1]);
  return h;
}

// Least-squares slope of y against x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

}  // namespace

double theta_distance(const Trajectory& traj, std::size_t j, const ThetaQuery& q) {
  double s = 0.0;
  const Vec& x = traj.states[j];
  const int nx = static_cast<int>(x.size());
  const Eigen::Index n = q.reference.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = i < nx ? x[i] : traj.inputs[j][i - nx];
    const double d = (v - q.reference[i]) / (q.scale.size() ? q.scale[i] : 1.0);
    s += d * d;
  }
  return std::sqrt(s);
}

MeasureEstimate theta_measure(const Trajectory& traj, const ThetaQuery& q) {
  check_query(traj, q);
  MeasureEstimate out;
  int crossings = 0;
  bool prev = false;
  for (std::size_t j = 0; j + 1 < traj.size(); ++j) {
    const bool outside = theta_distance(traj, j, q) > q.epsilon;
    if (outside) out.measure += traj.times[j + 1] - traj.times[j];
    if (j > 0 && outside != prev) ++crossings;
    prev = outside;
  }
  out.error_bar = crossings * max_step(traj);
  return out;
}

MeasureEstimate exactness_measure(const Trajectory& traj, ThetaQuery q, double delta0) {
  if (!(delta0 >= 0)) throw InvalidArgument("delta0 must be non-negative");
  q.epsilon = delta0;
  return theta_measure(traj, q);
}

bool exact_turnpike_flag(const std::vector<double>& horizons, const std::vector<double>& measures,
                         double min_slope) {
  if (horizons.size() != measures.size()) throw DimensionMismatch("horizons and measures differ in length");
  if (horizons.size() < 2) return false;
  std::vector<double> at_turnpike;
  for (std::size_t i = 0; i < horizons.size(); ++i) at_turnpike.push_back(horizons[i] - measures[i]);
  return ls_slope(horizons, at_turnpike) >= min_slope;
}

ArcDecomposition arc_decomposition(const Trajectory& traj, const ThetaQuery& q) {
  check_query(traj, q);
  ArcDecomposition out;
  out.horizon = traj.horizon();
  for (std::size_t j = 0; j < traj.size(); ++j) {
    if (theta_distance(traj, j, q) > q.epsilon) continue;
    if (!out.enters) {
      out.enters = true;
      out.entry = traj.times[j];
    }
    out.exit = traj.times[j];
  }
  return out;
}

TurnpikeReport nu_envelope(const std::vector<SweepRun>& sweep, const Vec& reference, const TurnpikeOptions& opts) {
  if (sweep.empty()) throw InvalidArgument("empty sweep");
  if (opts.epsilon_grid.empty()) throw InvalidArgument("empty epsilon grid");
  for (double e : opts.epsilon_grid) {
    if (!(e > 0)) throw InvalidArgument("epsilon grid entries must be positive");
  }
  TurnpikeReport rep;
  rep.kind = opts.kind;
  rep.epsilon_grid = opts.epsilon_grid;
  rep.delta0 = opts.delta0;
  const std::size_t ne = opts.epsilon_grid.size();
  rep.nu_envelope.assign(ne, 0.0);
  rep.max_relative_spread.assign(ne, 0.0);
  rep.max_slope.assign(ne, 0.0);

  ThetaQuery q{opts.kind, reference, 0.0, opts.scale};
  double grid = 0.0;
  for (std::size_t r = 0; r < sweep.size(); ++r) {
    const auto& run = sweep[r];
    grid = std::max(grid, max_step(run.trajectory));
    for (double e : opts.epsilon_grid) {
      q.epsilon = e;
      TurnpikeCell cell;
      cell.run = static_cast<int>(r);
      cell.x0_index = run.x0_index;
      cell.T = run.T;
      cell.epsilon = e;
      cell.theta = theta_measure(run.trajectory, q);
      cell.arcs = arc_decomposition(run.trajectory, q);
      rep.cells.push_back(cell);
    }
    rep.exactness.push_back(exactness_measure(run.trajectory, q, opts.delta0));
  }
  for (std::size_t i = 0; i < rep.cells.size(); ++i) {
    const std::size_t k = i % ne;
    rep.nu_envelope[k] = std::max(rep.nu_envelope[k], rep.cells[i].theta.measure);
  }

  std::map<int, std::vector<std::size_t>> by_x0;
  for (std::size_t r = 0; r < sweep.size(); ++r) by_x0[sweep[r].x0_index].push_back(r);
  double t_range = 0.0;
  for (const auto& [idx, runs] : by_x0) {
    double lo = sweep[runs.front()].T, hi = lo;
    for (auto r : runs) {
      lo = std::min(lo, sweep[r].T);
      hi = std::max(hi, sweep[r].T);
    }
    t_range = std::max(t_range, hi - lo);
  }
  rep.slope_tolerance = std::max(opts.slope_floor, t_range > 0 ? 2 * grid / t_range : 0.0);

  std::vector<double> horizons_all, exact_all;
  for (std::size_t r = 0; r < sweep.size(); ++r) {
    horizons_all.push_back(sweep[r].T);
    exact_all.push_back(rep.exactness[r].measure);
  }
  for (std::size_t k = 0; k < ne; ++k) {
    for (const auto& [idx, runs] : by_x0) {
      if (runs.size() < 2) continue;
      std::vector<double> T, mu;
      for (auto r : runs) {
        T.push_back(sweep[r].T);
        mu.push_back(rep.cells[r * ne + k].theta.measure);
      }
      const auto [lo, hi] = std::minmax_element(mu.begin(), mu.end());
      double mean = 0.0;
      for (double m : mu) mean += m / static_cast<double>(mu.size());
      if (mean > 0) rep.max_relative_spread[k] = std::max(rep.max_relative_spread[k], (*hi - *lo) / mean);
      rep.max_slope[k] = std::max(rep.max_slope[k], ls_slope(T, mu));
    }
    if (rep.max_slope[k] > rep.slope_tolerance) rep.turnpike_consistent = false;
  }
  rep.exact_turnpike = exact_turnpike_flag(horizons_all, exact_all);
  return rep;
}

ReachabilityResult reachability_probe(const ControlSystem& sys, const SteadyStatePair& z_bar, const Vec& x0,
                                      double T_max, const ReachabilityOptions& opts) {
  if (!(T_max > 0)) throw InvalidArgument("reachability horizon must be positive");
  const int nx = sys.n_x(), nu = sys.n_u();
  require_size(x0.size(), nx, "initial state");
  const Vec zb = z_bar.z();
  Vec w(nx + nu);
  if (opts.scale.size() != 0) {
    require_size(opts.scale.size(), nx + nu, "reachability scale");
    w = opts.scale;
  } else {
    w.setOnes();
  }

  CostFunction track;
  track.label = "tracking";
  track.stage_cost = [=](const Vec& x, const Vec& u) {
    Vec z(nx + nu);
    z << x, u;
    return (z - zb).cwiseQuotient(w).squaredNorm();
  };
  track.gradient = [=](const Vec& x, const Vec& u, Vec& gx, Vec& gu) {
    Vec z(nx + nu);
    z << x, u;
    const Vec g = 2 * (z - zb).cwiseQuotient(w.cwiseProduct(w));
    gx = g.head(nx);
    gu = g.tail(nu);
  };

  OcpSpec spec(sys, track, x0, T_max, opts.intervals);
  spec.objective_mode = ObjectiveMode::integral;
  spec.step = opts.step;
  spec.fine_step = opts.step;
  spec.initial_input = z_bar.u_bar;
  spec.nlp = opts.nlp;
  const OcpSolution sol = solve_ocp(spec);

  ReachabilityResult out;
  out.trajectory = sol.trajectory;
  out.status = sol.status;
  const ThetaQuery q{ThetaKind::input_state, zb, 0.0, w};
  for (std::size_t j = 0; j < sol.trajectory.size(); ++j) out.distance.push_back(theta_distance(sol.trajectory, j, q));

  // Fit window: from t = 0 until the trace first reaches the floor.
  const double floor = std::max(opts.floor, 1e-3 * out.distance.front());
  std::vector<double> t, logd;
  for (std::size_t j = 0; j < out.distance.size(); ++j) {
    if (out.distance[j] <= floor) break;
    t.push_back(sol.trajectory.times[j]);
    logd.push_back(std::log(out.distance[j]));
  }
  if (t.size() < 2) {
    out.trivial = true;
    out.c = *std::max_element(out.distance.begin(), out.distance.end());
    out.c_dominating = out.c;
    out.lambda = std::numeric_limits<double>::infinity();
    out.dominates = true;
    return out;
  }
  const double slope = ls_slope(t, logd);
  double mt = 0, ml = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    mt += t[i] / static_cast<double>(t.size());
    ml += logd[i] / static_cast<double>(t.size());
  }
  out.lambda = -slope;
  out.c = std::exp(ml - slope * mt);
  for (std::size_t i = 0; i < t.size(); ++i) out.c_dominating = std::max(out.c_dominating, std::exp(logd[i] + out.lambda * t[i]));
  out.dominates = out.c >= out.c_dominating;
  return out;
}

double nu_bound(double sup_abs_storage, double c, double lambda, double lipschitz, double alpha_eps) {
  if (!(alpha_eps > 0)) throw InvalidArgument("alpha(epsilon) must be positive");
  if (!(lambda > 0)) throw InvalidArgument("decay rate must be positive");
  const double kf = std::isinf(lambda) ? 0.0 : c * lipschitz / lambda;
  return (2 * sup_abs_storage + kf) / alpha_eps;
}

}  // namespace ocpkit
