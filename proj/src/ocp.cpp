#include "ocpkit/ocp.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>

namespace ocpkit {

namespace {

Vec safe_half(const Box& b) { return b.scale(); }

SparseMat to_sparse(const Mat& m) { return m.sparseView(); }

double scaled_excess(const Violation& v, const ControlSystem& sys) {
  const Vec h = safe_half(v.is_input ? sys.input_box() : sys.state_box());
  return v.excess / h[v.coordinate];
}

}  // namespace

Vec SteadyStatePair::z() const {
  Vec out(x_bar.size() + u_bar.size());
  out << x_bar, u_bar;
  return out;
}

SteadyStatePair optimal_steady_state(const ControlSystem& sys, const CostFunction& cost,
                                     const SteadyStateOptions& opts) {
  const int nx = sys.n_x(), nu = sys.n_u(), n = nx + nu;
  const Vec mx = sys.state_box().mid(), mu = sys.input_box().mid();
  const Vec hx = safe_half(sys.state_box()), hu = safe_half(sys.input_box());
  Vec hz(n);
  hz << hx, hu;
  auto split = [&](const Vec& v, Vec& x, Vec& u) {
    x = mx + hx.cwiseProduct(v.head(nx));
    u = mu + hu.cwiseProduct(v.tail(nu));
  };

  NlpProblem p;
  p.n = n;
  p.lower = Vec::Constant(n, -1.0);
  p.upper = Vec::Constant(n, 1.0);
  p.objective = [&](const Vec& v) {
    Vec x, u;
    split(v, x, u);
    return cost(x, u);
  };
  p.gradient = [&](const Vec& v) {
    Vec x, u, gx, gu;
    split(v, x, u);
    cost.grad(x, u, gx, gu);
    Vec g(n);
    g << gx, gu;
    return Vec(g.cwiseProduct(hz));
  };
  p.n_eq = nx;
  p.eq = [&](const Vec& v) {
    Vec x, u;
    split(v, x, u);
    return Vec(sys.dynamics(x, u).cwiseQuotient(hx));
  };
  p.eq_jacobian = [&](const Vec& v) {
    Vec x, u;
    split(v, x, u);
    Mat jx, ju;
    sys.jacobian(x, u, jx, ju);
    Mat J(nx, n);
    J << jx, ju;
    J = hx.cwiseInverse().asDiagonal() * J * hz.asDiagonal();
    return to_sparse(J);
  };

  const MultistartResult ms = multistart(p, opts.multistart, opts.seed, opts.nlp, opts.jobs);

  SteadyStatePair out;
  for (const auto& s : ms.solutions) {
    SteadyCandidate c;
    split(s.point, c.x, c.u);
    c.cost = cost(c.x, c.u);
    c.residual = sys.dynamics(c.x, c.u).norm();
    c.status = s.status;
    out.candidates.push_back(std::move(c));
  }

  Vec x, u;
  split(ms.best.point, x, u);
  // Newton on f(., u) = 0 removes the residual left by the NLP tolerance.
  double res = sys.dynamics(x, u).norm();
  for (int it = 0; it < 30 && res > 1e-3 * opts.residual_tolerance; ++it) {
    Mat jx, ju;
    sys.jacobian(x, u, jx, ju);
    const Vec dx = jx.fullPivLu().solve(-sys.dynamics(x, u));
    const Vec trial = x + dx;
    if (!trial.allFinite() || !sys.state_box().contains(trial, 1e-12)) break;
    const double r = sys.dynamics(trial, u).norm();
    if (!(r < res)) break;
    x = trial;
    res = r;
  }
  out.x_bar = x;
  out.u_bar = u;
  out.cost_value = cost(x, u);
  out.dynamics_residual = res;
  out.status = ms.best.status;
  if (out.status == NlpStatus::converged && res > opts.residual_tolerance) out.status = NlpStatus::max_iter;
  out.is_best_found = out.status == NlpStatus::converged;
  return out;
}

std::string to_string(ObjectiveMode m) { return m == ObjectiveMode::averaged ? "averaged" : "integral"; }

std::string to_string(OcpStatus s) {
  switch (s) {
    case OcpStatus::solved:
      return "solved";
    case OcpStatus::not_converged:
      return "not_converged";
    case OcpStatus::inadmissible:
      return "inadmissible";
  }
  return "unknown";
}

std::string to_string(StorageVerdict v) {
  return v == StorageVerdict::bounded_so_far ? "bounded-so-far" : "diverging";
}

void OcpSpec::validate() const {
  if (!(T > 0) || !std::isfinite(T)) throw InvalidArgument(fmt::format("OCP horizon must be positive, got {}", T));
  if (N < 1) throw InvalidArgument(fmt::format("OCP needs N >= 1 intervals, got {}", N));
  if (!(step > 0) || !(fine_step > 0)) throw InvalidArgument("OCP integration steps must be positive");
  require_size(x0.size(), system.n_x(), "OCP initial state");
  if (!system.state_box().contains(x0, 1e-12)) throw InvalidArgument("OCP initial state lies outside the state box");
  if (initial_input) require_size(initial_input->size(), system.n_u(), "OCP initial input");
  if (!cost.stage_cost) throw InvalidArgument("OCP cost has no evaluator");
}

namespace {

// Everything derived from one decision vector, shared by the NLP callbacks.
struct Evaluation {
  Vec v;
  bool diverged = false;
  double objective = 0.0;
  Vec gradient;
  Vec eq;
  SparseMat eq_jac;
  Vec ineq;
  SparseMat ineq_jac;
};

struct ShootingContext {
  ControlSystem sys;
  CostFunction cost;
  Vec x0;
  int N, nx, nu, nsub;
  double T, h;
  bool averaged;
  Vec mx, hx, mu, hu;

  std::mutex mutex;
  std::shared_ptr<const Evaluation> last;

  explicit ShootingContext(const OcpSpec& s)
      : sys(s.system), cost(s.cost), x0(s.x0), N(s.N), nx(s.system.n_x()), nu(s.system.n_u()), T(s.T),
        h(s.T / s.N), averaged(s.objective_mode == ObjectiveMode::averaged) {
    nsub = substeps_for(h, s.step);
    mx = sys.state_box().mid();
    hx = safe_half(sys.state_box());
    mu = sys.input_box().mid();
    hu = safe_half(sys.input_box());
  }

  [[nodiscard]] int u_col(int k) const { return k * nu; }
  [[nodiscard]] int s_col(int k) const { return N * nu + (k - 1) * nx; }
  [[nodiscard]] int n_dec() const { return N * nu + (N - 1) * nx; }
  [[nodiscard]] int n_ineq() const { return N * nsub * nx * 2; }

  std::shared_ptr<const Evaluation> evaluate(const Vec& v) {
    {
      std::lock_guard<std::mutex> lock(mutex);
      if (last && last->v.size() == v.size() && last->v == v) return last;
    }
    auto e = std::make_shared<Evaluation>(compute(v));
    std::lock_guard<std::mutex> lock(mutex);
    last = e;
    return e;
  }

  Evaluation compute(const Vec& v) const {
    Evaluation e;
    e.v = v;
    const int n = n_dec();
    e.gradient = Vec::Zero(n);
    e.eq = Vec::Zero((N - 1) * nx);
    e.ineq = Vec::Zero(n_ineq());
    std::vector<Eigen::Triplet<double>> eq_t, in_t;
    const double hseg = h / nsub;
    const double scale = averaged ? 1.0 / T : 1.0;
    Vec gx, gu;
    try {
      for (int k = 0; k < N; ++k) {
        const Vec u = mu + hu.cwiseProduct(v.segment(u_col(k), nu));
        const Vec start = k == 0 ? x0 : Vec(mx + hx.cwiseProduct(v.segment(s_col(k), nx)));
        const Segment seg = integrate_segment(sys, start, u, h, nsub, true);
        for (int j = 0; j <= nsub; ++j) {
          const Vec& x = seg.states[j];
          const Mat& D = seg.sensitivities[j];
          const double w = scale * hseg * ((j == 0 || j == nsub) ? 0.5 : 1.0);
          e.objective += w * cost(x, u);
          cost.grad(x, u, gx, gu);
          const Vec dx = D.transpose() * gx;  // d/d(start, u)
          e.gradient.segment(u_col(k), nu) += w * (dx.tail(nu) + gu).cwiseProduct(hu);
          if (k > 0) e.gradient.segment(s_col(k), nx) += w * dx.head(nx).cwiseProduct(hx);
          if (j == 0) continue;
          const int base = ((k * nsub + (j - 1)) * nx) * 2;
          for (int i = 0; i < nx; ++i) {
            const int r = base + 2 * i;
            e.ineq[r] = (x[i] - sys.state_box().upper[i]) / hx[i];
            e.ineq[r + 1] = (sys.state_box().lower[i] - x[i]) / hx[i];
            for (int c = 0; c < nu; ++c) {
              const double d = D(i, nx + c) * hu[c] / hx[i];
              in_t.emplace_back(r, u_col(k) + c, d);
              in_t.emplace_back(r + 1, u_col(k) + c, -d);
            }
            if (k > 0) {
              for (int c = 0; c < nx; ++c) {
                const double d = D(i, c) * hx[c] / hx[i];
                in_t.emplace_back(r, s_col(k) + c, d);
                in_t.emplace_back(r + 1, s_col(k) + c, -d);
              }
            }
          }
        }
        if (k + 1 < N) {
          const Vec& xe = seg.states.back();
          const Mat& D = seg.sensitivities.back();
          const Vec next = mx + hx.cwiseProduct(v.segment(s_col(k + 1), nx));
          for (int i = 0; i < nx; ++i) {
            const int r = k * nx + i;
            e.eq[r] = (xe[i] - next[i]) / hx[i];
            for (int c = 0; c < nu; ++c) eq_t.emplace_back(r, u_col(k) + c, D(i, nx + c) * hu[c] / hx[i]);
            if (k > 0) {
              for (int c = 0; c < nx; ++c) eq_t.emplace_back(r, s_col(k) + c, D(i, c) * hx[c] / hx[i]);
            }
            eq_t.emplace_back(r, s_col(k + 1) + i, -1.0);
          }
        }
      }
    } catch (const IntegrationDiverged&) {
      e.diverged = true;
      e.objective = std::numeric_limits<double>::infinity();
      e.gradient.setZero();
      e.eq.setConstant(1e10);
      e.ineq.setConstant(1e10);
      eq_t.clear();
      in_t.clear();
    }
    e.eq_jac.resize((N - 1) * nx, n);
    e.eq_jac.setFromTriplets(eq_t.begin(), eq_t.end());
    e.ineq_jac.resize(n_ineq(), n);
    e.ineq_jac.setFromTriplets(in_t.begin(), in_t.end());
    return e;
  }
};

}  // namespace

ControlSignal Transcription::decode_signal(const Vec& v) const {
  std::vector<Vec> values;
  const Vec mu = input_box.mid(), hu = safe_half(input_box);
  for (int k = 0; k < N; ++k) values.push_back(mu + hu.cwiseProduct(v.segment(k * n_u, n_u)));
  return ControlSignal::uniform(T, std::move(values));
}

std::vector<Vec> Transcription::decode_nodes(const Vec& v) const {
  std::vector<Vec> nodes{x0};
  const Vec mx = state_box.mid(), hx = safe_half(state_box);
  for (int k = 1; k < N; ++k) nodes.push_back(mx + hx.cwiseProduct(v.segment(N * n_u + (k - 1) * n_x, n_x)));
  return nodes;
}

Vec Transcription::encode(const ControlSignal& u, const std::vector<Vec>& nodes) const {
  if (u.intervals() != N) throw DimensionMismatch("signal interval count does not match the transcription");
  if (static_cast<int>(nodes.size()) != N) throw DimensionMismatch("node count does not match the transcription");
  Vec v(problem.n);
  for (int k = 0; k < N; ++k) v.segment(k * n_u, n_u) = input_box.to_unit(u.values[k]);
  for (int k = 1; k < N; ++k) v.segment(N * n_u + (k - 1) * n_x, n_x) = state_box.to_unit(nodes[k]);
  return v.cwiseMax(-1.0).cwiseMin(1.0);
}

Transcription transcribe(const OcpSpec& spec) {
  spec.validate();
  auto ctx = std::make_shared<ShootingContext>(spec);
  Transcription t;
  t.N = spec.N;
  t.n_x = ctx->nx;
  t.n_u = ctx->nu;
  t.T = spec.T;
  t.substeps = ctx->nsub;
  t.state_box = spec.system.state_box();
  t.input_box = spec.system.input_box();
  t.x0 = spec.x0;

  NlpProblem& p = t.problem;
  p.n = ctx->n_dec();
  p.lower = Vec::Constant(p.n, -1.0);
  p.upper = Vec::Constant(p.n, 1.0);
  p.objective = [ctx](const Vec& v) { return ctx->evaluate(v)->objective; };
  p.gradient = [ctx](const Vec& v) { return ctx->evaluate(v)->gradient; };
  p.n_eq = (ctx->N - 1) * ctx->nx;
  if (p.n_eq > 0) {
    p.eq = [ctx](const Vec& v) { return ctx->evaluate(v)->eq; };
    p.eq_jacobian = [ctx](const Vec& v) { return ctx->evaluate(v)->eq_jac; };
  }
  p.n_ineq = ctx->n_ineq();
  p.ineq = [ctx](const Vec& v) { return ctx->evaluate(v)->ineq; };
  p.ineq_jacobian = [ctx](const Vec& v) { return ctx->evaluate(v)->ineq_jac; };
  return t;
}

std::vector<double> cumulative_integral(const Trajectory& traj,
                                        const std::function<double(const Vec&, const Vec&)>& g) {
  traj.validate();
  std::vector<double> out(traj.size(), 0.0);
  double prev = traj.size() > 0 ? g(traj.states[0], traj.inputs[0]) : 0.0;
  for (std::size_t j = 0; j + 1 < traj.size(); ++j) {
    const double a = j == 0 ? prev : g(traj.states[j], traj.inputs[j]);
    const double b = g(traj.states[j + 1], traj.inputs[j]);
    out[j + 1] = out[j] + 0.5 * (traj.times[j + 1] - traj.times[j]) * (a + b);
  }
  return out;
}

double averaged_cost(const Trajectory& traj, const CostFunction& cost) {
  if (traj.size() < 2 || !(traj.horizon() > 0)) throw InvalidArgument("averaged cost needs a positive horizon");
  return cumulative_integral(traj, [&](const Vec& x, const Vec& u) { return cost(x, u); }).back() / traj.horizon();
}

namespace {

ControlSignal resample(const ControlSignal& warm, double T, int N) {
  std::vector<Vec> values;
  for (int k = 0; k < N; ++k) values.push_back(warm.at((k + 0.5) * T / N));
  return ControlSignal::uniform(T, std::move(values));
}

std::vector<Vec> simulate_nodes(const OcpSpec& spec, const ControlSignal& u) {
  std::vector<Vec> nodes{spec.x0};
  const double h = spec.T / spec.N;
  const int nsub = substeps_for(h, spec.step);
  Vec x = spec.x0;
  for (int k = 0; k + 1 < spec.N; ++k) {
    try {
      x = integrate_segment(spec.system, x, u.values[k], h, nsub, false).states.back();
    } catch (const IntegrationDiverged&) {
      x = spec.system.state_box().mid();
    }
    x = spec.system.state_box().project(x);
    nodes.push_back(x);
  }
  return nodes;
}

}  // namespace

OcpSolution solve_ocp(const OcpSpec& spec, const ControlSignal* warm_start) {
  const Transcription tr = transcribe(spec);
  ControlSignal init;
  if (warm_start != nullptr) {
    warm_start->validate();
    if (!warm_start->values.empty()) require_size(warm_start->values.front().size(), tr.n_u, "warm-start input");
    init = resample(*warm_start, spec.T, spec.N);
  } else {
    init = ControlSignal::constant(spec.T, spec.initial_input.value_or(spec.system.input_box().mid()), spec.N);
  }
  for (auto& val : init.values) val = spec.system.input_box().project(val);
  const Vec start = tr.encode(init, simulate_nodes(spec, init));

  NlpOptions nopts = spec.nlp;
  nopts.tolerance = spec.transcription_tolerance;
  OcpSolution out;
  out.nlp = solve_nlp(tr.problem, start, nopts);
  out.objective = out.nlp.objective;
  out.signal = tr.decode_signal(out.nlp.point);
  out.nodes = tr.decode_nodes(out.nlp.point);
  const Vec eq = tr.problem.eval_eq(out.nlp.point);
  out.shooting_defect = eq.size() > 0 ? eq.cwiseAbs().maxCoeff() : 0.0;

  out.trajectory = integrate(spec.system, spec.x0, out.signal, spec.fine_step);
  out.trajectory.label = spec.system.label();
  out.J_T = averaged_cost(out.trajectory, spec.cost);

  const Vec hx = safe_half(spec.system.state_box());
  for (int k = 0; k < spec.N; ++k) {
    const double tk = out.signal.breakpoints[k];
    const auto it = std::lower_bound(out.trajectory.times.begin(), out.trajectory.times.end(), tk);
    const auto j = static_cast<std::size_t>(it - out.trajectory.times.begin());
    out.node_deviation = std::max(
        out.node_deviation, (out.trajectory.states[j] - out.nodes[k]).cwiseQuotient(hx).cwiseAbs().maxCoeff());
  }

  for (const auto& v : admissibility_report(out.trajectory, spec.system, 0.0)) {
    if (scaled_excess(v, spec.system) > spec.constraint_tolerance) out.violations.push_back(v);
  }
  if (!out.violations.empty()) {
    out.status = OcpStatus::inadmissible;
  } else {
    out.status = out.nlp.status == NlpStatus::converged ? OcpStatus::solved : OcpStatus::not_converged;
  }
  return out;
}

namespace {

bool admissible(const Trajectory& traj, const ControlSystem& sys, double tol) {
  for (const auto& v : admissibility_report(traj, sys, 0.0)) {
    if (scaled_excess(v, sys) > tol) return false;
  }
  return true;
}

}  // namespace

StorageEstimate available_storage(const ControlSystem& sys, const CostFunction& cost, const SteadyStatePair& z_bar,
                                  const Vec& x0, const std::vector<double>& T_grid, const StorageOptions& opts) {
  if (T_grid.empty() || T_grid.front() != 0.0) throw InvalidArgument("storage horizon grid must start at 0");
  for (std::size_t i = 1; i < T_grid.size(); ++i) {
    if (!(T_grid[i] > T_grid[i - 1]) || !std::isfinite(T_grid[i])) {
      throw InvalidArgument("storage horizon grid must be finite and strictly increasing");
    }
  }
  require_size(x0.size(), sys.n_x(), "storage initial state");
  const double Fbar = cost(z_bar.x_bar, z_bar.u_bar);
  const auto supply = [&](const Vec& x, const Vec& u) {
    return cost(x, u) - Fbar - (opts.alpha ? opts.alpha(x, u) : 0.0);
  };
  CostFunction supply_cost{"supply", supply, {}, std::nullopt};
  if (!opts.alpha && cost.gradient) supply_cost.gradient = cost.gradient;
  const double adm_tol = 1e-4;

  auto extracted = [&](const Trajectory& traj) { return -cumulative_integral(traj, supply).back(); };
  auto intervals_for = [&](double T) {
    const int n = static_cast<int>(std::ceil(T * opts.intervals_per_unit - 1e-9));
    return std::clamp(n, 1, opts.max_intervals);
  };

  StorageEstimate est;
  est.x0 = x0;
  est.probed_horizons = T_grid;

  if (opts.restricted) {
    std::vector<Trajectory> pool;
    for (double T : T_grid) {
      if (T == 0.0) continue;
      OcpSpec spec{sys, cost, x0, T, intervals_for(T)};
      spec.step = opts.step;
      spec.fine_step = opts.step;
      spec.initial_input = z_bar.u_bar;
      spec.nlp = opts.nlp;
      try {
        const OcpSolution s = solve_ocp(spec);
        if (s.status != OcpStatus::inadmissible) pool.push_back(s.trajectory);
      } catch (const Error& e) {
        est.errors.push_back(fmt::format("T = {}: {}", T, e.what()));
      }
    }
    for (double T : T_grid) {
      double best = T == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
      for (const auto& traj : pool) {
        if (traj.horizon() < T - 1e-12) continue;
        const auto cum = cumulative_integral(traj, supply);
        auto it = std::upper_bound(traj.times.begin(), traj.times.end(), T + 1e-12);
        const auto j = static_cast<std::size_t>(it - traj.times.begin()) - 1;
        best = std::max(best, -cum[j]);
      }
      est.values.push_back(best);
    }
  } else {
    std::optional<ControlSignal> previous;
    for (double T : T_grid) {
      if (T == 0.0) {
        est.values.push_back(0.0);
        continue;
      }
      double best = -std::numeric_limits<double>::infinity();
      std::optional<ControlSignal> best_signal;
      auto offer = [&](const ControlSignal& u, const Trajectory& traj) {
        if (!admissible(traj, sys, adm_tol)) return;
        const double val = extracted(traj);
        if (val > best) {
          best = val;
          best_signal = u;
        }
      };
      auto consider = [&](const ControlSignal& u) {
        try {
          offer(u, integrate(sys, x0, u, opts.step));
        } catch (const IntegrationDiverged&) {
        }
      };
      // Trivial candidates: constant inputs at the steady input and at the U vertices.
      consider(ControlSignal::constant(T, z_bar.u_bar));
      for (const Vec& vert : sys.input_box().vertices()) consider(ControlSignal::constant(T, vert));
      // The previous horizon's best signal extended by the steady input.
      ControlSignal warm;
      if (previous) {
        warm = *previous;
        warm.breakpoints.push_back(T);
        warm.values.push_back(z_bar.u_bar);
        consider(warm);
      }
      OcpSpec spec{sys, supply_cost, x0, T, intervals_for(T)};
      spec.objective_mode = ObjectiveMode::integral;
      spec.step = opts.step;
      spec.fine_step = opts.step;
      spec.initial_input = z_bar.u_bar;
      spec.nlp = opts.nlp;
      try {
        const OcpSolution s = solve_ocp(spec, previous ? &warm : nullptr);
        offer(s.signal, s.trajectory);
        if (s.status == OcpStatus::not_converged) {
          est.errors.push_back(fmt::format("T = {}: NLP {}", T, to_string(s.nlp.status)));
        }
      } catch (const Error& e) {
        est.errors.push_back(fmt::format("T = {}: {}", T, e.what()));
      }
      previous = best_signal;
      est.values.push_back(best);
    }
  }

  double sup = 0.0;
  for (double v : est.values) {
    sup = std::max(sup, v);
    est.running_sup.push_back(sup);
  }
  const auto& rs = est.running_sup;
  const auto& Tg = est.probed_horizons;
  const std::size_t n = rs.size();
  if (n >= 3) {
    const double d2 = rs[n - 1] - rs[n - 2], d1 = rs[n - 2] - rs[n - 3];
    const double s2 = d2 / (Tg[n - 1] - Tg[n - 2]), s1 = d1 / (Tg[n - 2] - Tg[n - 3]);
    if (d2 > opts.growth_tolerance && s2 >= s1) est.verdict = StorageVerdict::diverging;
  }
  return est;
}

}  // namespace ocpkit
