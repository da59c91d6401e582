#include "ocpkit/ocp.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace ocpkit;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

Box unit_box() { return Box(v1(-1), v1(1)); }

ControlSystem toy_system() {
  return ControlSystem(
      "toy", 1, 1, [](const Vec& x, const Vec& u, Vec& dx) { dx[0] = -x[0] + u[0]; }, unit_box(), unit_box(),
      [](const Vec&, const Vec&, Mat& jx, Mat& ju) {
        jx.setConstant(1, 1, -1.0);
        ju.setConstant(1, 1, 1.0);
      });
}

CostFunction toy_cost() {
  return polynomial_cost("toy", parse_polynomial("(x - 1)^2 + u^2", {"x", "u"}), 1);
}

ControlSystem integrator_system() {
  return ControlSystem(
      "integrator", 1, 1, [](const Vec&, const Vec& u, Vec& dx) { dx[0] = u[0]; }, unit_box(), unit_box());
}

CostFunction energy_cost() { return polynomial_cost("energy", parse_polynomial("x^2 + u^2", {"x", "u"}), 1); }

// Grid search over constant admissible inputs: the best averaged cost.
double best_constant_candidate(const ControlSystem& sys, const CostFunction& F, const Vec& x0, double T,
                               double step) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 200; ++i) {
    const Vec u = v1(-1.0 + 0.01 * i);
    const Trajectory traj = integrate(sys, x0, ControlSignal::constant(T, u), step);
    if (!admissibility_report(traj, sys, 1e-9).empty()) continue;
    best = std::min(best, averaged_cost(traj, F));
  }
  return best;
}

}  // namespace

TEST(SteadyState, ToyHasAnalyticOptimum) {
  const auto ss = optimal_steady_state(toy_system(), toy_cost());
  EXPECT_EQ(ss.status, NlpStatus::converged);
  EXPECT_NEAR(ss.x_bar[0], 0.5, 1e-6);
  EXPECT_NEAR(ss.u_bar[0], 0.5, 1e-6);
  EXPECT_NEAR(ss.cost_value, 0.5, 1e-8);
  EXPECT_LE(ss.dynamics_residual, 1e-8);
  EXPECT_TRUE(ss.is_best_found);
  EXPECT_EQ(ss.candidates.size(), 16u);
}

TEST(SteadyState, IntegratorRestsAtOrigin) {
  const auto ss = optimal_steady_state(integrator_system(), energy_cost());
  EXPECT_NEAR(ss.x_bar[0], 0.0, 1e-6);
  EXPECT_NEAR(ss.u_bar[0], 0.0, 1e-8);
  EXPECT_NEAR(ss.cost_value, 0.0, 1e-10);
}

TEST(SteadyState, ReactorMatchesPublishedOperatingPoint) {
  const ReactorParams p;
  SteadyStateOptions opts;
  opts.multistart = 12;
  const auto ss = optimal_steady_state(reactor_system(p), reactor_cost(p), opts);
  const double xs[3] = {2.1756, 1.1049, 128.53}, us[2] = {35.0, 142.76};
  for (int i = 0; i < 3; ++i) EXPECT_LE(std::abs(ss.x_bar[i] - xs[i]), 0.01 * xs[i]) << i;
  for (int i = 0; i < 2; ++i) EXPECT_LE(std::abs(ss.u_bar[i] - us[i]), 0.01 * us[i]) << i;
  EXPECT_LE(ss.dynamics_residual, 1e-8);
  EXPECT_TRUE(ss.is_best_found);
  // Scaled residual of the returned point.
  const Vec f = reactor_system(p).dynamics(ss.x_bar, ss.u_bar);
  EXPECT_LE(f.cwiseQuotient(reactor_state_box().half_width()).norm(), 1e-3);
}

TEST(Transcribe, DecisionLayout) {
  const ReactorParams p;
  OcpSpec one(reactor_system(p), reactor_cost(p), Eigen::Vector3d(1.5, 1.2, 140), 0.5, 1);
  const auto t1 = transcribe(one);
  EXPECT_EQ(t1.problem.n, 2);
  EXPECT_EQ(t1.problem.n_eq, 0);
  OcpSpec ten = one;
  ten.N = 10;
  const auto t10 = transcribe(ten);
  EXPECT_EQ(t10.problem.n, 47);
  EXPECT_EQ(t10.problem.n_eq, 27);
}

TEST(Transcribe, ConstantSteadyInputGivesSteadyCost) {
  const auto sys = toy_system();
  OcpSpec spec(sys, toy_cost(), v1(0.5), 3.0, 6);
  spec.step = 1e-2;
  const auto tr = transcribe(spec);
  const ControlSignal u = ControlSignal::constant(3.0, v1(0.5), 6);
  const Vec v = tr.encode(u, std::vector<Vec>(6, v1(0.5)));
  EXPECT_NEAR(tr.problem.objective(v), 0.5, 1e-6);
  EXPECT_LE(tr.problem.eval_eq(v).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(tr.problem.eval_ineq(v).maxCoeff(), 0.0);
}

TEST(Transcribe, DerivativesMatchDifferences) {
  const ReactorParams p;
  OcpSpec spec(reactor_system(p), reactor_cost(p), Eigen::Vector3d(1.5, 1.2, 140), 0.2, 4);
  spec.step = 1e-2;
  const auto tr = transcribe(spec);
  const Vec v = Vec::LinSpaced(tr.problem.n, -0.6, 0.7);
  const Vec g = tr.problem.gradient(v);
  const Vec fd = fd_gradient(tr.problem.objective, v);
  EXPECT_LE((g - fd).norm(), 1e-5 * std::max(1.0, g.norm()));
  const Mat J = Mat(tr.problem.eq_jacobian(v));
  for (int c = 0; c < tr.problem.n; ++c) {
    Vec vp = v, vm = v;
    const double h = 1e-6 * (1 + std::abs(v[c]));
    vp[c] += h;
    vm[c] -= h;
    const Vec col = (tr.problem.eq(vp) - tr.problem.eq(vm)) / (2 * h);
    EXPECT_LE((J.col(c) - col).norm(), 1e-5 * std::max(1.0, col.norm())) << c;
  }
}

TEST(SolveOcp, StartingAtSteadyStateStaysThere) {
  const auto sys = toy_system();
  for (double T : {2.0, 10.0}) {
    OcpSpec spec(sys, toy_cost(), v1(0.5), T, static_cast<int>(4 * T));
    spec.step = 1e-2;
    spec.fine_step = 1e-2;
    const auto sol = solve_ocp(spec);
    EXPECT_EQ(sol.status, OcpStatus::solved);
    EXPECT_LE(sol.J_T, 0.5 + 1e-4);
    // The optimum leaves the steady state near the end; before that it stays put.
    for (std::size_t j = 0; j < sol.trajectory.size(); ++j) {
      if (sol.trajectory.times[j] <= T - 5.0) EXPECT_LE(std::abs(sol.trajectory.states[j][0] - 0.5), 1e-3);
    }
    EXPECT_LE(sol.node_deviation, 10 * spec.transcription_tolerance);
  }
}

TEST(SolveOcp, BeatsConstantCandidates) {
  const auto sys = integrator_system();
  OcpSpec spec(sys, energy_cost(), v1(1.0), 10.0, 20);
  spec.step = 1e-2;
  spec.fine_step = 1e-2;
  const auto sol = solve_ocp(spec);
  EXPECT_NE(sol.status, OcpStatus::inadmissible);
  EXPECT_LE(sol.shooting_defect, 1e-6);
  const double oracle = best_constant_candidate(sys, energy_cost(), v1(1.0), 10.0, 1e-2);
  EXPECT_LT(sol.J_T, oracle);
  EXPECT_LE(std::abs(sol.trajectory.states.back()[0]), 0.2);
}

TEST(SolveOcp, RejectsInvalidSpecs) {
  OcpSpec spec(toy_system(), toy_cost(), v1(2.0), 1.0, 2);
  EXPECT_THROW(solve_ocp(spec), InvalidArgument);
  spec.x0 = v1(0.0);
  spec.T = 0.0;
  EXPECT_THROW(solve_ocp(spec), InvalidArgument);
  spec.T = 1.0;
  spec.N = 0;
  EXPECT_THROW(transcribe(spec), InvalidArgument);
}

TEST(AvailableStorage, ZeroHorizonIsZero) {
  const auto sys = toy_system();
  const auto ss = optimal_steady_state(sys, toy_cost());
  const auto est = available_storage(sys, toy_cost(), ss, v1(0.3), {0.0});
  ASSERT_EQ(est.values.size(), 1u);
  EXPECT_EQ(est.values[0], 0.0);
  EXPECT_EQ(est.running_sup[0], 0.0);
  EXPECT_THROW(available_storage(sys, toy_cost(), ss, v1(0.3), {1.0}), InvalidArgument);
}

TEST(AvailableStorage, AtSteadyStateNonNegativeAndFinite) {
  const auto sys = toy_system();
  const auto ss = optimal_steady_state(sys, toy_cost());
  const auto est = available_storage(sys, toy_cost(), ss, ss.x_bar, {0.0, 1.0, 2.0});
  for (double v : est.running_sup) {
    EXPECT_GE(v, 0.0);
    EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(AvailableStorage, ToyIsBoundedAndMonotone) {
  const auto sys = toy_system();
  const auto F = toy_cost();
  const auto ss = optimal_steady_state(sys, F);
  const std::vector<double> grid{0.0, 1.0, 2.5, 5.0, 10.0, 15.0, 20.0};
  const auto est = available_storage(sys, F, ss, v1(0.0), grid);
  for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_GE(est.running_sup[i], est.running_sup[i - 1]);
  EXPECT_LE(est.running_sup.back() - est.running_sup[4], 1e-3);
  EXPECT_EQ(est.verdict, StorageVerdict::bounded_so_far);
  // Never below the best constant-input candidate at the same horizon.
  for (std::size_t i = 1; i < grid.size(); ++i) {
    double oracle = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 100; ++k) {
      const Trajectory traj = integrate(sys, v1(0.0), ControlSignal::constant(grid[i], v1(-1.0 + 0.02 * k)), 1e-2);
      oracle = std::max(oracle, -cumulative_integral(traj, [&](const Vec& x, const Vec& u) {
                                   return F(x, u) - ss.cost_value;
                                 }).back());
    }
    EXPECT_GE(est.values[i], oracle - 1e-9) << grid[i];
  }
}

TEST(AvailableStorage, RestrictedModeIsMonotone) {
  const auto sys = toy_system();
  const auto ss = optimal_steady_state(sys, toy_cost());
  StorageOptions opts;
  opts.restricted = true;
  const auto est = available_storage(sys, toy_cost(), ss, v1(-0.5), {0.0, 1.0, 3.0}, opts);
  for (std::size_t i = 1; i < est.running_sup.size(); ++i) EXPECT_GE(est.running_sup[i], est.running_sup[i - 1]);
  EXPECT_GE(est.running_sup.front(), 0.0);
}

TEST(Quadrature, CumulativeIntegralOfConstant) {
  Trajectory t;
  t.times = {0.0, 0.25, 1.0};
  t.states = {v1(0), v1(0), v1(0)};
  t.inputs = {v1(2), v1(2), v1(2)};
  const auto c = cumulative_integral(t, [](const Vec&, const Vec& u) { return u[0]; });
  EXPECT_DOUBLE_EQ(c[1], 0.5);
  EXPECT_DOUBLE_EQ(c[2], 2.0);
}
