#include "ocpkit/sim.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace ocpkit;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

ControlSystem linear_scalar(double a, double b) {
  return ControlSystem(
      "lin", 1, 1, [a, b](const Vec& x, const Vec& u, Vec& dx) { dx[0] = a * x[0] + b * u[0]; },
      Box(v1(-10), v1(10)), Box(v1(-10), v1(10)));
}

double endpoint_error(double step) {
  const auto sys = linear_scalar(-1.0, 0.0);
  const auto traj = integrate(sys, v1(1.0), ControlSignal::constant(1.0, v1(0.0)), step);
  return std::abs(traj.states.back()[0] - std::exp(-1.0));
}

}  // namespace

TEST(Integrate, ZeroFieldKeepsState) {
  const ControlSystem zero("zero", 2, 1, [](const Vec&, const Vec&, Vec& dx) { dx.setZero(); },
                           Box(Vec::Constant(2, -1), Vec::Constant(2, 1)), Box(v1(-1), v1(1)));
  const Vec x0 = Eigen::Vector2d(0.3, -0.7);
  const auto traj = integrate(zero, x0, ControlSignal::uniform(2.0, {v1(0.5), v1(-0.5), v1(1.0)}), 0.01);
  for (const auto& x : traj.states) EXPECT_EQ(x, x0);
}

TEST(Integrate, ExponentialDecayEndpoint) { EXPECT_LT(endpoint_error(1e-3), 1e-6); }

TEST(Integrate, FourthOrderConvergence) {
  for (double h : {0.1, 0.05, 0.02}) {
    const double ratio = endpoint_error(h) / endpoint_error(h / 2);
    EXPECT_GE(ratio, 8.0) << "h = " << h;
  }
}

TEST(Integrate, TimeReversibilityOnLinearSystem) {
  const double step = 0.05;
  const auto fwd_sys = linear_scalar(-0.8, 1.0);
  const auto bwd_sys = linear_scalar(0.8, -1.0);
  const Vec x0 = v1(0.6);
  const double u = 0.3, T = 2.0;
  const auto fwd = integrate(fwd_sys, x0, ControlSignal::constant(T, v1(u)), step);
  const double exact = u / 0.8 + (x0[0] - u / 0.8) * std::exp(-0.8 * T);
  const double fwd_err = std::abs(fwd.states.back()[0] - exact);
  const auto back = integrate(bwd_sys, fwd.states.back(), ControlSignal::constant(T, v1(u)), step);
  EXPECT_LE(std::abs(back.states.back()[0] - x0[0]), 10 * fwd_err + 1e-15);
}

TEST(Integrate, BreakpointsAreSamples) {
  const auto sys = linear_scalar(-1.0, 1.0);
  ControlSignal u;
  u.breakpoints = {0.0, 0.013, 0.5, 0.5071, 1.3};
  u.values = {v1(1), v1(-1), v1(0.5), v1(0)};
  const auto traj = integrate(sys, v1(0.0), u, 0.01);
  for (double t : u.breakpoints) {
    EXPECT_NE(std::find(traj.times.begin(), traj.times.end(), t), traj.times.end()) << t;
  }
  EXPECT_EQ(traj.times.front(), 0.0);
  EXPECT_EQ(traj.times.back(), 1.3);
  // Input sample at a breakpoint is the value of the interval that starts there.
  const auto it = std::find(traj.times.begin(), traj.times.end(), 0.5);
  EXPECT_EQ(traj.inputs[static_cast<std::size_t>(it - traj.times.begin())][0], 0.5);
}

TEST(Integrate, BlowUpRaisesWithLastValidTime) {
  const ControlSystem blow("blow", 1, 1, [](const Vec& x, const Vec&, Vec& dx) { dx[0] = x[0] * x[0] * x[0]; },
                           Box(v1(-1), v1(1)), Box(v1(-1), v1(1)));
  try {
    integrate(blow, v1(10.0), ControlSignal::constant(1.0, v1(0.0)), 1e-3);
    FAIL() << "expected divergence";
  } catch (const IntegrationDiverged& e) {
    EXPECT_GE(e.last_valid_time(), 0.0);
    EXPECT_LT(e.last_valid_time(), 0.01);
  }
}

TEST(Integrate, RejectsBadSignals) {
  const auto sys = linear_scalar(-1.0, 1.0);
  ControlSignal u;
  u.breakpoints = {0.0, 0.5, 0.5};
  u.values = {v1(0), v1(0)};
  EXPECT_THROW(integrate(sys, v1(0), u, 0.1), InvalidArgument);
  EXPECT_THROW(integrate(sys, v1(0), ControlSignal::constant(1.0, v1(0)), 0.0), InvalidArgument);
  EXPECT_THROW(integrate(sys, Eigen::Vector2d(0, 0), ControlSignal::constant(1.0, v1(0)), 0.1), DimensionMismatch);
}

TEST(Segment, SensitivitiesMatchDifferences) {
  const ControlSystem sys(
      "pend", 2, 1,
      [](const Vec& x, const Vec& u, Vec& dx) {
        dx[0] = x[1];
        dx[1] = -std::sin(x[0]) - 0.2 * x[1] + u[0] * x[0];
      },
      Box(Vec::Constant(2, -5), Vec::Constant(2, 5)), Box(v1(-2), v1(2)));
  const Vec x0 = Eigen::Vector2d(0.4, -0.3), u = v1(0.7);
  const auto seg = integrate_segment(sys, x0, u, 1.0, 50, true);
  ASSERT_EQ(seg.sensitivities.size(), 51u);
  const Mat& D = seg.sensitivities.back();
  const double h = 1e-6;
  for (int k = 0; k < 3; ++k) {
    Vec xp = x0, xm = x0, up = u, um = u;
    if (k < 2) {
      xp[k] += h;
      xm[k] -= h;
    } else {
      up[0] += h;
      um[0] -= h;
    }
    const Vec fd = (integrate_segment(sys, xp, up, 1.0, 50, false).states.back() -
                    integrate_segment(sys, xm, um, 1.0, 50, false).states.back()) /
                   (2 * h);
    EXPECT_LT((D.col(k) - fd).norm(), 1e-7);
  }
}

TEST(Admissibility, Reports) {
  const auto sys = linear_scalar(0.0, 0.0);
  Trajectory t;
  t.times = {0.0, 0.5, 1.0};
  t.states = {v1(0.0), v1(10.1), v1(3.0)};
  t.inputs = {v1(0.0), v1(0.0), v1(0.0)};
  auto rep = admissibility_report(t, sys, 0.05);
  ASSERT_EQ(rep.size(), 1u);
  EXPECT_EQ(rep[0].time, 0.5);
  EXPECT_EQ(rep[0].coordinate, 0);
  EXPECT_FALSE(rep[0].is_input);
  EXPECT_NEAR(rep[0].excess, 0.1, 1e-12);
  EXPECT_TRUE(admissibility_report(t, sys, 0.2).empty());
  t.states[1] = v1(1.0);
  EXPECT_TRUE(admissibility_report(t, sys, 0.0).empty());
  t.states[1] = Eigen::Vector2d(0, 0);
  EXPECT_THROW(admissibility_report(t, sys, 0.0), DimensionMismatch);
}

TEST(Csv, RoundTripIsBitExact) {
  std::mt19937 rng(42);
  std::normal_distribution<double> n(0.0, 1e3);
  Trajectory t;
  for (int j = 0; j < 25; ++j) {
    t.times.push_back(j * 0.1 / 3.0);
    t.states.push_back(Eigen::Vector3d(n(rng), n(rng) * 1e-9, std::exp(n(rng) * 1e-2)));
    t.inputs.push_back(Eigen::Vector2d(n(rng), 1.0 / 3.0));
  }
  std::stringstream ss;
  write_trajectory_csv(t, ss);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "t,x1,x2,x3,u1,u2");
  const Trajectory back = read_trajectory_csv(ss);
  ASSERT_EQ(back.size(), t.size());
  for (std::size_t j = 0; j < t.size(); ++j) {
    EXPECT_EQ(back.times[j], t.times[j]);
    EXPECT_EQ(back.states[j], t.states[j]);
    EXPECT_EQ(back.inputs[j], t.inputs[j]);
  }
}
