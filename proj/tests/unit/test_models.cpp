#include "ocpkit/models.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <iostream>

using namespace ocpkit;

namespace {

Vec z(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double d : v) out[i++] = d;
  return out;
}

}  // namespace

TEST(Reactor, PureFeedInflowWithoutReactant) {
  const ReactorParams p;
  const ControlSystem sys = reactor_system(p);
  for (double u1 : {3.0, 10.0, 35.0}) {
    const Vec dx = sys.dynamics(z({0, 0, 110}), z({u1, 100}));
    EXPECT_DOUBLE_EQ(dx[0], p.c_in * u1);
    EXPECT_GT(dx[0], 0.0);
    EXPECT_DOUBLE_EQ(dx[1], 0.0);
  }
}

TEST(Reactor, DynamicsAffineInInputs) {
  const ControlSystem sys = reactor_system({});
  const Vec x = z({2.0, 1.0, 120.0});
  const Vec u = z({5.0, 30.0}), v = z({33.0, 180.0});
  for (double lam : {0.0, 0.25, 0.6, 1.0}) {
    const Vec lhs = sys.dynamics(x, lam * u + (1 - lam) * v);
    const Vec rhs = lam * sys.dynamics(x, u) + (1 - lam) * sys.dynamics(x, v);
    EXPECT_LT((lhs - rhs).norm(), 1e-10 * (1 + rhs.norm()));
  }
}

TEST(Reactor, AnalyticJacobianMatchesDifferences) {
  const ControlSystem sys = reactor_system({});
  const Vec x = z({2.3, 0.8, 131.0}), u = z({20.0, 120.0});
  Mat jx, ju;
  sys.jacobian(x, u, jx, ju);
  for (int i = 0; i < 3; ++i) {
    Vec xp = x, xm = x;
    const double h = 1e-6 * (1 + std::abs(x[i]));
    xp[i] += h;
    xm[i] -= h;
    const Vec fd = (sys.dynamics(xp, u) - sys.dynamics(xm, u)) / (2 * h);
    EXPECT_LT((jx.col(i) - fd).norm(), 1e-5 * (1 + fd.norm()));
  }
  for (int j = 0; j < 2; ++j) {
    Vec up = u, um = u;
    up[j] += 1e-4;
    um[j] -= 1e-4;
    const Vec fd = (sys.dynamics(x, up) - sys.dynamics(x, um)) / 2e-4;
    EXPECT_LT((ju.col(j) - fd).norm(), 1e-6 * (1 + fd.norm()));
  }
}

TEST(Reactor, RejectsNonPositiveParameters) {
  ReactorParams p;
  p.k20 = 0.0;
  EXPECT_THROW(reactor_system(p), InvalidArgument);
  p = {};
  p.beta = -1.0;
  EXPECT_THROW(reactor_cost(p), InvalidArgument);
  p = {};
  p.theta0 = 0.0;
  EXPECT_THROW(p.validate(), InvalidArgument);
}

TEST(Reactor, EvaluationIsBitReproducible) {
  const ControlSystem sys = reactor_system({});
  const Vec x = z({1.1, 2.2, 99.9}), u = z({7.0, 55.0});
  const Vec a = sys.dynamics(x, u), b = sys.dynamics(x, u);
  EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * 3), 0);
}

TEST(Taylor, ExactAtCenterAndOrderZero) {
  const ReactorParams p;
  const auto t4 = taylor_arrhenius(p, 4, 110.0);
  const auto k = arrhenius_rates(p, 110.0);
  for (int r = 0; r < 3; ++r) {
    EXPECT_EQ(t4.evaluate(r, 110.0), k[r]);
    EXPECT_EQ(t4.coeffs[r].size(), 5u);
  }
  const auto t0 = taylor_arrhenius(p, 0, 110.0);
  for (int r = 0; r < 3; ++r) {
    ASSERT_EQ(t0.coeffs[r].size(), 1u);
    EXPECT_EQ(t0.evaluate(r, 140.0), k[r]);
  }
  EXPECT_THROW(taylor_arrhenius(p, -1, 110.0), InvalidArgument);
  EXPECT_THROW(taylor_arrhenius(p, 2, -300.0), InvalidArgument);
}

TEST(Taylor, FirstCoefficientMatchesCentralDifference) {
  const ReactorParams p;
  for (double center : {80.0, 110.0, 140.0}) {
    const auto t = taylor_arrhenius(p, 4, center);
    const double E[3] = {p.E1, p.E2, p.E3};
    const auto k = arrhenius_rates(p, center);
    const double h = 1e-4;
    const auto kp = arrhenius_rates(p, center + h), km = arrhenius_rates(p, center - h);
    for (int r = 0; r < 3; ++r) {
      const double closed = k[r] * E[r] / std::pow(center + p.theta0, 2);
      const double fd = (kp[r] - km[r]) / (2 * h);
      EXPECT_NEAR(t.coeffs[r][1], closed, 1e-12 * closed);
      EXPECT_LT(std::abs(t.coeffs[r][1] - fd) / std::abs(fd), 1e-6);
    }
  }
}

TEST(Taylor, HigherCoefficientsMatchNestedDifferences) {
  // Second coefficient k''/2 against a second central difference.
  const ReactorParams p;
  const auto t = taylor_arrhenius(p, 4, 110.0);
  const double h = 1e-2;
  const auto k0 = arrhenius_rates(p, 110.0), kp = arrhenius_rates(p, 110.0 + h), km = arrhenius_rates(p, 110.0 - h);
  for (int r = 0; r < 3; ++r) {
    const double fd2 = (kp[r] - 2 * k0[r] + km[r]) / (h * h) / 2.0;
    EXPECT_LT(std::abs(t.coeffs[r][2] - fd2) / std::abs(fd2), 1e-5);
  }
}

TEST(Polynomialized, MatchesExactAtCenter) {
  const ReactorParams p;
  const auto vf = polynomialize_reactor(p, 4, 110.0);
  const ControlSystem exact = reactor_system(p);
  EXPECT_TRUE(vf.input_affine());
  for (int i = 0; i <= 10; ++i) {
    for (int j = 0; j <= 10; ++j) {
      const Vec x = z({0.6 * i, 0.4 * j, 110.0});
      const Vec u = z({35.0, 142.76});
      const Vec a = vf.evaluate(x, u), b = exact.dynamics(x, u);
      for (int k = 0; k < 3; ++k) EXPECT_LE(std::abs(a[k] - b[k]), 1e-12 * std::max(1.0, std::abs(b[k])));
    }
  }
}

TEST(Polynomialized, GridMismatchIsFiniteAndRecorded) {
  const ReactorParams p;
  const auto vf = polynomialize_reactor(p, 4, 110.0);
  const ControlSystem exact = reactor_system(p);
  const Vec u = z({35.0, 142.76});
  const Vec half = reactor_state_box().half_width();
  double worst = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j)
      for (int k = 0; k < 17; ++k) {
        const Vec x = z({0.6 * i, 0.4 * j, 70.0 + 5.0 * k});
        const Vec d = (vf.evaluate(x, u) - exact.dynamics(x, u)).cwiseQuotient(half);
        worst = std::max(worst, d.cwiseAbs().maxCoeff());
      }
  EXPECT_TRUE(std::isfinite(worst));
  RecordProperty("max_scaled_mismatch", std::to_string(worst));
  std::cout << "max scaled mismatch of the order-4 reactor over the 11x11x17 grid: " << worst << "\n";
}

TEST(Polynomialized, DegreesAndSystemWrapper) {
  const auto vf = polynomialize_reactor({}, 4, 110.0);
  const auto deg = vf.degrees();
  EXPECT_EQ(deg[0], 6);  // k3(theta) * cA^2
  const ControlSystem sys = vf.to_system("poly", reactor_state_box(), reactor_input_box());
  const Vec x = z({2.0, 1.0, 125.0}), u = z({20.0, 100.0});
  EXPECT_LT((sys.dynamics(x, u) - vf.evaluate(x, u)).norm(), 1e-12);
}

TEST(Cost, ReactorLipschitzBound) {
  ReactorParams p;
  p.beta = 2.0;
  const CostFunction F = reactor_cost(p);
  EXPECT_DOUBLE_EQ(F(z({1, 1.5, 100}), z({20, 0})), -2.0 * 1.5 * 20);
  const double L = lipschitz_bound(F, reactor_state_box(), reactor_input_box());
  EXPECT_NEAR(L, 2.0 * std::hypot(35.0, 4.0), 1e-12);
}

TEST(Cost, PolynomialCostGradient) {
  const std::vector<std::string> names{"x1", "u1"};
  const CostFunction F = polynomial_cost("toy", parse_polynomial("(x1 - 1)^2 + u1^2", names), 1);
  Vec gx, gu;
  F.grad(z({0.25}), z({-0.5}), gx, gu);
  EXPECT_DOUBLE_EQ(gx[0], -1.5);
  EXPECT_DOUBLE_EQ(gu[0], -1.0);
  const double L = lipschitz_bound(F, Box(z({-1}), z({1})), Box(z({-1}), z({1})));
  EXPECT_NEAR(L, std::sqrt(20.0), 1e-12);
}

TEST(Box, VerticesAndUnitMaps) {
  const Box b(z({0, -2}), z({4, 2}));
  const auto v = b.vertices();
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v[1], z({4, -2}));
  EXPECT_EQ(b.to_unit(z({4, 0})), z({1, 0}));
  EXPECT_EQ(b.from_unit(z({-1, 1})), z({0, 2}));
  EXPECT_THROW(Box(z({1}), z({0})), InvalidArgument);
}
