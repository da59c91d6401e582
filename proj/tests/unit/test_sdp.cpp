#include "ocpkit/sdp.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <sstream>

using namespace ocpkit;

namespace {

void add_matrix(SdpProblem& p, int matrix, int block, const Mat& A) {
  for (int r = 0; r < A.rows(); ++r) {
    for (int c = r; c < A.cols(); ++c) {
      if (A(r, c) != 0.0) p.entries.push_back({matrix, block, r, c, A(r, c)});
    }
  }
}

Mat random_symmetric(std::mt19937& rng, int n) {
  std::normal_distribution<double> nd;
  Mat A(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) A(i, j) = nd(rng);
  }
  return 0.5 * (A + A.transpose());
}

double lambda_min(const Mat& A) { return Eigen::SelfAdjointEigenSolver<Mat>(A, Eigen::EigenvaluesOnly).eigenvalues()[0]; }

// max over s of lambda_min(F(x0 + s d)) by golden section; lambda_min of an affine
// matrix pencil is concave in s.
double best_margin_on_line(const std::vector<Mat>& F, const Eigen::Vector2d& x0, const Eigen::Vector2d& d, double lo,
                           double hi) {
  auto g = [&](double s) {
    const Eigen::Vector2d x = x0 + s * d;
    return lambda_min(F[1] * x[0] + F[2] * x[1] - F[0]);
  };
  const double r = (std::sqrt(5.0) - 1) / 2;
  double a = lo, b = hi;
  for (int k = 0; k < 200; ++k) {
    const double c = b - r * (b - a), e = a + r * (b - a);
    if (g(c) > g(e)) {
      b = e;
    } else {
      a = c;
    }
  }
  return g(0.5 * (a + b));
}

}  // namespace

TEST(Sdp, TraceWithFixedCorner) {
  SdpProblem p;
  p.blocks = {2};
  p.c = Vec::Constant(1, 1.0);
  add_matrix(p, 0, 0, -Mat::Identity(2, 2));
  p.entries.push_back({1, 0, 0, 0, 1.0});
  const auto sol = solve_sdp(p);
  ASSERT_EQ(sol.status, SdpStatus::optimal);
  EXPECT_NEAR(sol.dual_objective, -1.0, 1e-7);
  EXPECT_NEAR(sol.Y[0](0, 0), 1.0, 1e-6);
  EXPECT_NEAR(sol.Y[0](1, 1), 0.0, 1e-6);
  EXPECT_NEAR(sol.Y[0](0, 1), 0.0, 1e-6);
  EXPECT_LE(std::abs(sol.gap()), 1e-7 * (1 + std::abs(sol.primal_objective)));
}

TEST(Sdp, LargestOffDiagonal) {
  // max t s.t. [[1, t], [t, 1]] >= 0, as min -t.
  SdpProblem p;
  p.blocks = {2};
  p.c = Vec::Constant(1, -1.0);
  add_matrix(p, 0, 0, -Mat::Identity(2, 2));
  p.entries.push_back({1, 0, 0, 1, 1.0});
  const auto sol = solve_sdp(p);
  ASSERT_EQ(sol.status, SdpStatus::optimal);
  EXPECT_NEAR(sol.x[0], 1.0, 1e-6);
}

TEST(Sdp, ScalarBound) {
  // min x s.t. x >= 1.
  SdpProblem p;
  p.blocks = {1};
  p.c = Vec::Constant(1, 1.0);
  p.entries = {{0, 0, 0, 0, 1.0}, {1, 0, 0, 0, 1.0}};
  std::ostringstream os;
  write_sdpa(p, os);
  EXPECT_EQ(os.str(), "1\n1\n1\n1\n0 1 1 1 1\n1 1 1 1 1\n");
  std::istringstream is(os.str());
  EXPECT_EQ(read_sdpa(is), p);
  const auto sol = solve_sdp(p);
  ASSERT_EQ(sol.status, SdpStatus::optimal);
  EXPECT_NEAR(sol.x[0], 1.0, 1e-7);
}

TEST(Sdp, RandomProblemMatchesLineScan) {
  std::mt19937 rng(42);
  const int n = 10;
  std::vector<Mat> F{Mat(), random_symmetric(rng, n), random_symmetric(rng, n)};
  const Mat R = random_symmetric(rng, n);
  F[0] = -(Mat::Identity(n, n) + R * R.transpose() / n);  // x = 0 strictly feasible
  const Mat Q = random_symmetric(rng, n);
  const Mat Y0 = Mat::Identity(n, n) + Q * Q.transpose() / n;  // strictly feasible Y
  SdpProblem p;
  p.blocks = {n};
  p.c = Eigen::Vector2d(F[1].cwiseProduct(Y0).sum(), F[2].cwiseProduct(Y0).sum());
  for (int i = 0; i < 3; ++i) add_matrix(p, i, 0, F[i]);
  const auto sol = solve_sdp(p);
  ASSERT_EQ(sol.status, SdpStatus::optimal);

  // Bisection on the objective level with a golden-section feasibility scan.
  const Eigen::Vector2d c = p.c;
  const Eigen::Vector2d perp(-c[1], c[0]);
  double lo = -1e3, hi = 0.0;  // x = 0 is feasible with objective 0
  for (int k = 0; k < 80; ++k) {
    const double t = 0.5 * (lo + hi);
    const Eigen::Vector2d x0 = t * c / c.squaredNorm();
    if (best_margin_on_line(F, x0, perp.normalized(), -1e3, 1e3) >= 0) {
      hi = t;
    } else {
      lo = t;
    }
  }
  EXPECT_NEAR(sol.primal_objective, hi, 1e-5 * (1 + std::abs(hi)));
  EXPECT_NEAR(sol.dual_objective, hi, 1e-5 * (1 + std::abs(hi)));
}

TEST(Sdp, InfeasibleMatrixProblemReported) {
  // Y >= 0 with Y = -1.
  SdpProblem p;
  p.blocks = {1};
  p.c = Vec::Constant(1, -1.0);
  p.entries = {{1, 0, 0, 0, 1.0}};
  EXPECT_EQ(solve_sdp(p).status, SdpStatus::dual_infeasible);
}

TEST(Sdp, DiagonalBlocksAndMixedStructure) {
  // LP: max y1 + y2 s.t. y1 + 2 y2 = 2, y >= 0, plus a 2x2 block with Y11 = 1.
  SdpProblem p;
  p.blocks = {-2, 2};
  p.c = Eigen::Vector2d(2.0, 1.0);
  p.entries = {{0, 0, 0, 0, 1.0}, {0, 0, 1, 1, 1.0}, {1, 0, 0, 0, 1.0}, {1, 0, 1, 1, 2.0}, {2, 1, 0, 0, 1.0}};
  const auto sol = solve_sdp(p);
  ASSERT_EQ(sol.status, SdpStatus::optimal);
  EXPECT_NEAR(sol.dual_objective, 2.0, 1e-7);
  EXPECT_NEAR(sol.Y[0](0, 0), 2.0, 1e-6);
}

// max -Y00 - 3 Y11 s.t. Y00 + v = 2, Y11 - v = 0, Y01 = 1/2, Y >= 0, v free.
// PSD needs (2 - v) v >= 1/4, so v* = 1 - sqrt(3)/2.
SdpProblem free_variable_problem() {
  SdpProblem p;
  p.blocks = {2};
  p.c = Eigen::Vector3d(2.0, 0.0, 1.0);
  p.entries = {{0, 0, 0, 0, -1.0}, {0, 0, 1, 1, -3.0}, {1, 0, 0, 0, 1.0}, {2, 0, 1, 1, 1.0}, {3, 0, 0, 1, 1.0}};
  p.free_B = Eigen::Vector3d(1.0, -1.0, 0.0);
  p.free_obj = Vec::Zero(1);
  return p;
}

TEST(Sdp, FreeVariableOracle) {
  const auto sol = solve_sdp(free_variable_problem());
  ASSERT_EQ(sol.status, SdpStatus::optimal);
  const double v = 1.0 - std::sqrt(3.0) / 2.0;
  EXPECT_NEAR(sol.free[0], v, 1e-6);
  EXPECT_NEAR(sol.dual_objective, -2.0 - 2.0 * v, 1e-7);
  EXPECT_TRUE(has_feasible_point(sol));
}

TEST(Sdp, SplitFreeVariablesAgree) {
  const SdpProblem p = free_variable_problem();
  const SdpProblem q = p.split_free();
  EXPECT_EQ(q.n_free(), 0);
  EXPECT_EQ(q.blocks, (std::vector<int>{2, -2}));
  const auto sol = solve_sdp(q);
  ASSERT_EQ(sol.status, SdpStatus::optimal);
  EXPECT_NEAR(sol.dual_objective, solve_sdp(p).dual_objective, 1e-6);
  EXPECT_NEAR(sol.Y[1](0, 0) - sol.Y[1](1, 0), 1.0 - std::sqrt(3.0) / 2.0, 1e-5);

  std::stringstream ss;
  write_sdpa(p, ss);
  EXPECT_EQ(read_sdpa(ss), q);
}

TEST(Sdp, FeasiblePointRequiresSmallResidual) {
  SdpSolution s;
  s.status = SdpStatus::max_iter;
  s.Y = {Mat::Identity(1, 1)};
  s.dual_infeasibility = 1e-6;
  EXPECT_FALSE(has_feasible_point(s));
  EXPECT_TRUE(has_feasible_point(s, 1e-5));
  s.status = SdpStatus::dual_infeasible;
  EXPECT_FALSE(has_feasible_point(s, 1.0));
}

TEST(Sdpa, RoundTripIsIdentity) {
  std::mt19937 rng(3);
  SdpProblem p;
  p.blocks = {4, -3, 2};
  p.c = Vec::Random(5);
  for (int i = 0; i <= 5; ++i) {
    add_matrix(p, i, 0, random_symmetric(rng, 4));
    p.entries.push_back({i, 1, i % 3, i % 3, 1.0 / (i + 3)});
    add_matrix(p, i, 2, random_symmetric(rng, 2) * 1e-7);
  }
  p.normalize();
  std::stringstream ss;
  write_sdpa(p, ss);
  const SdpProblem q = read_sdpa(ss);
  SdpProblem qn = q;
  qn.normalize();
  EXPECT_EQ(q, qn);
  EXPECT_EQ(p, q);
}

TEST(Sdpa, ParsesSeparatorsAndComments) {
  std::istringstream is("\"a comment\n* another\n2\n2\n{3, -2}\n(1.0, 2.0)\n1 1 2 1 0.5\n0 2 2 2 -1\n");
  const SdpProblem p = read_sdpa(is);
  EXPECT_EQ(p.blocks, (std::vector<int>{3, -2}));
  EXPECT_EQ(p.m(), 2);
  ASSERT_EQ(p.entries.size(), 2u);
  EXPECT_EQ(p.entries[0].row, 0);  // lower-triangle input is mirrored
  EXPECT_EQ(p.entries[0].col, 1);
}

TEST(Sdpa, EmptyProblemRejected) {
  SdpProblem p;
  std::ostringstream os;
  EXPECT_THROW(write_sdpa(p, os), InvalidArgument);
  p.blocks = {2};
  EXPECT_THROW(solve_sdp(p), InvalidArgument);
  std::istringstream is("0\n1\n2\n\n");
  EXPECT_THROW(read_sdpa(is), InvalidArgument);
}

TEST(Sdp, DenseCapEnforced) {
  SdpProblem p;
  p.blocks = {30};
  p.c = Vec::Constant(1, 1.0);
  p.entries = {{1, 0, 0, 0, 1.0}};
  SdpOptions o;
  o.dense_cap = 20;
  EXPECT_THROW(solve_sdp(p, o), InvalidArgument);
}
