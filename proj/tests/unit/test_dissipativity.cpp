#include "ocpkit/dissipativity.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace ocpkit;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

const std::vector<std::string> kXU{"x", "u"};

Box unit_box() { return Box(v1(-1), v1(1)); }

PolynomialVectorField field(const std::string& text) {
  return PolynomialVectorField(1, 1, {parse_polynomial(text, kXU)});
}

SteadyStatePair pair(double x, double u, double F) {
  SteadyStatePair z;
  z.x_bar = v1(x);
  z.u_bar = v1(u);
  z.cost_value = F;
  return z;
}

StorageCertificate scalar_certificate(const std::string& S, double alpha_bar, double x_ref) {
  StorageCertificate c;
  c.state_names = {"x"};
  c.S_scaled = parse_polynomial(S, {"x"});
  c.mid = v1(0.0);
  c.half = v1(1.0);
  c.alpha_bar = alpha_bar;
  c.x_ref = v1(x_ref);
  c.u_ref = v1(0.0);
  return c;
}

SupplyRate supply(const std::string& F, const SteadyStatePair& z) {
  return supply_rate(polynomial_cost("F", parse_polynomial(F, kXU), 1), z);
}

SynthesisOptions with_degree(int d) {
  SynthesisOptions o;
  o.storage_degree = d;
  return o;
}

}  // namespace

TEST(SupplyRate, OffsetAtReference) {
  const auto w = supply("(x - 1)^2 + u^2", pair(0.5, 0.5, 0.5));
  EXPECT_DOUBLE_EQ(w(v1(0.5), v1(0.5)), 0.0);
  EXPECT_DOUBLE_EQ(w(v1(1.0), v1(0.0)), -0.5);
}

TEST(Synthesis, EnergySupplyReachesFullStrictness) {
  // x' = -x + u, w = x^2 + u^2 at the origin: S = 0 works with alpha_bar = 1.
  const auto cost = parse_polynomial("x^2 + u^2", kXU);
  for (int d : {0, 2}) {
    const auto res = synthesize_certificate(field("-x + u"), unit_box(), unit_box(), cost, pair(0, 0, 0), with_degree(d));
    EXPECT_NEAR(res.certificate.alpha_bar, 1.0, 1e-3) << d;
    EXPECT_TRUE(res.certificate.verification.passed) << d;
    EXPECT_EQ(res.problem.mode, SosProblem::Mode::joint);
  }
}

TEST(Synthesis, ToyCostReachesFullStrictness) {
  // F = (x-1)^2 + u^2: S = x gives w - S' f = (x - 1/2)^2 + (u - 1/2)^2.
  const auto cost = parse_polynomial("(x - 1)^2 + u^2", kXU);
  const auto res = synthesize_certificate(field("-x + u"), unit_box(), unit_box(), cost, pair(0.5, 0.5, 0.5),
                                          with_degree(2));
  EXPECT_NEAR(res.certificate.alpha_bar, 1.0, 1e-3);
  EXPECT_TRUE(res.certificate.verification.passed);
  EXPECT_GE(res.certificate.verification.min_storage, -1e-6);
  EXPECT_LE(res.problem.coefficient_residual(res.solution), 1e-6);
}

TEST(Synthesis, BisectionAgreesWithDirect) {
  const auto cost = parse_polynomial("(x - 1)^2 + u^2", kXU);
  auto opts = with_degree(2);
  opts.alpha_mode = AlphaMode::bisection;
  const auto res = synthesize_certificate(field("-x + u"), unit_box(), unit_box(), cost, pair(0.5, 0.5, 0.5), opts);
  EXPECT_NEAR(res.certificate.alpha_bar, 1.0, 1e-3);
}

TEST(Synthesis, PartialStrictness) {
  // x' = u, w = x^2/4 + u^2. At u = 0 the inequality reads x^2/4 >= alpha x^2
  // whatever S is, and S = 0 attains alpha = 1/4.
  const auto cost = parse_polynomial("0.25*x^2 + u^2", kXU);
  const auto res = synthesize_certificate(field("u"), unit_box(), unit_box(), cost, pair(0, 0, 0), with_degree(2));
  EXPECT_NEAR(res.certificate.alpha_bar, 0.25, 1e-3);
  EXPECT_TRUE(res.certificate.verification.passed);
}

TEST(Synthesis, VertexModeForInputAffineData) {
  const auto cost = parse_polynomial("x^2 - x*u", kXU);
  const auto P = build_sos_problem(field("-x + u"), unit_box(), unit_box(), cost, pair(0, 0, 0), 2, -1);
  EXPECT_EQ(P.mode, SosProblem::Mode::vertex);
  EXPECT_EQ(P.pieces.size(), 2u);
}

TEST(Synthesis, InputStrictnessOnEnergySupply) {
  // w - alpha (x^2 + u^2) with S = 0 leaves (1 - alpha)(x^2 + u^2).
  auto opts = with_degree(2);
  opts.input_strictness = true;
  const auto cost = parse_polynomial("x^2 + u^2", kXU);
  const auto res = synthesize_certificate(field("-x + u"), unit_box(), unit_box(), cost, pair(0, 0, 0), opts);
  EXPECT_NEAR(res.certificate.alpha_bar, 1.0, 1e-3);
  EXPECT_TRUE(res.certificate.input_strict());
  EXPECT_TRUE(res.certificate.verification.passed);
}

TEST(Synthesis, InputStrictnessOnToyCost) {
  // S = x turns w into (x - 1/2)^2 + (u - 1/2)^2, the full z distance.
  auto opts = with_degree(2);
  opts.input_strictness = true;
  const auto cost = parse_polynomial("(x - 1)^2 + u^2", kXU);
  const auto res = synthesize_certificate(field("-x + u"), unit_box(), unit_box(), cost, pair(0.5, 0.5, 0.5), opts);
  EXPECT_NEAR(res.certificate.alpha_bar, 1.0, 1e-3);
  EXPECT_TRUE(res.certificate.verification.passed);
  const Vec x = v1(0.2), u = v1(-0.4);
  EXPECT_NEAR(res.certificate.alpha(x, u), res.certificate.alpha_bar * (0.09 + 0.81), 1e-12);
}

TEST(Synthesis, InputStrictnessNeedsAnInputCost) {
  // w = x^2: S = 0 gives alpha = 1 in x. In z, x = 0 leaves -alpha u^2 - S'(0) u >= 0
  // for u of both signs, so alpha = 0.
  const auto cost = parse_polynomial("x^2", kXU);
  const auto state = synthesize_certificate(field("-x + u"), unit_box(), unit_box(), cost, pair(0, 0, 0), with_degree(2));
  EXPECT_NEAR(state.certificate.alpha_bar, 1.0, 1e-3);
  EXPECT_EQ(state.problem.mode, SosProblem::Mode::vertex);
  auto opts = with_degree(2);
  opts.input_strictness = true;
  const auto joint = synthesize_certificate(field("-x + u"), unit_box(), unit_box(), cost, pair(0, 0, 0), opts);
  EXPECT_EQ(joint.problem.mode, SosProblem::Mode::joint);
  EXPECT_LE(joint.certificate.alpha_bar, 1e-3);
}

TEST(Synthesis, NoCertificateWhenSupplyNegative) {
  // No dynamics and w = -x^2: w - alpha x^2 < 0 off the origin for every alpha >= 0.
  const auto cost = parse_polynomial("-x^2", kXU);
  EXPECT_THROW(synthesize_certificate(field("0"), unit_box(), unit_box(), cost, pair(0, 0, 0), with_degree(2)),
               NoCertificate);
}

TEST(Synthesis, DenseCapReducesDegree) {
  const auto cost = parse_polynomial("(x - 1)^2 + u^2", kXU);
  auto opts = with_degree(6);
  const auto big = build_sos_problem(field("-x + u"), unit_box(), unit_box(), cost, pair(0.5, 0.5, 0.5), 6, -1);
  opts.sdp.dense_cap = big.sdp.psd_dimension() - 1;
  const auto res = synthesize_certificate(field("-x + u"), unit_box(), unit_box(), cost, pair(0.5, 0.5, 0.5), opts);
  EXPECT_LT(res.certificate.degree, 6);
  EXPECT_FALSE(res.notes.empty());
  opts.reduce_degree = false;
  EXPECT_THROW(synthesize_certificate(field("-x + u"), unit_box(), unit_box(), cost, pair(0.5, 0.5, 0.5), opts),
               InvalidArgument);
}

TEST(CheckCertificate, DegreeZeroToyOnFineGrid) {
  const auto sys = field("-x + u").to_system("toy", unit_box(), unit_box());
  const auto cert = scalar_certificate("0", 1.0, 0.0);
  CheckOptions o;
  o.grid = 101;
  const auto chk = check_certificate(cert, sys, supply("x^2 + u^2", pair(0, 0, 0)), o);
  EXPECT_TRUE(chk.passed);
  EXPECT_GE(chk.min_residual, 0.0);
}

TEST(CheckCertificate, CorruptedCertificateFlagsEveryPointOffReference) {
  const auto sys = field("0").to_system("still", unit_box(), unit_box());
  const auto cert = scalar_certificate("0", 1.0, 0.0);
  CheckOptions o;
  o.grid = 101;
  o.vertices_only = true;
  o.max_listed = 1000;
  const auto chk = check_certificate(cert, sys, supply("0", pair(0, 0, 0)), o);
  EXPECT_FALSE(chk.passed);
  EXPECT_EQ(chk.violation_count, 100 * 2);  // every grid point but x = 0, at both input vertices
  for (const auto& v : chk.violations) EXPECT_NE(v.x[0], 0.0);
}

TEST(CheckCertificate, NegativeStorageFails) {
  const auto sys = field("0").to_system("still", unit_box(), unit_box());
  const auto chk = check_certificate(scalar_certificate("x - 0.5", 0.0, 0.0), sys, supply("0", pair(0, 0, 0)));
  EXPECT_EQ(chk.violation_count, 0);
  EXPECT_FALSE(chk.passed);
  EXPECT_NEAR(chk.min_storage, -1.5, 1e-12);
}

TEST(CheckCertificate, VertexSufficiencyForAffineInput) {
  // L(x, u) is affine in u, so its minimum over U sits at a vertex.
  const ReactorParams p;
  const auto vf = polynomialize_reactor(p, 4, 110.0);
  const auto sys = vf.to_system("poly", reactor_state_box(), reactor_input_box());
  auto cert = scalar_certificate("0", 0.3, 0.0);
  cert.state_names = {"cA", "cB", "theta"};
  cert.S_scaled = parse_polynomial("0.2*a^2 - 0.1*a*b + 0.05*c^3 + b", {"a", "b", "c"});
  cert.mid = reactor_state_box().mid();
  cert.half = reactor_state_box().scale();
  cert.x_ref = Eigen::Vector3d(2.17, 1.1, 128.5);
  const auto w = supply_rate(reactor_cost(p), pair(0, 0, 0));
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> unit(0, 1);
  const Box& X = reactor_state_box();
  const Box& U = reactor_input_box();
  auto L = [&](const Vec& x, const Vec& u) {
    return w(x, u) - cert.alpha(x, u) - cert.gradient(x).dot(sys.dynamics(x, u));
  };
  for (int k = 0; k < 50; ++k) {
    Vec x(3);
    for (int i = 0; i < 3; ++i) x[i] = X.lower[i] + unit(rng) * (X.upper[i] - X.lower[i]);
    double vmin = std::numeric_limits<double>::infinity();
    for (const Vec& u : U.vertices()) vmin = std::min(vmin, L(x, u));
    double gmin = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= 20; ++a) {
      for (int b = 0; b <= 20; ++b) {
        const Vec u = Eigen::Vector2d(U.lower[0] + a * (U.upper[0] - U.lower[0]) / 20,
                                      U.lower[1] + b * (U.upper[1] - U.lower[1]) / 20);
        gmin = std::min(gmin, L(x, u));
      }
    }
    EXPECT_NEAR(gmin, vmin, 1e-9 * (1 + std::abs(vmin)));
  }
}

TEST(DissipationResidual, ZeroEverything) {
  const auto sys = field("-x + u").to_system("toy", unit_box(), unit_box());
  const auto traj = integrate(sys, v1(0.0), ControlSignal::constant(2.0, v1(0.0)), 1e-2);
  const auto d = dissipation_residual(traj, scalar_certificate("0", 0.0, 0.0), supply("x^2 + u^2", pair(0, 0, 0)));
  for (double v : d.delta) EXPECT_EQ(v, 0.0);
}

TEST(DissipationResidual, ChainRuleIdentity) {
  // x' = u, S = x^2, w = 2 x u: d/dt S = w exactly.
  const auto sys = field("u").to_system("int", Box(v1(-5), v1(5)), Box(v1(-2), v1(2)));
  std::vector<Vec> u;
  for (int k = 0; k < 8; ++k) u.push_back(v1(std::sin(1.3 * k) * 1.5));
  const auto traj = integrate(sys, v1(0.3), ControlSignal::uniform(2.0, u), 1e-3);
  const auto d = dissipation_residual(traj, scalar_certificate("x^2", 0.0, 0.0), supply("2*x*u", pair(0, 0, 0)));
  for (double v : d.delta) EXPECT_LE(std::abs(v), 1e-6);
}

TEST(DissipationResidual, DimensionMismatch) {
  Trajectory t;
  t.times = {0, 1};
  t.states = {Vec::Zero(2), Vec::Zero(2)};
  t.inputs = {v1(0), v1(0)};
  EXPECT_THROW(dissipation_residual(t, scalar_certificate("0", 0, 0), supply("0", pair(0, 0, 0))), DimensionMismatch);
}

TEST(SosBounds, QuadraticOnUnitInterval) {
  const auto [lo, hi] = sos_bounds(parse_polynomial("s^2 - s", {"s"}), 2);
  EXPECT_NEAR(lo, -0.25, 1e-6);
  EXPECT_NEAR(hi, 2.0, 1e-6);
  EXPECT_LE(lo, -0.25 + 1e-12);
}

TEST(Certificate, JsonRoundTrip) {
  auto cert = scalar_certificate("0.5*x^2 - 0.25*x", 0.75, 0.5);
  cert.alpha_form = AlphaForm::table;
  cert.alpha_table = {{0.0, 0.5, 1.0}, {0.0, 0.1, 0.5}};
  const auto back = certificate_from_json(nlohmann::json::parse(to_json(cert).dump()));
  EXPECT_EQ(back.S_scaled.terms(), cert.S_scaled.terms());
  EXPECT_EQ(back.alpha_bar, cert.alpha_bar);
  EXPECT_EQ(back.alpha_table.value, cert.alpha_table.value);
  EXPECT_EQ(back.x_ref, cert.x_ref);
  EXPECT_THROW(certificate_from_json(nlohmann::json::parse(R"({"alpha_bar": 2})")), InvalidArgument);
}

TEST(Certificate, JsonKeepsInputScaling) {
  auto cert = scalar_certificate("x^2", 0.5, 0.0);
  cert.input_mid = v1(1.0);
  cert.input_half = v1(2.0);
  const auto j = to_json(cert);
  EXPECT_EQ(j["strictness"], "input_state");
  const auto back = certificate_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_TRUE(back.input_strict());
  EXPECT_EQ(back.input_half, cert.input_half);
  // alpha = 0.5 (x^2 + (u / 2)^2)
  EXPECT_DOUBLE_EQ(back.alpha(v1(0.5), v1(1.0)), 0.5 * (0.25 + 0.25));
  EXPECT_FALSE(certificate_from_json(to_json(scalar_certificate("x^2", 0.5, 0.0))).input_strict());
}

TEST(Export, ToyProblemRoundTripResolves) {
  const auto cost = parse_polynomial("(x - 1)^2 + u^2", kXU);
  const auto res = synthesize_certificate(field("-x + u"), unit_box(), unit_box(), cost, pair(0.5, 0.5, 0.5),
                                          with_degree(2));
  const auto path = (std::filesystem::temp_directory_path() / "ocpkit_toy.dat-s").string();
  export_sdp(res.problem, path);
  const SdpProblem back = read_sdpa(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back, res.problem.sdp.split_free());
  const auto sol = solve_sdp(back);
  ASSERT_EQ(sol.status, SdpStatus::optimal);
  EXPECT_NEAR(res.problem.alpha_of(sol), res.problem.alpha_of(res.solution), 1e-6);
}
