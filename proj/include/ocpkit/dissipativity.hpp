#pragma once

#include "ocpkit/ocp.hpp"
#include "ocpkit/sdp.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace ocpkit {

/// w(x, u) = F(x, u) - F(z_bar).
struct SupplyRate {
  CostFunction cost;
  SteadyStatePair reference;
  double offset = 0.0;

  double operator()(const Vec& x, const Vec& u) const { return cost(x, u) - offset; }
};

SupplyRate supply_rate(const CostFunction& cost, const SteadyStatePair& z_bar);

/// Piecewise-linear class-K function of the scaled distance r = |s - s_bar|,
/// extended linearly past the last knot. Knots start at r = 0 with value 0.
struct AlphaTable {
  std::vector<double> r;
  std::vector<double> value;

  [[nodiscard]] double operator()(double dist) const;
  void validate() const;
};

enum class AlphaForm { quadratic, table };

struct CertificateCheck {
  struct Point {
    Vec x;
    Vec u;
    double residual = 0.0;
  };
  int points = 0;
  double min_residual = 0.0;
  Point worst;
  std::vector<Point> violations;  // first `max_listed` points below -tolerance
  int violation_count = 0;
  double min_storage = 0.0;
  double max_abs_storage = 0.0;
  bool passed = false;
};

/// Storage function S with strictness alpha(x) = alpha_bar |s - s_bar|^2,
/// where s = (x - mid) ./ half is the scaled state.
///
/// With input scaling set, the strictness is over z = (x, u) instead:
/// alpha_bar (|s - s_bar|^2 + |v - v_bar|^2), v = (u - input_mid) ./ input_half.
struct StorageCertificate {
  std::vector<std::string> state_names;
  Polynomial S_scaled;  // in s
  Vec mid;
  Vec half;
  double alpha_bar = 0.0;
  AlphaForm alpha_form = AlphaForm::quadratic;
  AlphaTable alpha_table;  // used when alpha_form == table
  Vec x_ref;
  Vec u_ref;
  Vec input_mid;  // empty: strictness in x only
  Vec input_half;
  int degree = 0;
  /// Certified lower and upper bounds of S on the state box (SOS bounds
  /// when synthesized, grid bounds otherwise).
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  CertificateCheck verification;

  [[nodiscard]] int n_x() const { return static_cast<int>(mid.size()); }
  [[nodiscard]] Vec scaled(const Vec& x) const;
  [[nodiscard]] double value(const Vec& x) const;
  [[nodiscard]] Vec gradient(const Vec& x) const;
  [[nodiscard]] bool input_strict() const { return input_half.size() > 0; }
  [[nodiscard]] double alpha(const Vec& x, const Vec& u) const;
  /// S in original coordinates.
  [[nodiscard]] Polynomial storage() const;
  void validate() const;
};

nlohmann::json to_json(const StorageCertificate& cert);
StorageCertificate certificate_from_json(const nlohmann::json& j);

/// The polynomial data of one synthesis.
struct SosProblem {
  enum class Mode { vertex, joint };
  struct GramBlock {
    int sdp_block = 0;
    std::vector<Exponent> basis;
    int multiplier = -1;  // -1 for sigma_0, otherwise the index of g_i = 1 - v_i^2
  };
  struct Piece {
    Vec vertex;                           // input vertex (vertex mode), empty in joint mode
    Polynomial supply;                    // w in the piece variables
    std::vector<Polynomial> flow_terms;   // grad(m_k) . f / half for every storage monomial m_k
    Polynomial distance;                  // |s - s_bar|^2
    std::vector<GramBlock> blocks;
    std::vector<Exponent> rows;           // monomial matched by each equality row
    int first_row = 0;
  };

  Mode mode = Mode::vertex;
  int n_x = 0;
  int n_u = 0;
  int storage_degree = 0;
  int multiplier_degree = 0;
  std::vector<Exponent> storage_basis;  // monomials of S (no constant term)
  std::vector<Piece> pieces;
  SdpProblem sdp;
  int lp_block = 0;  // diagonal block: alpha, then its slack; S coefficients are the free variables

  /// Max absolute coefficient mismatch between sigma_0 + sum sigma_i g_i and
  /// the constraint polynomial at the given SDP solution.
  [[nodiscard]] double coefficient_residual(const SdpSolution& sol) const;
  [[nodiscard]] double alpha_of(const SdpSolution& sol) const;
  [[nodiscard]] Polynomial storage_of(const SdpSolution& sol) const;
};

class NoCertificate : public Error {
 public:
  using Error::Error;
};

enum class AlphaMode { direct, bisection };

std::string to_string(AlphaMode m);

struct SynthesisOptions {
  int storage_degree = 2;
  int multiplier_degree = -1;  // -1: match the constraint degree, rounded up to even
  AlphaMode alpha_mode = AlphaMode::direct;
  double bisection_tolerance = 1e-3;
  SdpOptions sdp;
  /// Relative equality residual at which a stalled SDP solve still counts as
  /// a feasible point.
  double accept_residual = 1e-8;
  /// Strictness over z = (x, u); forces joint mode.
  bool input_strictness = false;
  /// Reduce the storage degree until the SDP fits under sdp.dense_cap.
  bool reduce_degree = true;
  int check_grid = 21;  // per-axis grid of the post-synthesis check
  int check_random = 1000;
  unsigned long long seed = 0;
  double check_tolerance = 1e-6;
};

struct SynthesisResult {
  StorageCertificate certificate;
  SosProblem problem;
  SdpSolution solution;
  int requested_degree = 0;
  std::vector<std::string> notes;
};

/// Builds the SOS program without solving it. Vertex mode is used when the
/// constraint polynomial is affine in each input (input-affine field, supply
/// affine in u) and the strictness is in x only; joint (x, u) mode otherwise.
SosProblem build_sos_problem(const PolynomialVectorField& vf, const Box& state_box, const Box& input_box,
                             const Polynomial& cost, const SteadyStatePair& z_star, int storage_degree,
                             int multiplier_degree, bool fixed_alpha = false, double alpha_value = 0.0,
                             bool input_strict = false);

/// Maximizes alpha_bar in [0, 1]. Throws NoCertificate when alpha_bar = 0 is infeasible.
SynthesisResult synthesize_certificate(const PolynomialVectorField& vf, const Box& state_box, const Box& input_box,
                                       const Polynomial& cost, const SteadyStatePair& z_star,
                                       const SynthesisOptions& opts = {});

struct CheckOptions {
  int grid = 21;        // points per state axis
  int random = 1000;    // interior (x, u) samples
  unsigned long long seed = 0;
  double tolerance = 1e-6;
  int max_listed = 20;
  bool vertices_only = false;  // skip the random interior samples
};

/// Pointwise check of w - alpha - grad S . f >= 0 on a grid of X at every U
/// vertex plus random interior samples, and of S >= -tolerance on the grid.
CertificateCheck check_certificate(const StorageCertificate& cert, const ControlSystem& sys, const SupplyRate& w,
                                   const CheckOptions& opts = {});

struct DissipationTrace {
  std::vector<double> times;
  std::vector<double> delta;
  [[nodiscard]] double max() const;
};

/// Delta(t) = S(x(t)) - S(x(0)) - integral_0^t (w - alpha) with the trapezoid rule.
DissipationTrace dissipation_residual(const Trajectory& traj, const StorageCertificate& cert, const SupplyRate& w);

/// Certified bounds of a polynomial on the scaled box [-1, 1]^n via a
/// Putinar program of the given degree. Returns {lower, upper}.
std::pair<double, double> sos_bounds(const Polynomial& p, int degree, const SdpOptions& opts = {},
                                     double accept_residual = 1e-8);

void export_sdp(const SosProblem& problem, const std::string& path);

}  // namespace ocpkit
