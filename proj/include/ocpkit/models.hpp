#pragma once

#include "ocpkit/polynomial.hpp"
#include "ocpkit/types.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ocpkit {

/// dx = f(x, u). `dx` is preallocated with the state dimension.
using DynamicsFn = std::function<void(const Vec& x, const Vec& u, Vec& dx)>;
/// Partial derivatives of f; `jx` is n_x x n_x and `ju` is n_x x n_u.
using JacobianFn = std::function<void(const Vec& x, const Vec& u, Mat& jx, Mat& ju)>;

/// A controlled vector field with compact state and input boxes.
///
/// Immutable after construction; evaluation has no side effects, so one
/// instance can be shared across threads.
class ControlSystem {
 public:
  ControlSystem(std::string label, int n_x, int n_u, DynamicsFn dynamics, Box state_box, Box input_box,
                JacobianFn jacobian = {});

  [[nodiscard]] const std::string& label() const { return label_; }
  [[nodiscard]] int n_x() const { return n_x_; }
  [[nodiscard]] int n_u() const { return n_u_; }
  [[nodiscard]] const Box& state_box() const { return state_box_; }
  [[nodiscard]] const Box& input_box() const { return input_box_; }
  [[nodiscard]] bool has_analytic_jacobian() const { return static_cast<bool>(jacobian_); }

  [[nodiscard]] Vec dynamics(const Vec& x, const Vec& u) const;
  void dynamics(const Vec& x, const Vec& u, Vec& dx) const;

  /// Analytic when provided, central differences otherwise.
  void jacobian(const Vec& x, const Vec& u, Mat& jx, Mat& ju) const;

 private:
  std::string label_;
  int n_x_;
  int n_u_;
  DynamicsFn dynamics_;
  Box state_box_;
  Box input_box_;
  JacobianFn jacobian_;
};

/// Stage cost F(x, u).
struct CostFunction {
  std::string label;
  std::function<double(const Vec& x, const Vec& u)> stage_cost;
  /// Optional analytic gradient; central differences are used when empty.
  std::function<void(const Vec& x, const Vec& u, Vec& gx, Vec& gu)> gradient;
  /// Polynomial form over (x_1..x_n, u_1..u_m) when the cost is polynomial.
  std::optional<Polynomial> polynomial;

  double operator()(const Vec& x, const Vec& u) const { return stage_cost(x, u); }
  void grad(const Vec& x, const Vec& u, Vec& gx, Vec& gu) const;
};

/// Builds a cost (with analytic gradient) from a polynomial in (x, u).
CostFunction polynomial_cost(std::string label, Polynomial p, int n_x);

/// Upper bound on the Lipschitz constant of F over the box X x U in the
/// Euclidean norm. Rigorous (termwise interval bound on each partial) for
/// polynomial costs; a sampled estimate over a 9^n grid otherwise.
double lipschitz_bound(const CostFunction& cost, const Box& state_box, const Box& input_box);

/// Vector field whose coordinates are polynomials in (x_1..x_n, u_1..u_m).
class PolynomialVectorField {
 public:
  PolynomialVectorField(int n_x, int n_u, std::vector<Polynomial> coords);

  [[nodiscard]] int n_x() const { return n_x_; }
  [[nodiscard]] int n_u() const { return n_u_; }
  [[nodiscard]] const std::vector<Polynomial>& coords() const { return coords_; }
  [[nodiscard]] std::vector<int> degrees() const;
  /// True iff every coordinate has degree <= 1 in each input component.
  [[nodiscard]] bool input_affine() const { return input_affine_; }

  [[nodiscard]] Vec evaluate(const Vec& x, const Vec& u) const;
  [[nodiscard]] ControlSystem to_system(std::string label, Box state_box, Box input_box) const;

 private:
  int n_x_;
  int n_u_;
  std::vector<Polynomial> coords_;
  bool input_affine_;
};

/// Van de Vusse CSTR parameters. Units: hours, mol/l, degrees Celsius.
///
/// Defaults are the standard benchmark values (Chen/Klatt/Engell). The
/// heat-balance coefficients are derived from rho = 0.9342 kg/l,
/// Cp = 3.01 kJ/(kg K), k_w = 4032 kJ/(h m^2 K), A_R = 0.215 m^2 and
/// V_R = 10 l: delta = 1/(rho Cp), alpha_heat = k_w A_R / (rho Cp V_R).
struct ReactorParams {
  double k10 = 1.287e12;  // 1/h
  double k20 = 1.287e12;  // 1/h
  double k30 = 9.043e9;   // l/(mol h)
  double E1 = 9758.3;     // K
  double E2 = 9758.3;     // K
  double E3 = 8560.0;     // K
  double dHAB = 4.2;      // kJ/mol
  double dHBC = -11.0;    // kJ/mol
  double dHAD = -41.85;   // kJ/mol
  double delta = 1.0 / (0.9342 * 3.01);
  double alpha_heat = 4032.0 * 0.215 / (0.9342 * 3.01 * 10.0);
  double c_in = 5.1;       // mol/l
  double theta_in = 104.9; // degC
  double theta0 = 273.15;  // K, Celsius-to-Kelvin offset (assumed)
  double beta = 1.0;

  /// Throws InvalidArgument if a pre-exponential factor, beta or theta0 is not positive.
  void validate() const;
};

Box reactor_state_box();
Box reactor_input_box();

/// Arrhenius rate k_i(theta) = k_i0 exp(-E_i / (theta + theta0)), i = 1..3.
std::array<double, 3> arrhenius_rates(const ReactorParams& p, double theta);

ControlSystem reactor_system(const ReactorParams& params);

/// Production cost F(x, u) = -beta * c_B * u_1.
CostFunction reactor_cost(const ReactorParams& params);

/// Taylor coefficients of each k_i about `center`: coeffs[i][n] multiplies (theta - center)^n.
struct ArrheniusTaylor {
  double center = 0.0;
  std::array<std::vector<double>, 3> coeffs;

  [[nodiscard]] double evaluate(int rate, double theta) const;
};

ArrheniusTaylor taylor_arrhenius(const ReactorParams& params, int order, double center);

/// Reactor dynamics with every k_i replaced by its Taylor polynomial.
PolynomialVectorField polynomialize_reactor(const ReactorParams& params, int order, double center);

/// Variable names used for reactor polynomials: cA, cB, theta, u1, u2.
std::vector<std::string> reactor_variable_names();

}  // namespace ocpkit
