#pragma once

#include "ocpkit/types.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace ocpkit {

/// Exponent multi-index; entry i is the power of variable i.
using Exponent = std::vector<int>;

/// Sparse multivariate polynomial with real coefficients.
///
/// Terms are kept in an ordered map keyed by exponent, and no zero
/// coefficient is ever stored, so two polynomials with the same value
/// table compare equal term by term.
class Polynomial {
 public:
  using TermMap = std::map<Exponent, double>;

  Polynomial() = default;
  explicit Polynomial(std::vector<std::string> variables);
  explicit Polynomial(int nvars);

  static Polynomial constant(std::vector<std::string> variables, double c);
  static Polynomial variable(std::vector<std::string> variables, int index);

  [[nodiscard]] int nvars() const { return static_cast<int>(variables_.size()); }
  [[nodiscard]] const std::vector<std::string>& variables() const { return variables_; }
  [[nodiscard]] const TermMap& terms() const { return terms_; }
  [[nodiscard]] bool is_zero() const { return terms_.empty(); }
  [[nodiscard]] int degree() const;
  [[nodiscard]] int degree_in(int var) const;
  [[nodiscard]] double coefficient(const Exponent& e) const;

  /// Adds c to the coefficient of e, dropping the term if it cancels.
  void add_term(const Exponent& e, double c);

  [[nodiscard]] double evaluate(std::span<const double> point) const;
  [[nodiscard]] double evaluate(const Vec& point) const;

  [[nodiscard]] Polynomial derivative(int var) const;
  [[nodiscard]] Polynomial pow(int k) const;

  /// Substitutes x_i -> scale_i * x_i + shift_i for every variable.
  [[nodiscard]] Polynomial substitute_affine(const Vec& scale, const Vec& shift) const;

  /// Fixes the trailing values.size() variables to the given values and
  /// returns a polynomial in the remaining leading variables.
  [[nodiscard]] Polynomial bind_trailing(const Vec& values) const;

  /// Same polynomial viewed over a longer variable list (new variables appended).
  [[nodiscard]] Polynomial extend(const std::vector<std::string>& variables) const;

  /// Drops terms with |coefficient| <= tol.
  [[nodiscard]] Polynomial pruned(double tol) const;

  [[nodiscard]] std::string to_string() const;

  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(double s);

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator-(Polynomial a) { return a *= -1.0; }
  friend bool operator==(const Polynomial& a, const Polynomial& b) = default;

 private:
  void check_compatible(const Polynomial& other) const;

  std::vector<std::string> variables_;
  TermMap terms_;
};

/// All exponents in `nvars` variables with total degree <= `degree`, in
/// graded order (by total degree, then lexicographically descending).
std::vector<Exponent> monomials_up_to(int nvars, int degree);

/// Parses expressions such as "-2*x1^2 + 3.5*(x1 - u1)^2 + 1e-3" over the
/// given variable names. Supports + - * ^ (non-negative integer powers),
/// parentheses and decimal literals.
Polynomial parse_polynomial(const std::string& text, const std::vector<std::string>& variables);

}  // namespace ocpkit
