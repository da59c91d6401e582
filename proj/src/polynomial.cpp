#include "ocpkit/polynomial.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

namespace ocpkit {

namespace {

std::vector<std::string> default_names(int n) {
  std::vector<std::string> names;
  for (int i = 0; i < n; ++i) names.push_back(fmt::format("v{}", i + 1));
  return names;
}

double int_pow(double base, int e) {
  double r = 1.0;
  for (int k = 0; k < e; ++k) r *= base;
  return r;
}

}  // namespace

Polynomial::Polynomial(std::vector<std::string> variables) : variables_(std::move(variables)) {}

Polynomial::Polynomial(int nvars) : variables_(default_names(nvars)) {}

Polynomial Polynomial::constant(std::vector<std::string> variables, double c) {
  Polynomial p(std::move(variables));
  p.add_term(Exponent(p.nvars(), 0), c);
  return p;
}

Polynomial Polynomial::variable(std::vector<std::string> variables, int index) {
  Polynomial p(std::move(variables));
  if (index < 0 || index >= p.nvars()) throw InvalidArgument(fmt::format("variable index {} out of range", index));
  Exponent e(p.nvars(), 0);
  e[index] = 1;
  p.add_term(e, 1.0);
  return p;
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [e, c] : terms_) {
    int s = 0;
    for (int k : e) s += k;
    d = std::max(d, s);
  }
  return d;
}

int Polynomial::degree_in(int var) const {
  int d = 0;
  for (const auto& [e, c] : terms_) d = std::max(d, e[var]);
  return d;
}

double Polynomial::coefficient(const Exponent& e) const {
  auto it = terms_.find(e);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const Exponent& e, double c) {
  if (static_cast<int>(e.size()) != nvars()) {
    throw DimensionMismatch(fmt::format("exponent of length {} for {} variables", e.size(), nvars()));
  }
  if (c == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(e, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

double Polynomial::evaluate(std::span<const double> point) const {
  if (static_cast<int>(point.size()) != nvars()) {
    throw DimensionMismatch(fmt::format("evaluating polynomial in {} variables at a point of size {}", nvars(),
                                        point.size()));
  }
  double sum = 0.0;
  for (const auto& [e, c] : terms_) {
    double term = c;
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (e[i] != 0) term *= int_pow(point[i], e[i]);
    }
    sum += term;
  }
  return sum;
}

double Polynomial::evaluate(const Vec& point) const {
  return evaluate(std::span<const double>(point.data(), static_cast<std::size_t>(point.size())));
}

Polynomial Polynomial::derivative(int var) const {
  Polynomial d(variables_);
  for (const auto& [e, c] : terms_) {
    if (e[var] == 0) continue;
    Exponent f = e;
    f[var] -= 1;
    d.add_term(f, c * e[var]);
  }
  return d;
}

Polynomial Polynomial::pow(int k) const {
  if (k < 0) throw InvalidArgument("negative polynomial power");
  Polynomial result = constant(variables_, 1.0);
  Polynomial base = *this;
  while (k > 0) {
    if (k & 1) result = result * base;
    k >>= 1;
    if (k > 0) base = base * base;
  }
  return result;
}

Polynomial Polynomial::substitute_affine(const Vec& scale, const Vec& shift) const {
  require_size(scale.size(), nvars(), "affine substitution scale");
  require_size(shift.size(), nvars(), "affine substitution shift");
  std::vector<Polynomial> images;
  for (int i = 0; i < nvars(); ++i) {
    images.push_back(variable(variables_, i) * scale[i] + constant(variables_, shift[i]));
  }
  Polynomial out(variables_);
  for (const auto& [e, c] : terms_) {
    Polynomial term = constant(variables_, c);
    for (int i = 0; i < nvars(); ++i) {
      if (e[i] > 0) term = term * images[i].pow(e[i]);
    }
    out += term;
  }
  return out;
}

Polynomial Polynomial::bind_trailing(const Vec& values) const {
  const int keep = nvars() - static_cast<int>(values.size());
  if (keep < 0) throw DimensionMismatch("binding more variables than the polynomial has");
  Polynomial out(std::vector<std::string>(variables_.begin(), variables_.begin() + keep));
  for (const auto& [e, c] : terms_) {
    double factor = c;
    for (int i = keep; i < nvars(); ++i) factor *= int_pow(values[i - keep], e[i]);
    out.add_term(Exponent(e.begin(), e.begin() + keep), factor);
  }
  return out;
}

Polynomial Polynomial::extend(const std::vector<std::string>& variables) const {
  if (variables.size() < variables_.size() ||
      !std::equal(variables_.begin(), variables_.end(), variables.begin())) {
    throw InvalidArgument("extended variable list must start with the current variables");
  }
  Polynomial out(variables);
  for (const auto& [e, c] : terms_) {
    Exponent f = e;
    f.resize(variables.size(), 0);
    out.add_term(f, c);
  }
  return out;
}

Polynomial Polynomial::pruned(double tol) const {
  Polynomial out(variables_);
  for (const auto& [e, c] : terms_) {
    if (std::abs(c) > tol) out.add_term(e, c);
  }
  return out;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::string s;
  bool first = true;
  // Highest degree first reads more naturally.
  for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
    const auto& [e, c] = *it;
    std::string mono;
    for (int i = 0; i < nvars(); ++i) {
      if (e[i] == 0) continue;
      if (!mono.empty()) mono += "*";
      mono += variables_[i];
      if (e[i] > 1) mono += fmt::format("^{}", e[i]);
    }
    const double mag = std::abs(c);
    std::string coef = fmt::format("{:.17g}", mag);
    if (!first) s += c < 0 ? " - " : " + ";
    else if (c < 0) s += "-";
    if (mono.empty()) s += coef;
    else if (mag == 1.0) s += mono;
    else s += coef + "*" + mono;
    first = false;
  }
  return s;
}

void Polynomial::check_compatible(const Polynomial& other) const {
  if (other.nvars() != nvars()) {
    throw DimensionMismatch(fmt::format("polynomials over {} and {} variables", nvars(), other.nvars()));
  }
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  check_compatible(other);
  for (const auto& [e, c] : other.terms_) add_term(e, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  check_compatible(other);
  for (const auto& [e, c] : other.terms_) add_term(e, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [e, c] : terms_) c *= s;
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  a.check_compatible(b);
  Polynomial out(a.variables_);
  Exponent e(a.nvars());
  for (const auto& [ea, ca] : a.terms_) {
    for (const auto& [eb, cb] : b.terms_) {
      for (int i = 0; i < a.nvars(); ++i) e[i] = ea[i] + eb[i];
      out.add_term(e, ca * cb);
    }
  }
  return out;
}

std::vector<Exponent> monomials_up_to(int nvars, int degree) {
  std::vector<Exponent> out;
  Exponent e(nvars, 0);
  // Enumerate by total degree; within a degree, recursive lexicographic descent.
  for (int d = 0; d <= degree; ++d) {
    auto rec = [&](auto&& self, int var, int remaining) -> void {
      if (var == nvars - 1) {
        e[var] = remaining;
        out.push_back(e);
        return;
      }
      for (int k = remaining; k >= 0; --k) {
        e[var] = k;
        self(self, var + 1, remaining - k);
      }
    };
    if (nvars == 0) {
      if (d == 0) out.push_back(e);
      continue;
    }
    rec(rec, 0, d);
  }
  return out;
}

namespace {

class Parser {
 public:
  Parser(const std::string& text, const std::vector<std::string>& vars) : s_(text), vars_(vars) {}

  Polynomial parse() {
    Polynomial p = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw InvalidArgument(fmt::format("polynomial '{}': {} at offset {}", s_, msg, pos_));
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Polynomial expr() {
    Polynomial acc(vars_);
    bool negate = false;
    if (accept('-')) negate = true;
    else accept('+');
    Polynomial t = term();
    acc += negate ? -t : t;
    while (true) {
      if (accept('+')) acc += term();
      else if (accept('-')) acc -= term();
      else break;
    }
    return acc;
  }

  Polynomial term() {
    Polynomial p = power();
    while (accept('*')) p = p * power();
    return p;
  }

  Polynomial power() {
    Polynomial base = atom();
    if (accept('^')) {
      skip_ws();
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (start == pos_) fail("expected integer exponent");
      base = base.pow(std::stoi(s_.substr(start, pos_ - start)));
    }
    return base;
  }

  Polynomial atom() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    if (accept('(')) {
      Polynomial p = expr();
      if (!accept(')')) fail("expected ')'");
      return p;
    }
    if (accept('-')) return -power();
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      return Polynomial::constant(vars_, v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      auto it = std::find(vars_.begin(), vars_.end(), name);
      if (it == vars_.end()) fail(fmt::format("unknown variable '{}'", name));
      return Polynomial::variable(vars_, static_cast<int>(it - vars_.begin()));
    }
    fail(fmt::format("unexpected character '{}'", c));
  }

  const std::string& s_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;
};

}  // namespace

Polynomial parse_polynomial(const std::string& text, const std::vector<std::string>& variables) {
  return Parser(text, variables).parse();
}

}  // namespace ocpkit
