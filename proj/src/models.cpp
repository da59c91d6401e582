#include "ocpkit/models.hpp"

#include <cmath>

#include <fmt/format.h>

namespace ocpkit {

namespace {

double fd_step(double v) { return 1e-6 * (1.0 + std::abs(v)); }

}  // namespace

ControlSystem::ControlSystem(std::string label, int n_x, int n_u, DynamicsFn dynamics, Box state_box,
                             Box input_box, JacobianFn jacobian)
    : label_(std::move(label)),
      n_x_(n_x),
      n_u_(n_u),
      dynamics_(std::move(dynamics)),
      state_box_(std::move(state_box)),
      input_box_(std::move(input_box)),
      jacobian_(std::move(jacobian)) {
  if (n_x <= 0 || n_u < 0) throw InvalidArgument(fmt::format("invalid dimensions n_x={}, n_u={}", n_x, n_u));
  if (!dynamics_) throw InvalidArgument("control system without dynamics");
  require_size(state_box_.dim(), n_x, "state box");
  require_size(input_box_.dim(), n_u, "input box");
}

Vec ControlSystem::dynamics(const Vec& x, const Vec& u) const {
  Vec dx(n_x_);
  dynamics(x, u, dx);
  return dx;
}

void ControlSystem::dynamics(const Vec& x, const Vec& u, Vec& dx) const {
  require_size(x.size(), n_x_, "state");
  require_size(u.size(), n_u_, "input");
  dx.resize(n_x_);
  dynamics_(x, u, dx);
}

void ControlSystem::jacobian(const Vec& x, const Vec& u, Mat& jx, Mat& ju) const {
  jx.resize(n_x_, n_x_);
  ju.resize(n_x_, n_u_);
  if (jacobian_) {
    jacobian_(x, u, jx, ju);
    return;
  }
  Vec xp = x, up = u, fp(n_x_), fm(n_x_);
  for (int i = 0; i < n_x_; ++i) {
    const double h = fd_step(x[i]);
    xp[i] = x[i] + h;
    dynamics_(xp, u, fp);
    xp[i] = x[i] - h;
    dynamics_(xp, u, fm);
    xp[i] = x[i];
    jx.col(i) = (fp - fm) / (2 * h);
  }
  for (int j = 0; j < n_u_; ++j) {
    const double h = fd_step(u[j]);
    up[j] = u[j] + h;
    dynamics_(x, up, fp);
    up[j] = u[j] - h;
    dynamics_(x, up, fm);
    up[j] = u[j];
    ju.col(j) = (fp - fm) / (2 * h);
  }
}

void CostFunction::grad(const Vec& x, const Vec& u, Vec& gx, Vec& gu) const {
  gx.resize(x.size());
  gu.resize(u.size());
  if (gradient) {
    gradient(x, u, gx, gu);
    return;
  }
  Vec xp = x, up = u;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = fd_step(x[i]);
    xp[i] = x[i] + h;
    const double fp = stage_cost(xp, u);
    xp[i] = x[i] - h;
    const double fm = stage_cost(xp, u);
    xp[i] = x[i];
    gx[i] = (fp - fm) / (2 * h);
  }
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    const double h = fd_step(u[j]);
    up[j] = u[j] + h;
    const double fp = stage_cost(x, up);
    up[j] = u[j] - h;
    const double fm = stage_cost(x, up);
    up[j] = u[j];
    gu[j] = (fp - fm) / (2 * h);
  }
}

CostFunction polynomial_cost(std::string label, Polynomial p, int n_x) {
  const int nv = p.nvars();
  std::vector<Polynomial> partials;
  for (int i = 0; i < nv; ++i) partials.push_back(p.derivative(i));
  auto join = [nv, n_x](const Vec& x, const Vec& u) {
    Vec z(nv);
    z << x, u;
    (void)n_x;
    return z;
  };
  CostFunction c;
  c.label = std::move(label);
  c.stage_cost = [p, join](const Vec& x, const Vec& u) { return p.evaluate(join(x, u)); };
  c.gradient = [partials, join, n_x](const Vec& x, const Vec& u, Vec& gx, Vec& gu) {
    const Vec z = join(x, u);
    for (int i = 0; i < n_x; ++i) gx[i] = partials[i].evaluate(z);
    for (Eigen::Index j = 0; j < u.size(); ++j) gu[j] = partials[n_x + j].evaluate(z);
  };
  c.polynomial = std::move(p);
  return c;
}

double lipschitz_bound(const CostFunction& cost, const Box& state_box, const Box& input_box) {
  const int nx = state_box.dim(), nu = input_box.dim();
  const int nz = nx + nu;
  Vec lo(nz), hi(nz);
  lo << state_box.lower, input_box.lower;
  hi << state_box.upper, input_box.upper;
  if (cost.polynomial) {
    const Vec mag = lo.cwiseAbs().cwiseMax(hi.cwiseAbs());
    double sum_sq = 0.0;
    for (int i = 0; i < nz; ++i) {
      const Polynomial d = cost.polynomial->derivative(i);
      double bound = 0.0;
      for (const auto& [e, c] : d.terms()) {
        double t = std::abs(c);
        for (int k = 0; k < nz; ++k) t *= std::pow(mag[k], e[k]);
        bound += t;
      }
      sum_sq += bound * bound;
    }
    return std::sqrt(sum_sq);
  }
  // Sampled estimate: 9 points per axis.
  constexpr int kPts = 9;
  long total = 1;
  for (int i = 0; i < nz; ++i) total *= kPts;
  double best = 0.0;
  Vec z(nz), gx, gu;
  for (long idx = 0; idx < total; ++idx) {
    long r = idx;
    for (int i = 0; i < nz; ++i) {
      z[i] = lo[i] + (hi[i] - lo[i]) * static_cast<double>(r % kPts) / (kPts - 1);
      r /= kPts;
    }
    cost.grad(z.head(nx), z.tail(nu), gx, gu);
    best = std::max(best, std::sqrt(gx.squaredNorm() + gu.squaredNorm()));
  }
  return best;
}

PolynomialVectorField::PolynomialVectorField(int n_x, int n_u, std::vector<Polynomial> coords)
    : n_x_(n_x), n_u_(n_u), coords_(std::move(coords)), input_affine_(true) {
  require_size(static_cast<Eigen::Index>(coords_.size()), n_x, "polynomial vector field coordinates");
  for (const auto& p : coords_) {
    require_size(p.nvars(), n_x + n_u, "polynomial vector field variables");
    for (int j = 0; j < n_u; ++j) {
      if (p.degree_in(n_x + j) > 1) input_affine_ = false;
    }
  }
}

std::vector<int> PolynomialVectorField::degrees() const {
  std::vector<int> d;
  for (const auto& p : coords_) d.push_back(p.degree());
  return d;
}

Vec PolynomialVectorField::evaluate(const Vec& x, const Vec& u) const {
  Vec z(n_x_ + n_u_);
  z << x, u;
  Vec out(n_x_);
  for (int i = 0; i < n_x_; ++i) out[i] = coords_[i].evaluate(z);
  return out;
}

ControlSystem PolynomialVectorField::to_system(std::string label, Box state_box, Box input_box) const {
  const int nx = n_x_, nu = n_u_;
  std::vector<std::vector<Polynomial>> partials(nx);
  for (int i = 0; i < nx; ++i) {
    for (int k = 0; k < nx + nu; ++k) partials[i].push_back(coords_[i].derivative(k));
  }
  auto coords = coords_;
  DynamicsFn f = [coords, nx, nu](const Vec& x, const Vec& u, Vec& dx) {
    Vec z(nx + nu);
    z << x, u;
    for (int i = 0; i < nx; ++i) dx[i] = coords[i].evaluate(z);
  };
  JacobianFn jac = [partials, nx, nu](const Vec& x, const Vec& u, Mat& jx, Mat& ju) {
    Vec z(nx + nu);
    z << x, u;
    for (int i = 0; i < nx; ++i) {
      for (int k = 0; k < nx; ++k) jx(i, k) = partials[i][k].evaluate(z);
      for (int k = 0; k < nu; ++k) ju(i, k) = partials[i][nx + k].evaluate(z);
    }
  };
  return ControlSystem(std::move(label), nx, nu, std::move(f), std::move(state_box), std::move(input_box),
                       std::move(jac));
}

void ReactorParams::validate() const {
  if (!(k10 > 0 && k20 > 0 && k30 > 0)) {
    throw InvalidArgument(fmt::format("pre-exponential factors must be positive (k10={}, k20={}, k30={})", k10,
                                      k20, k30));
  }
  if (!(beta > 0)) throw InvalidArgument(fmt::format("beta must be positive, got {}", beta));
  if (!(theta0 > 0)) throw InvalidArgument(fmt::format("theta0 must be positive, got {}", theta0));
}

Box reactor_state_box() { return Box(Eigen::Vector3d(0, 0, 70), Eigen::Vector3d(6, 4, 150)); }

Box reactor_input_box() { return Box(Eigen::Vector2d(3, 0), Eigen::Vector2d(35, 200)); }

std::vector<std::string> reactor_variable_names() { return {"cA", "cB", "theta", "u1", "u2"}; }

std::array<double, 3> arrhenius_rates(const ReactorParams& p, double theta) {
  const double t = theta + p.theta0;
  return {p.k10 * std::exp(-p.E1 / t), p.k20 * std::exp(-p.E2 / t), p.k30 * std::exp(-p.E3 / t)};
}

ControlSystem reactor_system(const ReactorParams& params) {
  params.validate();
  const ReactorParams p = params;
  DynamicsFn f = [p](const Vec& x, const Vec& u, Vec& dx) {
    const double cA = x[0], cB = x[1], th = x[2];
    const auto [k1, k2, k3] = arrhenius_rates(p, th);
    const double rA = k1 * cA + k3 * cA * cA;
    const double rB = k1 * cA - k2 * cB;
    const double h = -p.delta * (k1 * cA * p.dHAB + k2 * cB * p.dHBC + k3 * cA * cA * p.dHAD);
    dx[0] = -rA + (p.c_in - cA) * u[0];
    dx[1] = rB - cB * u[0];
    dx[2] = h + p.alpha_heat * (u[1] - th) + (p.theta_in - th) * u[0];
  };
  JacobianFn jac = [p](const Vec& x, const Vec& u, Mat& jx, Mat& ju) {
    const double cA = x[0], cB = x[1], th = x[2];
    const auto [k1, k2, k3] = arrhenius_rates(p, th);
    const double t2 = (th + p.theta0) * (th + p.theta0);
    const double d1 = k1 * p.E1 / t2, d2 = k2 * p.E2 / t2, d3 = k3 * p.E3 / t2;
    jx(0, 0) = -k1 - 2 * k3 * cA - u[0];
    jx(0, 1) = 0.0;
    jx(0, 2) = -(d1 * cA + d3 * cA * cA);
    jx(1, 0) = k1;
    jx(1, 1) = -k2 - u[0];
    jx(1, 2) = d1 * cA - d2 * cB;
    jx(2, 0) = -p.delta * (k1 * p.dHAB + 2 * k3 * cA * p.dHAD);
    jx(2, 1) = -p.delta * k2 * p.dHBC;
    jx(2, 2) = -p.delta * (d1 * cA * p.dHAB + d2 * cB * p.dHBC + d3 * cA * cA * p.dHAD) - p.alpha_heat - u[0];
    ju(0, 0) = p.c_in - cA;
    ju(0, 1) = 0.0;
    ju(1, 0) = -cB;
    ju(1, 1) = 0.0;
    ju(2, 0) = p.theta_in - th;
    ju(2, 1) = p.alpha_heat;
  };
  return ControlSystem("reactor", 3, 2, std::move(f), reactor_state_box(), reactor_input_box(), std::move(jac));
}

CostFunction reactor_cost(const ReactorParams& params) {
  params.validate();
  const auto names = reactor_variable_names();
  Exponent e{0, 1, 0, 1, 0};
  Polynomial p(names);
  p.add_term(e, -params.beta);
  return polynomial_cost("production", std::move(p), 3);
}

double ArrheniusTaylor::evaluate(int rate, double theta) const {
  const auto& c = coeffs.at(static_cast<std::size_t>(rate));
  double v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * (theta - center) + *it;
  return v;
}

ArrheniusTaylor taylor_arrhenius(const ReactorParams& params, int order, double center) {
  params.validate();
  if (order < 0) throw InvalidArgument(fmt::format("Taylor order must be non-negative, got {}", order));
  const double t = center + params.theta0;
  if (!(t > 0)) throw InvalidArgument("Taylor center below absolute zero");
  ArrheniusTaylor out;
  out.center = center;
  const std::array<double, 3> k0{params.k10, params.k20, params.k30};
  const std::array<double, 3> E{params.E1, params.E2, params.E3};
  for (int r = 0; r < 3; ++r) {
    // k = k0 exp(g), g = -E / t. Derivatives of g: g^(m) = -E (-1)^m m! t^-(m+1).
    std::vector<double> g(order + 1, 0.0);
    double fact = 1.0;
    for (int m = 1; m <= order; ++m) {
      fact *= m;
      g[m] = -E[r] * (m % 2 == 0 ? 1.0 : -1.0) * fact / std::pow(t, m + 1);
    }
    // k^(n) = sum_{j<n} C(n-1, j) k^(j) g^(n-j).
    std::vector<double> kd(order + 1, 0.0);
    kd[0] = k0[r] * std::exp(-E[r] / t);
    for (int n = 1; n <= order; ++n) {
      double binom = 1.0;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) {
        acc += binom * kd[j] * g[n - j];
        binom = binom * (n - 1 - j) / (j + 1);
      }
      kd[n] = acc;
    }
    out.coeffs[r].resize(order + 1);
    double nfact = 1.0;
    for (int n = 0; n <= order; ++n) {
      if (n > 0) nfact *= n;
      out.coeffs[r][n] = kd[n] / nfact;
    }
  }
  return out;
}

PolynomialVectorField polynomialize_reactor(const ReactorParams& params, int order, double center) {
  const ArrheniusTaylor taylor = taylor_arrhenius(params, order, center);
  const auto names = reactor_variable_names();
  auto var = [&](int i) { return Polynomial::variable(names, i); };
  auto cst = [&](double c) { return Polynomial::constant(names, c); };
  const Polynomial cA = var(0), cB = var(1), th = var(2), u1 = var(3), u2 = var(4);
  const Polynomial dth = th - cst(center);
  std::array<Polynomial, 3> k;
  for (int r = 0; r < 3; ++r) {
    Polynomial acc(names);
    Polynomial power = cst(1.0);
    for (double c : taylor.coeffs[r]) {
      acc += power * c;
      power = power * dth;
    }
    k[r] = acc;
  }
  const Polynomial cA2 = cA * cA;
  const Polynomial rA = k[0] * cA + k[2] * cA2;
  const Polynomial rB = k[0] * cA - k[1] * cB;
  const Polynomial h = (k[0] * cA * params.dHAB + k[1] * cB * params.dHBC + k[2] * cA2 * params.dHAD) * (-params.delta);
  std::vector<Polynomial> coords;
  coords.push_back(-rA + (cst(params.c_in) - cA) * u1);
  coords.push_back(rB - cB * u1);
  coords.push_back(h + (u2 - th) * params.alpha_heat + (cst(params.theta_in) - th) * u1);
  return PolynomialVectorField(3, 2, std::move(coords));
}

}  // namespace ocpkit
