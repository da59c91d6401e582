#include "ocpkit/dissipativity.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <tuple>

namespace ocpkit {

SupplyRate supply_rate(const CostFunction& cost, const SteadyStatePair& z_bar) {
  SupplyRate w;
  w.cost = cost;
  w.reference = z_bar;
  w.offset = cost(z_bar.x_bar, z_bar.u_bar);
  return w;
}

void AlphaTable::validate() const {
  if (r.size() < 2 || r.size() != value.size()) throw InvalidArgument("alpha table needs at least two knots");
  if (r.front() != 0.0 || value.front() != 0.0) throw InvalidArgument("alpha table must start at (0, 0)");
  for (std::size_t i = 1; i < r.size(); ++i) {
    if (!(r[i] > r[i - 1]) || !(value[i] > value[i - 1])) throw InvalidArgument("alpha table must be increasing");
  }
}

double AlphaTable::operator()(double dist) const {
  std::size_t i = 1;
  while (i + 1 < r.size() && dist > r[i]) ++i;
  const double slope = (value[i] - value[i - 1]) / (r[i] - r[i - 1]);
  return value[i - 1] + slope * (dist - r[i - 1]);
}

Vec StorageCertificate::scaled(const Vec& x) const { return (x - mid).cwiseQuotient(half); }

double StorageCertificate::value(const Vec& x) const { return S_scaled.evaluate(scaled(x)); }

Vec StorageCertificate::gradient(const Vec& x) const {
  const Vec s = scaled(x);
  Vec g(n_x());
  for (int i = 0; i < n_x(); ++i) g[i] = S_scaled.derivative(i).evaluate(s) / half[i];
  return g;
}

double StorageCertificate::alpha(const Vec& x, const Vec& u) const {
  double d2 = (scaled(x) - scaled(x_ref)).squaredNorm();
  if (input_strict()) d2 += (u - u_ref).cwiseQuotient(input_half).squaredNorm();
  if (alpha_form == AlphaForm::table) return alpha_table(std::sqrt(d2));
  return alpha_bar * d2;
}

Polynomial StorageCertificate::storage() const {
  Polynomial p = S_scaled.substitute_affine(half.cwiseInverse(), -mid.cwiseQuotient(half));
  Polynomial out(state_names);
  for (const auto& [e, c] : p.terms()) out.add_term(e, c);
  return out;
}

void StorageCertificate::validate() const {
  const auto n = static_cast<Eigen::Index>(state_names.size());
  require_size(mid.size(), n, "certificate scaling center");
  require_size(half.size(), n, "certificate scaling width");
  require_size(x_ref.size(), n, "certificate reference state");
  if (S_scaled.nvars() != n) throw DimensionMismatch("certificate storage has the wrong number of variables");
  if ((half.array() <= 0).any()) throw InvalidArgument("certificate scaling widths must be positive");
  if (!(alpha_bar >= 0 && alpha_bar <= 1)) throw InvalidArgument("alpha_bar must lie in [0, 1]");
  if (input_strict()) {
    require_size(input_mid.size(), u_ref.size(), "certificate input scaling center");
    require_size(input_half.size(), u_ref.size(), "certificate input scaling width");
    if ((input_half.array() <= 0).any()) throw InvalidArgument("certificate input scaling widths must be positive");
  }
  if (alpha_form == AlphaForm::table) alpha_table.validate();
}

namespace {

nlohmann::json terms_json(const Polynomial& p) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [e, c] : p.terms()) arr.push_back({{"exponent", e}, {"coefficient", c}});
  return arr;
}

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json check_json(const CertificateCheck& c) {
  nlohmann::json viol = nlohmann::json::array();
  for (const auto& p : c.violations) viol.push_back({{"x", vec_json(p.x)}, {"u", vec_json(p.u)}, {"residual", p.residual}});
  return {{"points", c.points},
          {"min_residual", c.min_residual},
          {"worst", {{"x", vec_json(c.worst.x)}, {"u", vec_json(c.worst.u)}}},
          {"violation_count", c.violation_count},
          {"violations", viol},
          {"min_storage", c.min_storage},
          {"max_abs_storage", c.max_abs_storage},
          {"passed", c.passed}};
}

}  // namespace

nlohmann::json to_json(const StorageCertificate& cert) {
  nlohmann::json j;
  j["state_names"] = cert.state_names;
  j["scaling"] = {{"mid", vec_json(cert.mid)}, {"half_width", vec_json(cert.half)}};
  j["degree"] = cert.degree;
  j["alpha_bar"] = cert.alpha_bar;
  j["alpha_form"] = cert.alpha_form == AlphaForm::quadratic ? "quadratic" : "table";
  if (cert.alpha_form == AlphaForm::table) j["alpha_table"] = {{"r", cert.alpha_table.r}, {"value", cert.alpha_table.value}};
  j["reference"] = {{"x", vec_json(cert.x_ref)}, {"u", vec_json(cert.u_ref)}};
  j["strictness"] = cert.input_strict() ? "input_state" : "state";
  if (cert.input_strict()) j["input_scaling"] = {{"mid", vec_json(cert.input_mid)}, {"half_width", vec_json(cert.input_half)}};
  j["storage_scaled"] = terms_json(cert.S_scaled);
  j["storage"] = terms_json(cert.storage());
  j["bounds"] = {{"lower", cert.lower_bound}, {"upper", cert.upper_bound}};
  j["verification"] = check_json(cert.verification);
  return j;
}

StorageCertificate certificate_from_json(const nlohmann::json& j) {
  StorageCertificate cert;
  try {
    cert.state_names = j.at("state_names").get<std::vector<std::string>>();
    cert.mid = json_vec(j.at("scaling").at("mid"));
    cert.half = json_vec(j.at("scaling").at("half_width"));
    cert.degree = j.value("degree", 0);
    cert.alpha_bar = j.at("alpha_bar").get<double>();
    const std::string form = j.value("alpha_form", "quadratic");
    if (form == "table") {
      cert.alpha_form = AlphaForm::table;
      cert.alpha_table.r = j.at("alpha_table").at("r").get<std::vector<double>>();
      cert.alpha_table.value = j.at("alpha_table").at("value").get<std::vector<double>>();
    } else if (form != "quadratic") {
      throw InvalidArgument("unknown alpha_form '" + form + "'");
    }
    cert.x_ref = json_vec(j.at("reference").at("x"));
    cert.u_ref = j.at("reference").contains("u") ? json_vec(j.at("reference").at("u")) : Vec();
    const std::string strictness = j.value("strictness", "state");
    if (strictness == "input_state") {
      cert.input_mid = json_vec(j.at("input_scaling").at("mid"));
      cert.input_half = json_vec(j.at("input_scaling").at("half_width"));
    } else if (strictness != "state") {
      throw InvalidArgument("unknown strictness '" + strictness + "'");
    }
    cert.S_scaled = Polynomial(static_cast<int>(cert.state_names.size()));
    for (const auto& t : j.at("storage_scaled")) {
      cert.S_scaled.add_term(t.at("exponent").get<Exponent>(), t.at("coefficient").get<double>());
    }
    if (j.contains("bounds")) {
      cert.lower_bound = j["bounds"].value("lower", 0.0);
      cert.upper_bound = j["bounds"].value("upper", 0.0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed certificate: ") + e.what());
  }
  cert.validate();
  return cert;
}

std::string to_string(AlphaMode m) { return m == AlphaMode::direct ? "direct" : "bisection"; }

namespace {

std::vector<std::string> names(const std::string& prefix, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(fmt::format("{}{}", prefix, i + 1));
  return out;
}

Polynomial renamed(const Polynomial& p, const std::vector<std::string>& vars) {
  Polynomial out(vars);
  for (const auto& [e, c] : p.terms()) out.add_term(e, c);
  return out;
}

Polynomial monomial(const std::vector<std::string>& vars, const Exponent& e) {
  Polynomial p(vars);
  p.add_term(e, 1.0);
  return p;
}

Exponent add(const Exponent& a, const Exponent& b) {
  Exponent c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
  return c;
}

struct Builder {
  SdpProblem sdp;
  int add_block(int size) {
    sdp.blocks.push_back(size);
    return static_cast<int>(sdp.blocks.size()) - 1;
  }
  int add_row(double rhs) {
    sdp.c.conservativeResize(sdp.c.size() + 1);
    sdp.c[sdp.c.size() - 1] = rhs;
    return static_cast<int>(sdp.c.size());  // matrix index, F_1 is row 0
  }
  void entry(int matrix, int block, int r, int c, double v) {
    if (v == 0.0) return;
    sdp.entries.push_back({matrix, block, std::min(r, c), std::max(r, c), v});
  }
  int add_free(double objective) {
    sdp.free_obj.conservativeResize(sdp.free_obj.size() + 1);
    sdp.free_obj[sdp.free_obj.size() - 1] = objective;
    return static_cast<int>(sdp.free_obj.size()) - 1;
  }
  void free_entry(int matrix, int j, double v) {
    if (v != 0.0) free_terms.push_back({matrix, j, v});
  }
  SdpProblem finish() {
    sdp.normalize();
    sdp.free_B = Mat::Zero(sdp.m(), sdp.n_free());
    for (const auto& [i, j, v] : free_terms) sdp.free_B(i - 1, j) += v;
    return std::move(sdp);
  }
  std::vector<std::tuple<int, int, double>> free_terms;
};

// Gram block contributions to the rows of `row_of` (matrix indices).
void add_gram(Builder& B, const SosProblem::GramBlock& g, const std::map<Exponent, int>& row_of) {
  const auto& basis = g.basis;
  for (std::size_t a = 0; a < basis.size(); ++a) {
    for (std::size_t b = a; b < basis.size(); ++b) {
      const Exponent m = add(basis[a], basis[b]);
      B.entry(row_of.at(m), g.sdp_block, static_cast<int>(a), static_cast<int>(b), 1.0);
      if (g.multiplier >= 0) {
        Exponent m2 = m;
        m2[g.multiplier] += 2;
        B.entry(row_of.at(m2), g.sdp_block, static_cast<int>(a), static_cast<int>(b), -1.0);
      }
    }
  }
}

int even_up(int d) { return d + (d % 2); }

// Gram block layout for a Putinar certificate of degree `deg` over `nv` box variables.
std::vector<SosProblem::GramBlock> putinar_blocks(Builder& B, int nv, int deg, int mult_deg) {
  std::vector<SosProblem::GramBlock> blocks;
  SosProblem::GramBlock s0;
  s0.basis = monomials_up_to(nv, deg / 2);
  s0.sdp_block = B.add_block(static_cast<int>(s0.basis.size()));
  blocks.push_back(s0);
  for (int i = 0; i < nv; ++i) {
    SosProblem::GramBlock gi;
    gi.basis = monomials_up_to(nv, mult_deg / 2);
    gi.multiplier = i;
    gi.sdp_block = B.add_block(static_cast<int>(gi.basis.size()));
    blocks.push_back(gi);
  }
  return blocks;
}

// Sum of the Gram polynomials sigma_0 + sum sigma_i g_i at a solution.
Polynomial gram_sum(const std::vector<SosProblem::GramBlock>& blocks, const SdpSolution& sol,
                    const std::vector<std::string>& vars) {
  Polynomial out(vars);
  for (const auto& g : blocks) {
    const Mat& Q = sol.Y[g.sdp_block];
    Polynomial sigma(vars);
    for (std::size_t a = 0; a < g.basis.size(); ++a) {
      for (std::size_t b = 0; b < g.basis.size(); ++b) sigma.add_term(add(g.basis[a], g.basis[b]), Q(a, b));
    }
    if (g.multiplier >= 0) {
      Polynomial gi = Polynomial::constant(vars, 1.0);
      Exponent e(vars.size(), 0);
      e[g.multiplier] = 2;
      gi.add_term(e, -1.0);
      sigma = sigma * gi;
    }
    out += sigma;
  }
  return out;
}

}  // namespace

SosProblem build_sos_problem(const PolynomialVectorField& vf, const Box& state_box, const Box& input_box,
                             const Polynomial& cost, const SteadyStatePair& z_star, int storage_degree,
                             int multiplier_degree, bool fixed_alpha, double alpha_value, bool input_strict) {
  const int nx = vf.n_x(), nu = vf.n_u();
  require_size(state_box.dim(), nx, "state box");
  require_size(input_box.dim(), nu, "input box");
  require_size(cost.nvars(), nx + nu, "cost polynomial variables");
  require_size(z_star.x_bar.size(), nx, "reference state");
  require_size(z_star.u_bar.size(), nu, "reference input");
  if (storage_degree < 0) throw InvalidArgument("storage degree must be non-negative");

  SosProblem P;
  P.n_x = nx;
  P.n_u = nu;
  P.storage_degree = storage_degree;
  bool affine = vf.input_affine();
  for (int j = 0; j < nu; ++j) affine = affine && cost.degree_in(nx + j) <= 1;
  P.mode = affine && !input_strict ? SosProblem::Mode::vertex : SosProblem::Mode::joint;

  const Vec hx = state_box.scale(), hu = input_box.scale();
  Vec scale(nx + nu), shift(nx + nu);
  scale << hx, hu;
  shift << state_box.mid(), input_box.mid();
  const auto xu_names = names("s", nx + nu);
  const Polynomial w_all = renamed(cost.substitute_affine(scale, shift), xu_names) -
                           Polynomial::constant(xu_names, z_star.cost_value);
  std::vector<Polynomial> f_all;
  for (int i = 0; i < nx; ++i) {
    Polynomial fi = vf.coords()[i];
    fi = renamed(fi, xu_names).substitute_affine(scale, shift) * (1.0 / hx[i]);
    f_all.push_back(fi);
  }
  Vec s_bar(nx + nu);
  s_bar << (z_star.x_bar - state_box.mid()).cwiseQuotient(hx), (z_star.u_bar - input_box.mid()).cwiseQuotient(hu);

  std::vector<Exponent> sbasis = monomials_up_to(nx, storage_degree);
  sbasis.erase(sbasis.begin());  // no constant term
  P.storage_basis = sbasis;

  const int nv = P.mode == SosProblem::Mode::vertex ? nx : nx + nu;
  const auto vars = names("s", nv);
  std::vector<Vec> vertices;
  if (P.mode == SosProblem::Mode::vertex) {
    for (const Vec& u : input_box.vertices()) vertices.push_back(input_box.to_unit(u));
  } else {
    vertices.emplace_back();
  }

  for (const Vec& v : vertices) {
    SosProblem::Piece piece;
    piece.vertex = P.mode == SosProblem::Mode::vertex ? input_box.from_unit(v) : Vec();
    auto restrict = [&](const Polynomial& p) {
      return P.mode == SosProblem::Mode::vertex ? renamed(p.bind_trailing(v), vars) : p;
    };
    piece.supply = restrict(w_all);
    std::vector<Polynomial> f;
    for (const auto& fi : f_all) f.push_back(restrict(fi));
    for (const auto& m : sbasis) {
      Exponent e(nv, 0);
      std::copy(m.begin(), m.end(), e.begin());
      const Polynomial mono = monomial(vars, e);
      Polynomial g(vars);
      for (int i = 0; i < nx; ++i) g += mono.derivative(i) * f[i];
      piece.flow_terms.push_back(g);
    }
    Polynomial dist(vars);
    for (int i = 0; i < (input_strict ? nv : nx); ++i) {
      const Polynomial d = Polynomial::variable(vars, i) - Polynomial::constant(vars, s_bar[i]);
      dist += d * d;
    }
    piece.distance = dist;
    P.pieces.push_back(std::move(piece));
  }

  int D = 2;
  for (const auto& piece : P.pieces) {
    D = std::max(D, piece.supply.degree());
    for (const auto& g : piece.flow_terms) D = std::max(D, g.degree());
  }
  D = even_up(D);
  const int md = multiplier_degree >= 0 ? even_up(multiplier_degree) : D - 2;
  const int Dtot = std::max(D, md + 2);
  P.multiplier_degree = md;

  Builder B;
  const int nlp = fixed_alpha ? 1 : 2;
  for (auto& piece : P.pieces) {
    piece.blocks = putinar_blocks(B, nv, Dtot, md);
    piece.rows = monomials_up_to(nv, Dtot);
  }
  P.lp_block = B.add_block(-nlp);
  for (std::size_t k = 0; k < sbasis.size(); ++k) B.add_free(0.0);
  for (auto& piece : P.pieces) {
    std::map<Exponent, int> row_of;
    piece.first_row = static_cast<int>(B.sdp.c.size());
    for (const auto& e : piece.rows) row_of[e] = B.add_row(piece.supply.coefficient(e));
    for (const auto& g : piece.blocks) add_gram(B, g, row_of);
    for (const auto& [e, c] : piece.distance.terms()) B.entry(row_of.at(e), P.lp_block, 0, 0, c);
    for (std::size_t k = 0; k < sbasis.size(); ++k) {
      for (const auto& [e, c] : piece.flow_terms[k].terms()) B.free_entry(row_of.at(e), static_cast<int>(k), c);
    }
  }
  if (fixed_alpha) {
    const int r = B.add_row(alpha_value);
    B.entry(r, P.lp_block, 0, 0, 1.0);
  } else {
    const int r = B.add_row(1.0);  // alpha + slack = 1
    B.entry(r, P.lp_block, 0, 0, 1.0);
    B.entry(r, P.lp_block, 1, 1, 1.0);
    B.entry(0, P.lp_block, 0, 0, 1.0);  // maximize alpha
  }
  P.sdp = B.finish();
  return P;
}

double SosProblem::alpha_of(const SdpSolution& sol) const { return sol.Y[lp_block](0, 0); }

Polynomial SosProblem::storage_of(const SdpSolution& sol) const {
  Polynomial S(n_x);
  for (std::size_t k = 0; k < storage_basis.size(); ++k) S.add_term(storage_basis[k], sol.free[static_cast<int>(k)]);
  return S;
}

double SosProblem::coefficient_residual(const SdpSolution& sol) const {
  const double a = alpha_of(sol);
  const Polynomial S = storage_of(sol);
  double worst = 0.0;
  for (const auto& piece : pieces) {
    const auto& vars = piece.supply.variables();
    Polynomial target = piece.supply - a * piece.distance;
    for (std::size_t k = 0; k < storage_basis.size(); ++k) {
      target -= S.coefficient(storage_basis[k]) * piece.flow_terms[k];
    }
    const Polynomial diff = gram_sum(piece.blocks, sol, vars) - target;
    for (const auto& [e, c] : diff.terms()) worst = std::max(worst, std::abs(c));
  }
  return worst;
}

std::pair<double, double> sos_bounds(const Polynomial& p, int degree, const SdpOptions& opts, double accept_residual) {
  if (p.degree() == 0) {
    const double c = p.coefficient(Exponent(p.nvars(), 0));
    return {c, c};
  }
  const int nv = p.nvars();
  const int D = even_up(std::max(degree, p.degree()));
  const auto vars = p.variables();
  auto lower = [&](const Polynomial& q) {
    Builder B;
    const auto blocks = putinar_blocks(B, nv, D, D - 2);
    const int gamma = B.add_free(1.0);
    std::map<Exponent, int> row_of;
    for (const auto& e : monomials_up_to(nv, D)) row_of[e] = B.add_row(q.coefficient(e));
    for (const auto& g : blocks) add_gram(B, g, row_of);
    B.free_entry(row_of.at(Exponent(nv, 0)), gamma, 1.0);
    const SdpProblem sdp = B.finish();
    const SdpSolution sol = solve_sdp(sdp, opts);
    if (!has_feasible_point(sol, accept_residual)) {
      throw NoCertificate("polynomial bound program ended with status " + to_string(sol.status));
    }
    // Coefficient mismatch r shifts the bound by at most |r|_1 on the unit box.
    const double r2 = sol.dual_infeasibility * (1 + sdp.c.norm());
    return sol.free[gamma] - std::sqrt(static_cast<double>(sdp.m())) * r2;
  };
  return {lower(p), -lower(-p)};
}

SynthesisResult synthesize_certificate(const PolynomialVectorField& vf, const Box& state_box, const Box& input_box,
                                       const Polynomial& cost, const SteadyStatePair& z_star,
                                       const SynthesisOptions& opts) {
  SynthesisResult res;
  res.requested_degree = opts.storage_degree;
  int degree = opts.storage_degree;
  SosProblem P;
  for (;; --degree) {
    P = build_sos_problem(vf, state_box, input_box, cost, z_star, degree, opts.multiplier_degree, false, 0.0,
                          opts.input_strictness);
    if (P.sdp.psd_dimension() <= opts.sdp.dense_cap) break;
    const std::string note =
        fmt::format("storage degree {} needs PSD dimension {} > cap {}", degree, P.sdp.psd_dimension(), opts.sdp.dense_cap);
    if (!opts.reduce_degree || degree == 0) throw InvalidArgument(note);
    res.notes.push_back(note + "; reducing degree");
  }

  bool have = false;
  if (opts.alpha_mode == AlphaMode::direct) {
    res.solution = solve_sdp(P.sdp, opts.sdp);
    if (res.solution.status == SdpStatus::dual_infeasible) {
      throw NoCertificate(fmt::format("no certificate at storage degree {}", degree));
    }
    have = has_feasible_point(res.solution, opts.accept_residual);
    if (!have) {
      res.notes.push_back("direct solve ended with status " + to_string(res.solution.status) + "; bisecting");
    } else if (res.solution.status != SdpStatus::optimal) {
      res.notes.push_back(fmt::format("direct solve stalled at relative gap {:.1e}; using its feasible point",
                                      std::abs(res.solution.gap()) / (1 + std::abs(res.solution.dual_objective))));
    }
  }
  if (!have) {
    auto feasible = [&](double a, SosProblem& out, SdpSolution& sol) {
      out = build_sos_problem(vf, state_box, input_box, cost, z_star, degree, opts.multiplier_degree, true, a,
                              opts.input_strictness);
      sol = solve_sdp(out.sdp, opts.sdp);
      return has_feasible_point(sol, opts.accept_residual);
    };
    SosProblem Pt;
    SdpSolution st;
    if (!feasible(0.0, Pt, st)) throw NoCertificate(fmt::format("no certificate at storage degree {}", degree));
    P = Pt;
    res.solution = st;
    double lo = 0.0, hi = 1.0;
    if (feasible(1.0, Pt, st)) {
      lo = 1.0;
      P = Pt;
      res.solution = st;
    }
    while (hi - lo > opts.bisection_tolerance && lo < 1.0) {
      const double mid = 0.5 * (lo + hi);
      if (feasible(mid, Pt, st)) {
        lo = mid;
        P = Pt;
        res.solution = st;
      } else {
        hi = mid;
      }
    }
  }

  StorageCertificate& cert = res.certificate;
  for (int i = 0; i < vf.n_x(); ++i) cert.state_names.push_back(cost.variables()[i]);
  cert.mid = state_box.mid();
  cert.half = state_box.scale();
  cert.alpha_bar = std::clamp(P.alpha_of(res.solution), 0.0, 1.0);
  cert.x_ref = z_star.x_bar;
  cert.u_ref = z_star.u_bar;
  if (opts.input_strictness) {
    cert.input_mid = input_box.mid();
    cert.input_half = input_box.scale();
  }
  cert.degree = degree;
  Polynomial S = renamed(P.storage_of(res.solution), names("s", vf.n_x()));
  const auto [lo, hi] = sos_bounds(S, std::max(2, degree), opts.sdp, opts.accept_residual);
  S -= Polynomial::constant(S.variables(), lo);  // shift to a non-negative storage
  cert.S_scaled = S;
  cert.lower_bound = 0.0;
  cert.upper_bound = hi - lo;
  res.problem = std::move(P);

  CheckOptions co;
  co.grid = opts.check_grid;
  co.random = opts.check_random;
  co.seed = opts.seed;
  co.tolerance = opts.check_tolerance;
  const SupplyRate w{polynomial_cost("cost", cost, vf.n_x()), z_star, z_star.cost_value};
  cert.verification = check_certificate(cert, vf.to_system("model", state_box, input_box), w, co);
  return res;
}

CertificateCheck check_certificate(const StorageCertificate& cert, const ControlSystem& sys, const SupplyRate& w,
                                   const CheckOptions& opts) {
  cert.validate();
  const int nx = sys.n_x();
  require_size(cert.n_x(), nx, "certificate state dimension");
  if (opts.grid < 2) throw InvalidArgument("check grid needs at least two points per axis");
  CertificateCheck out;
  out.min_residual = std::numeric_limits<double>::infinity();
  out.min_storage = std::numeric_limits<double>::infinity();
  auto record = [&](const Vec& x, const Vec& u) {
    const double L = w(x, u) - cert.alpha(x, u) - cert.gradient(x).dot(sys.dynamics(x, u));
    ++out.points;
    if (L < out.min_residual) {
      out.min_residual = L;
      out.worst = {x, u, L};
    }
    if (L < -opts.tolerance) {
      ++out.violation_count;
      if (static_cast<int>(out.violations.size()) < opts.max_listed) out.violations.push_back({x, u, L});
    }
  };

  const Box& X = sys.state_box();
  const auto U_vertices = sys.input_box().vertices();
  std::vector<int> idx(nx, 0);
  for (;;) {
    Vec x(nx);
    for (int i = 0; i < nx; ++i) x[i] = X.lower[i] + (X.upper[i] - X.lower[i]) * idx[i] / (opts.grid - 1);
    const double S = cert.value(x);
    out.min_storage = std::min(out.min_storage, S);
    out.max_abs_storage = std::max(out.max_abs_storage, std::abs(S));
    for (const Vec& u : U_vertices) record(x, u);
    int k = 0;
    while (k < nx && ++idx[k] == opts.grid) idx[k++] = 0;
    if (k == nx) break;
  }
  if (!opts.vertices_only) {
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Box& U = sys.input_box();
    for (int r = 0; r < opts.random; ++r) {
      Vec x(nx), u(sys.n_u());
      for (int i = 0; i < nx; ++i) x[i] = X.lower[i] + (X.upper[i] - X.lower[i]) * unit(rng);
      for (int i = 0; i < sys.n_u(); ++i) u[i] = U.lower[i] + (U.upper[i] - U.lower[i]) * unit(rng);
      record(x, u);
    }
  }
  out.passed = out.violation_count == 0 && out.min_storage >= -opts.tolerance;
  return out;
}

double DissipationTrace::max() const { return delta.empty() ? 0.0 : *std::max_element(delta.begin(), delta.end()); }

DissipationTrace dissipation_residual(const Trajectory& traj, const StorageCertificate& cert, const SupplyRate& w) {
  traj.validate();
  cert.validate();
  require_size(traj.n_x(), cert.n_x(), "trajectory state dimension");
  const auto integral =
      cumulative_integral(traj, [&](const Vec& x, const Vec& u) { return w(x, u) - cert.alpha(x, u); });
  DissipationTrace out;
  out.times = traj.times;
  const double S0 = cert.value(traj.states.front());
  for (std::size_t j = 0; j < traj.size(); ++j) out.delta.push_back(cert.value(traj.states[j]) - S0 - integral[j]);
  return out;
}

void export_sdp(const SosProblem& problem, const std::string& path) { write_sdpa(problem.sdp, path); }

}  // namespace ocpkit
