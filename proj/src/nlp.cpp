#include "ocpkit/nlp.hpp"

#include <cmath>
#include <deque>
#include <future>
#include <limits>

#include <fmt/format.h>

namespace ocpkit {

namespace {

double fd_step(double v) { return 1e-6 * (1.0 + std::abs(v)); }

SparseMat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& v, int rows) {
  Mat J(rows, v.size());
  Vec vp = v;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double h = fd_step(v[i]);
    vp[i] = v[i] + h;
    const Vec fp = f(vp);
    vp[i] = v[i] - h;
    const Vec fm = f(vp);
    vp[i] = v[i];
    J.col(i) = (fp - fm) / (2 * h);
  }
  return J.sparseView();
}

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double projected_gradient_norm(const Vec& x, const Vec& g, const Vec& lo, const Vec& hi) {
  return inf_norm((x - g).cwiseMax(lo).cwiseMin(hi) - x);
}

}  // namespace

std::string to_string(NlpStatus s) {
  switch (s) {
    case NlpStatus::converged: return "converged";
    case NlpStatus::max_iter: return "max-iter";
    case NlpStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& v) {
  Vec g(v.size());
  Vec vp = v;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double h = fd_step(v[i]);
    vp[i] = v[i] + h;
    const double fp = f(vp);
    vp[i] = v[i] - h;
    const double fm = f(vp);
    vp[i] = v[i];
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

void NlpProblem::validate() const {
  if (n <= 0) throw InvalidArgument("NLP dimension must be positive");
  require_size(lower.size(), n, "NLP lower bounds");
  require_size(upper.size(), n, "NLP upper bounds");
  for (int i = 0; i < n; ++i) {
    if (lower[i] > upper[i]) throw InvalidArgument(fmt::format("NLP box empty on coordinate {}", i));
  }
  if (!objective) throw InvalidArgument("NLP without objective");
  if (n_eq > 0 && !eq) throw InvalidArgument("NLP declares equality constraints without an evaluator");
  if (n_ineq > 0 && !ineq) throw InvalidArgument("NLP declares inequality constraints without an evaluator");
}

Vec NlpProblem::eval_gradient(const Vec& v) const {
  if (gradient) return gradient(v);
  return fd_gradient(objective, v);
}

Vec NlpProblem::eval_eq(const Vec& v) const { return n_eq > 0 ? eq(v) : Vec(0); }

Vec NlpProblem::eval_ineq(const Vec& v) const { return n_ineq > 0 ? ineq(v) : Vec(0); }

SparseMat NlpProblem::eval_eq_jacobian(const Vec& v) const {
  if (n_eq == 0) return SparseMat(0, n);
  if (eq_jacobian) return eq_jacobian(v);
  return fd_jacobian(eq, v, n_eq);
}

SparseMat NlpProblem::eval_ineq_jacobian(const Vec& v) const {
  if (n_ineq == 0) return SparseMat(0, n);
  if (ineq_jacobian) return ineq_jacobian(v);
  return fd_jacobian(ineq, v, n_ineq);
}

BoxMinResult minimize_box(const std::function<double(const Vec&, Vec&)>& fg, const Vec& start, const Vec& lower,
                          const Vec& upper, double tolerance, int max_iter, int memory) {
  const Eigen::Index n = start.size();
  BoxMinResult res;
  Vec x = start.cwiseMax(lower).cwiseMin(upper);
  Vec g(n), g_new(n), x_new(n), d(n), q(n);
  double f = fg(x, g);
  std::deque<Vec> S, Y;
  std::deque<double> rho;
  Eigen::Array<bool, Eigen::Dynamic, 1> free(n);

  int it = 0;
  int stalled = 0;  // consecutive iterations without progress in f or the projected gradient
  double best_pg = std::numeric_limits<double>::infinity();
  for (; it < max_iter; ++it) {
    res.projected_gradient = projected_gradient_norm(x, g, lower, upper);
    if (res.projected_gradient <= tolerance) {
      res.converged = true;
      break;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      free[i] = !((x[i] <= lower[i] && g[i] > 0) || (x[i] >= upper[i] && g[i] < 0));
    }
    auto mask = [&](Vec& v) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!free[i]) v[i] = 0.0;
      }
    };
    // Two-loop recursion restricted to the free variables.
    q = g;
    mask(q);
    const std::size_t m = S.size();
    std::vector<double> a(m);
    for (std::size_t k = m; k-- > 0;) {
      Vec s = S[k], y = Y[k];
      mask(s);
      a[k] = rho[k] * s.dot(q);
      q -= a[k] * Y[k].cwiseProduct(free.cast<double>().matrix());
    }
    double gamma = 1.0;
    if (m > 0) gamma = S.back().dot(Y.back()) / Y.back().squaredNorm();
    d = gamma * q;
    for (std::size_t k = 0; k < m; ++k) {
      Vec y = Y[k];
      mask(y);
      const double b = rho[k] * y.dot(d);
      d += (a[k] - b) * S[k].cwiseProduct(free.cast<double>().matrix());
    }
    d = -d;
    mask(d);
    bool steepest = false;
    if (!(g.dot(d) < 0) || !d.allFinite()) {
      d = -g;
      mask(d);
      steepest = true;
      S.clear();
      Y.clear();
      rho.clear();
    }
    double step = 1.0;
    if (m == 0) step = std::min(1.0, 1.0 / std::max(inf_norm(d), 1e-300));
    bool accepted = false;
    double f_new = f;
    for (int ls = 0; ls < 50; ++ls) {
      x_new = (x + step * d).cwiseMax(lower).cwiseMin(upper);
      const double decrease = g.dot(x_new - x);
      if ((x_new - x).squaredNorm() == 0.0) break;
      f_new = fg(x_new, g_new);
      if (!std::isfinite(f_new)) {
        step *= 0.5;
        continue;
      }
      // Armijo, or a flat step within roundoff of f that still shrinks the
      // projected gradient (near the optimum f stops resolving progress).
      const bool flat_ok = f_new <= f + 1e-13 * (1.0 + std::abs(f)) &&
                           projected_gradient_norm(x_new, g_new, lower, upper) < 0.9 * res.projected_gradient;
      if (f_new <= f + 1e-4 * decrease || flat_ok) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (steepest) break;
      S.clear();
      Y.clear();
      rho.clear();
      continue;
    }
    const Vec s = x_new - x;
    const Vec y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm() && sy > 0) {
      S.push_back(s);
      Y.push_back(y);
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > memory) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }
    const double pg_new = projected_gradient_norm(x_new, g_new, lower, upper);
    if (pg_new < best_pg) {
      best_pg = pg_new;
      stalled = 0;
    } else {
      stalled = f - f_new <= 1e-14 * std::max(1.0, std::abs(f)) ? stalled + 1 : 0;
    }
    x = x_new;
    g = g_new;
    f = f_new;
    if (stalled >= 10) {
      ++it;
      break;
    }
  }
  res.x = x;
  res.f = f;
  res.iterations = it;
  res.projected_gradient = projected_gradient_norm(x, g, lower, upper);
  res.converged = res.converged || res.projected_gradient <= tolerance;
  return res;
}

NlpSolution solve_nlp(const NlpProblem& p, const Vec& start, const NlpOptions& opts) {
  p.validate();
  require_size(start.size(), p.n, "NLP start");
  Vec v = start.cwiseMax(p.lower).cwiseMin(p.upper);
  if (!std::isfinite(p.objective(v))) throw InvalidArgument("NLP objective is not finite at the start point");

  Vec lam = Vec::Zero(p.n_eq);
  Vec mu = Vec::Zero(p.n_ineq);
  double rho = opts.initial_penalty;

  auto merit = [&](const Vec& x, Vec& grad) -> double {
    double f = p.objective(x);
    grad = p.eval_gradient(x);
    if (p.n_eq > 0) {
      const Vec c = p.eq(x);
      const Vec w = lam + rho * c;
      f += lam.dot(c) + 0.5 * rho * c.squaredNorm();
      grad += p.eval_eq_jacobian(x).transpose() * w;
    }
    if (p.n_ineq > 0) {
      const Vec g = p.ineq(x);
      const Vec w = (mu + rho * g).cwiseMax(0.0);
      f += (w.squaredNorm() - mu.squaredNorm()) / (2 * rho);
      grad += p.eval_ineq_jacobian(x).transpose() * w;
    }
    return f;
  };

  auto violation = [&](const Vec& c, const Vec& g) {
    double viol = inf_norm(c);
    if (g.size() > 0) viol = std::max(viol, g.maxCoeff() > 0 ? g.maxCoeff() : 0.0);
    return viol;
  };

  NlpSolution sol;
  sol.point = v;
  const bool constrained = p.n_eq + p.n_ineq > 0;
  Vec c = p.eval_eq(v), g = p.eval_ineq(v);
  double prev_viol = std::numeric_limits<double>::infinity();
  double prev_measure = std::numeric_limits<double>::infinity();

  // Best iterate bookkeeping: feasible with lowest objective, else least violation.
  Vec best_v = v;
  double best_obj = p.objective(v), best_viol = violation(c, g);

  for (int k = 0; k < opts.max_outer; ++k) {
    const double inner_tol =
        constrained ? std::max(0.1 * opts.tolerance, std::pow(0.1, k + 2)) : 0.1 * opts.tolerance;
    BoxMinResult inner = minimize_box(merit, v, p.lower, p.upper, inner_tol, opts.max_inner, opts.lbfgs_memory);
    sol.iterations += inner.iterations;
    Vec c_new = p.eval_eq(inner.x), g_new = p.eval_ineq(inner.x);
    double viol = violation(c_new, g_new);
    // Keep the outer violation sequence non-increasing: stiffen and retry.
    for (int retry = 0; k > 0 && viol > prev_viol && retry < 6 && rho < opts.max_penalty; ++retry) {
      rho *= opts.penalty_factor;
      inner = minimize_box(merit, v, p.lower, p.upper, inner_tol, opts.max_inner, opts.lbfgs_memory);
      sol.iterations += inner.iterations;
      c_new = p.eval_eq(inner.x);
      g_new = p.eval_ineq(inner.x);
      viol = violation(c_new, g_new);
    }
    v = inner.x;
    c = c_new;
    g = g_new;
    sol.violation_history.push_back(viol);
    sol.outer_iterations = k + 1;

    if (p.n_eq > 0) lam += rho * c;
    Vec compl_vec(0);
    if (p.n_ineq > 0) {
      mu = (mu + rho * g).cwiseMax(0.0);
      compl_vec = (-g).cwiseMin(mu);
    }
    Vec grad_l = p.eval_gradient(v);
    if (p.n_eq > 0) grad_l += p.eval_eq_jacobian(v).transpose() * lam;
    if (p.n_ineq > 0) grad_l += p.eval_ineq_jacobian(v).transpose() * mu;
    sol.stationarity = projected_gradient_norm(v, grad_l, p.lower, p.upper);
    sol.feasibility = viol;
    const double compl_res = inf_norm(compl_vec);
    sol.kkt_residual = std::max({sol.stationarity, sol.feasibility, compl_res});

    const double obj = p.objective(v);
    const bool feasible = viol <= opts.tolerance;
    if ((feasible && (best_viol > opts.tolerance || obj <= best_obj)) ||
        (!feasible && best_viol > opts.tolerance && viol < best_viol)) {
      best_v = v;
      best_obj = obj;
      best_viol = viol;
    }

    if (sol.kkt_residual <= opts.tolerance) {
      sol.status = NlpStatus::converged;
      break;
    }
    const double measure = std::max(viol, compl_res);
    if (constrained && measure > 0.25 * prev_measure && measure > 0.1 * opts.tolerance) rho = std::min(rho * opts.penalty_factor, opts.max_penalty);
    if (constrained && rho >= opts.max_penalty && viol > opts.tolerance && k > 5) {
      sol.status = NlpStatus::infeasible;
      break;
    }
    if (!constrained && inner.converged) {
      sol.status = sol.kkt_residual <= opts.tolerance ? NlpStatus::converged : NlpStatus::max_iter;
      if (sol.status == NlpStatus::converged) break;
    }
    prev_viol = viol;
    prev_measure = measure;
  }

  if (sol.status == NlpStatus::converged) {
    sol.point = v;
    sol.objective = p.objective(v);
  } else {
    sol.point = best_v;
    sol.objective = best_obj;
    sol.feasibility = best_viol;
  }
  sol.eq_multipliers = lam;
  sol.ineq_multipliers = mu;
  return sol;
}

Vec halton_point(int index, int dim, unsigned long long offset) {
  static constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                                    59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113};
  if (dim > static_cast<int>(std::size(kPrimes))) throw InvalidArgument("Halton dimension too large");
  Vec out(dim);
  for (int d = 0; d < dim; ++d) {
    unsigned long long i = static_cast<unsigned long long>(index) + 1 + offset;
    const int b = kPrimes[d];
    double f = 1.0, r = 0.0;
    while (i > 0) {
      f /= b;
      r += f * static_cast<double>(i % b);
      i /= b;
    }
    out[d] = r;
  }
  return out;
}

MultistartResult multistart(const NlpProblem& p, int k, unsigned long long seed, const NlpOptions& opts, int jobs) {
  if (k < 1) throw InvalidArgument("multistart needs k >= 1");
  p.validate();
  MultistartResult res;
  for (int i = 0; i < k; ++i) {
    const Vec h = halton_point(i, p.n, seed);
    res.starts.push_back(p.lower + (p.upper - p.lower).cwiseProduct(h));
  }
  res.solutions.resize(static_cast<std::size_t>(k));
  if (jobs <= 1) {
    for (int i = 0; i < k; ++i) res.solutions[i] = solve_nlp(p, res.starts[i], opts);
  } else {
    for (int base = 0; base < k; base += jobs) {
      std::vector<std::future<NlpSolution>> fut;
      for (int i = base; i < std::min(k, base + jobs); ++i) {
        fut.push_back(std::async(std::launch::async, [&, i] { return solve_nlp(p, res.starts[i], opts); }));
      }
      for (int i = base; i < std::min(k, base + jobs); ++i) res.solutions[i] = fut[i - base].get();
    }
  }
  int best = -1;
  for (int i = 0; i < k; ++i) {
    const auto& s = res.solutions[i];
    if (s.status != NlpStatus::converged) continue;
    if (best < 0 || s.objective < res.solutions[best].objective - 1e-10) best = i;
  }
  if (best < 0) {
    // Nothing converged: least violation, then objective.
    best = 0;
    for (int i = 1; i < k; ++i) {
      const auto& s = res.solutions[i];
      const auto& b = res.solutions[best];
      if (s.feasibility < b.feasibility - 1e-12 ||
          (std::abs(s.feasibility - b.feasibility) <= 1e-12 && s.objective < b.objective - 1e-10)) {
        best = i;
      }
    }
  }
  res.best_index = best;
  res.best = res.solutions[best];
  return res;
}

}  // namespace ocpkit
