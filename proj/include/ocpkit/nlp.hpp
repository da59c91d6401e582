#pragma once

#include "ocpkit/types.hpp"

#include <Eigen/Sparse>

#include <functional>
#include <string>
#include <vector>

namespace ocpkit {

using SparseMat = Eigen::SparseMatrix<double>;

/// min f(v) s.t. c(v) = 0, g(v) <= 0, lower <= v <= upper.
///
/// Derivative callbacks are optional; missing ones fall back to central
/// differences with step 1e-6 (1 + |v_i|).
struct NlpProblem {
  int n = 0;
  Vec lower;
  Vec upper;
  std::function<double(const Vec&)> objective;
  std::function<Vec(const Vec&)> gradient;

  int n_eq = 0;
  std::function<Vec(const Vec&)> eq;
  std::function<SparseMat(const Vec&)> eq_jacobian;

  int n_ineq = 0;
  std::function<Vec(const Vec&)> ineq;
  std::function<SparseMat(const Vec&)> ineq_jacobian;

  /// Checks dimensions and callbacks; throws on inconsistency.
  void validate() const;

  [[nodiscard]] Vec eval_gradient(const Vec& v) const;
  [[nodiscard]] Vec eval_eq(const Vec& v) const;
  [[nodiscard]] Vec eval_ineq(const Vec& v) const;
  [[nodiscard]] SparseMat eval_eq_jacobian(const Vec& v) const;
  [[nodiscard]] SparseMat eval_ineq_jacobian(const Vec& v) const;
};

struct NlpOptions {
  double tolerance = 1e-6;  // stationarity, feasibility and complementarity
  int max_outer = 60;
  int max_inner = 3000;
  double initial_penalty = 1.0;
  double penalty_factor = 10.0;
  double max_penalty = 1e12;
  int lbfgs_memory = 12;
};

enum class NlpStatus { converged, max_iter, infeasible };

std::string to_string(NlpStatus s);

struct NlpSolution {
  Vec point;
  double objective = 0.0;
  double stationarity = 0.0;
  double feasibility = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;        // inner quasi-Newton iterations, summed
  int outer_iterations = 0;
  NlpStatus status = NlpStatus::max_iter;
  Vec eq_multipliers;
  Vec ineq_multipliers;
  /// max(|c|_inf, |max(g, 0)|_inf) after each outer iteration.
  std::vector<double> violation_history;
};

/// Augmented-Lagrangian outer loop around a box-projected L-BFGS inner
/// solver. Deterministic for a fixed (problem, start, options).
NlpSolution solve_nlp(const NlpProblem& p, const Vec& start, const NlpOptions& opts = {});

/// Result of minimizing a smooth function over a box.
struct BoxMinResult {
  Vec x;
  double f = 0.0;
  int iterations = 0;
  double projected_gradient = 0.0;
  bool converged = false;
};

/// Projected L-BFGS on lower <= x <= upper. `fg` returns f(x) and writes the gradient.
BoxMinResult minimize_box(const std::function<double(const Vec&, Vec&)>& fg, const Vec& start, const Vec& lower,
                          const Vec& upper, double tolerance, int max_iter, int memory);

struct MultistartResult {
  NlpSolution best;
  int best_index = -1;
  std::vector<Vec> starts;
  std::vector<NlpSolution> solutions;
};

/// k-th point (0-based) of the Halton sequence in [0,1)^dim, skipping `offset` points.
Vec halton_point(int index, int dim, unsigned long long offset = 0);

/// Runs solve_nlp from k Halton points in the box (offset by `seed`).
/// The best solution is the lowest-objective converged one; ties within
/// 1e-10 go to the lowest start index. `jobs` > 1 runs starts concurrently
/// without changing the result.
MultistartResult multistart(const NlpProblem& p, int k, unsigned long long seed, const NlpOptions& opts = {},
                            int jobs = 1);

/// Central-difference gradient with step 1e-6 (1 + |v_i|).
Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& v);

}  // namespace ocpkit
