#pragma once

#include "ocpkit/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace ocpkit {

/// One coefficient of an SDPA problem. `matrix` 0 is F0, 1..m are F_1..F_m.
/// Indices are 0-based and row <= col (upper triangle).
struct SdpEntry {
  int matrix = 0;
  int block = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;

  friend bool operator==(const SdpEntry&, const SdpEntry&) = default;
};

/// Problem in SDPA layout.
///
///   x problem:  min c'x  s.t.  sum_i F_i x_i - F0 = X >= 0
///   Y problem:  max F0.Y s.t.  F_i.Y = c_i, Y >= 0
///
/// Block sizes follow SDPA: positive for a symmetric block, negative for a
/// diagonal (LP) block.
///
/// Optional free variables v extend the Y problem to F_i.Y + (free_B v)_i = c_i
/// with objective F0.Y + free_obj'v. SDPA has no such variables; write_sdpa
/// emits them as a nonnegative pair block v = p - n.
struct SdpProblem {
  std::vector<int> blocks;
  Vec c;
  std::vector<SdpEntry> entries;
  Mat free_B;  // m x n_free
  Vec free_obj;

  [[nodiscard]] int m() const { return static_cast<int>(c.size()); }
  [[nodiscard]] int n_free() const { return static_cast<int>(free_obj.size()); }
  /// Same problem with each free variable split into a nonnegative pair.
  [[nodiscard]] SdpProblem split_free() const;
  [[nodiscard]] int total_dimension() const;
  /// Sum of the symmetric block sizes.
  [[nodiscard]] int psd_dimension() const;
  /// Sorts entries, merges duplicates and drops zeros.
  void normalize();
  /// Throws InvalidArgument on an empty problem or out-of-range entries.
  void validate() const;

  friend bool operator==(const SdpProblem& a, const SdpProblem& b);
};

void write_sdpa(const SdpProblem& p, std::ostream& os);
void write_sdpa(const SdpProblem& p, const std::string& path);
SdpProblem read_sdpa(std::istream& is);
SdpProblem read_sdpa(const std::string& path);

enum class SdpStatus {
  optimal,
  primal_infeasible,  // x problem infeasible (Y problem unbounded or ill-posed)
  dual_infeasible,    // Y problem infeasible
  max_iter,
};

std::string to_string(SdpStatus s);

struct SdpOptions {
  int max_iter = 100;
  double tolerance = 1e-8;  // relative gap and relative infeasibilities
  int dense_cap = 400;      // limit on psd_dimension()
  double step_fraction = 0.95;
  /// Once mu < tolerance * mu0, stop when the merit has not dropped 10% for
  /// this many iterations.
  int stall_iterations = 10;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::max_iter;
  Vec x;
  std::vector<Mat> X;  // slack blocks; diagonal blocks as n x 1 columns
  std::vector<Mat> Y;
  Vec free;  // free variables of the Y problem
  double primal_objective = 0.0;  // c'x
  double dual_objective = 0.0;    // F0.Y
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  int iterations = 0;

  [[nodiscard]] double gap() const { return primal_objective - dual_objective; }
};

/// Dense primal-dual interior-point method (HKM direction, Mehrotra
/// predictor-corrector, infeasible start from scaled identities, common
/// primal-dual step). Free variables enter through a bordered Schur system.
/// On stalls or numerical failure the status is max_iter and the solution
/// holds the iterate with the smallest max(infeasibilities, relative gap).
SdpSolution solve_sdp(const SdpProblem& p, const SdpOptions& opts = {});

/// True for an optimal solution, and for a stalled one whose Y iterate meets
/// the equalities to the relative `residual` (Y itself is always positive
/// definite), i.e. a usable feasible point of the Y problem.
bool has_feasible_point(const SdpSolution& s, double residual = 1e-8);

}  // namespace ocpkit
