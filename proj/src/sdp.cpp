#include "ocpkit/sdp.hpp"

#include <fmt/format.h>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <tuple>

namespace ocpkit {

int SdpProblem::total_dimension() const {
  int n = 0;
  for (int b : blocks) n += std::abs(b);
  return n;
}

int SdpProblem::psd_dimension() const {
  int n = 0;
  for (int b : blocks) n += std::max(b, 0);
  return n;
}

namespace {

bool same(const Mat& a, const Mat& b) { return a.rows() == b.rows() && a.cols() == b.cols() && a == b; }

}  // namespace

bool operator==(const SdpProblem& a, const SdpProblem& b) {
  return a.blocks == b.blocks && same(a.c, b.c) && a.entries == b.entries && same(a.free_B, b.free_B) &&
         same(a.free_obj, b.free_obj);
}

SdpProblem SdpProblem::split_free() const {
  SdpProblem out = *this;
  out.free_B.resize(0, 0);
  out.free_obj.resize(0);
  const int nf = n_free();
  if (nf == 0) return out;
  const int k = static_cast<int>(out.blocks.size());
  out.blocks.push_back(-2 * nf);
  for (int j = 0; j < nf; ++j) {
    if (free_obj[j] != 0.0) {
      out.entries.push_back({0, k, 2 * j, 2 * j, free_obj[j]});
      out.entries.push_back({0, k, 2 * j + 1, 2 * j + 1, -free_obj[j]});
    }
    for (int i = 0; i < m(); ++i) {
      if (free_B(i, j) == 0.0) continue;
      out.entries.push_back({i + 1, k, 2 * j, 2 * j, free_B(i, j)});
      out.entries.push_back({i + 1, k, 2 * j + 1, 2 * j + 1, -free_B(i, j)});
    }
  }
  out.normalize();
  return out;
}

void SdpProblem::normalize() {
  std::sort(entries.begin(), entries.end(), [](const SdpEntry& a, const SdpEntry& b) {
    return std::tie(a.matrix, a.block, a.row, a.col) < std::tie(b.matrix, b.block, b.row, b.col);
  });
  std::vector<SdpEntry> merged;
  for (const auto& e : entries) {
    if (!merged.empty() && merged.back().matrix == e.matrix && merged.back().block == e.block &&
        merged.back().row == e.row && merged.back().col == e.col) {
      merged.back().value += e.value;
    } else {
      merged.push_back(e);
    }
  }
  std::erase_if(merged, [](const SdpEntry& e) { return e.value == 0.0; });
  entries = std::move(merged);
}

void SdpProblem::validate() const {
  if (blocks.empty()) throw InvalidArgument("SDP has no blocks");
  if (c.size() == 0) throw InvalidArgument("SDP has no constraints");
  for (int b : blocks) {
    if (b == 0) throw InvalidArgument("SDP block of size 0");
  }
  for (const auto& e : entries) {
    if (e.matrix < 0 || e.matrix > m()) throw InvalidArgument(fmt::format("SDP entry matrix {} out of range", e.matrix));
    if (e.block < 0 || e.block >= static_cast<int>(blocks.size())) {
      throw InvalidArgument(fmt::format("SDP entry block {} out of range", e.block + 1));
    }
    const int n = std::abs(blocks[e.block]);
    if (e.row < 0 || e.col < e.row || e.col >= n) {
      throw InvalidArgument(fmt::format("SDP entry ({}, {}) invalid for block {}", e.row + 1, e.col + 1, e.block + 1));
    }
    if (blocks[e.block] < 0 && e.row != e.col) throw InvalidArgument("off-diagonal entry in a diagonal block");
    if (!std::isfinite(e.value)) throw InvalidArgument("non-finite SDP entry");
  }
  if (n_free() > 0 && (free_B.rows() != m() || free_B.cols() != n_free())) {
    throw InvalidArgument(fmt::format("free variable matrix is {}x{}, expected {}x{}", free_B.rows(), free_B.cols(),
                                      m(), n_free()));
  }
  if (n_free() == 0 && free_B.size() != 0) throw InvalidArgument("free variable matrix without objective");
  if (!free_B.allFinite() || !free_obj.allFinite()) throw InvalidArgument("non-finite free variable data");
}

void write_sdpa(const SdpProblem& problem, std::ostream& os) {
  problem.validate();
  if (problem.n_free() > 0) {
    write_sdpa(problem.split_free(), os);
    return;
  }
  const SdpProblem& p = problem;
  os << p.m() << "\n" << p.blocks.size() << "\n";
  for (std::size_t k = 0; k < p.blocks.size(); ++k) os << (k ? " " : "") << p.blocks[k];
  os << "\n";
  for (int i = 0; i < p.m(); ++i) os << (i ? " " : "") << format_double(p.c[i]);
  os << "\n";
  for (const auto& e : p.entries) {
    os << e.matrix << " " << e.block + 1 << " " << e.row + 1 << " " << e.col + 1 << " " << format_double(e.value)
       << "\n";
  }
}

void write_sdpa(const SdpProblem& p, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(fmt::format("cannot write {}", path));
  write_sdpa(p, os);
  if (!os) throw Error(fmt::format("write failed: {}", path));
}

namespace {

// SDPA allows "{", "}", "(", ")" and "," as separators.
std::string next_data_line(std::istream& is) {
  std::string line;
  while (std::getline(is, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '*' || line[first] == '"') continue;
    for (char& ch : line) {
      if (ch == '{' || ch == '}' || ch == '(' || ch == ')' || ch == ',') ch = ' ';
    }
    return line;
  }
  throw InvalidArgument("SDPA input ended early");
}

}  // namespace

SdpProblem read_sdpa(std::istream& is) {
  SdpProblem p;
  int m = 0, nb = 0;
  if (!(std::istringstream(next_data_line(is)) >> m) || m <= 0) throw InvalidArgument("SDPA: bad constraint count");
  if (!(std::istringstream(next_data_line(is)) >> nb) || nb <= 0) throw InvalidArgument("SDPA: bad block count");
  {
    std::istringstream ls(next_data_line(is));
    for (int k = 0; k < nb; ++k) {
      int b = 0;
      if (!(ls >> b)) throw InvalidArgument("SDPA: bad block structure line");
      p.blocks.push_back(b);
    }
  }
  p.c.resize(m);
  {
    std::istringstream ls(next_data_line(is));
    for (int i = 0; i < m; ++i) {
      if (!(ls >> p.c[i])) throw InvalidArgument("SDPA: bad objective vector");
    }
  }
  std::string line;
  while (std::getline(is, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '*' || line[first] == '"') continue;
    std::istringstream ls(line);
    SdpEntry e;
    if (!(ls >> e.matrix >> e.block >> e.row >> e.col >> e.value)) {
      throw InvalidArgument("SDPA: bad entry line '" + line + "'");
    }
    --e.block;
    --e.row;
    --e.col;
    if (e.row > e.col) std::swap(e.row, e.col);
    p.entries.push_back(e);
  }
  p.validate();
  return p;
}

SdpProblem read_sdpa(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(fmt::format("cannot read {}", path));
  return read_sdpa(is);
}

std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::optimal: return "optimal";
    case SdpStatus::primal_infeasible: return "primal_infeasible";
    case SdpStatus::dual_infeasible: return "dual_infeasible";
    case SdpStatus::max_iter: return "max_iter";
  }
  return "unknown";
}

namespace {

// Internally: min C.X s.t. A_i.X = b_i, X >= 0 with X the SDPA Y, C = -F0,
// A_i = F_i, b = c. Diagonal blocks are stored as n x 1 columns.
struct Term {
  int p, q;
  double a;
};

using Blocks = std::vector<Mat>;

struct Layout {
  std::vector<int> n;
  std::vector<bool> diag;
  int m = 0;
  // Per block: (constraint, terms with both triangles spelled out).
  std::vector<std::vector<std::pair<int, std::vector<Term>>>> cons;
  Blocks C;
  Vec b;
};

Layout build_layout(const SdpProblem& p) {
  Layout L;
  L.m = p.m();
  L.b = p.c;
  const std::size_t nb = p.blocks.size();
  for (int bs : p.blocks) {
    L.n.push_back(std::abs(bs));
    L.diag.push_back(bs < 0);
  }
  L.cons.resize(nb);
  L.C.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) L.C[k] = Mat::Zero(L.n[k], L.diag[k] ? 1 : L.n[k]);
  std::vector<std::vector<std::vector<Term>>> tmp(nb, std::vector<std::vector<Term>>(L.m));
  for (const auto& e : p.entries) {
    const std::size_t k = e.block;
    if (e.matrix == 0) {
      if (L.diag[k]) {
        L.C[k](e.row, 0) -= e.value;
      } else {
        L.C[k](e.row, e.col) -= e.value;
        if (e.row != e.col) L.C[k](e.col, e.row) -= e.value;
      }
      continue;
    }
    auto& t = tmp[k][e.matrix - 1];
    t.push_back({e.row, e.col, e.value});
    if (e.row != e.col) t.push_back({e.col, e.row, e.value});
  }
  for (std::size_t k = 0; k < nb; ++k) {
    for (int i = 0; i < L.m; ++i) {
      if (!tmp[k][i].empty()) L.cons[k].emplace_back(i, std::move(tmp[k][i]));
    }
  }
  return L;
}

Vec apply_A(const Layout& L, const Blocks& X) {
  Vec out = Vec::Zero(L.m);
  for (std::size_t k = 0; k < L.n.size(); ++k) {
    for (const auto& [i, terms] : L.cons[k]) {
      double s = 0.0;
      for (const auto& t : terms) s += t.a * (L.diag[k] ? X[k](t.p, 0) : X[k](t.p, t.q));
      out[i] += s;
    }
  }
  return out;
}

Blocks apply_At(const Layout& L, const Vec& y) {
  Blocks out(L.n.size());
  for (std::size_t k = 0; k < L.n.size(); ++k) {
    out[k] = Mat::Zero(L.n[k], L.diag[k] ? 1 : L.n[k]);
    for (const auto& [i, terms] : L.cons[k]) {
      for (const auto& t : terms) {
        if (L.diag[k]) {
          out[k](t.p, 0) += y[i] * t.a;
        } else {
          out[k](t.p, t.q) += y[i] * t.a;
        }
      }
    }
  }
  return out;
}

double inner(const Blocks& A, const Blocks& B) {
  double s = 0.0;
  for (std::size_t k = 0; k < A.size(); ++k) s += A[k].cwiseProduct(B[k]).sum();
  return s;
}

double fro(const Blocks& A) { return std::sqrt(inner(A, A)); }

Blocks axpy(const Blocks& X, double a, const Blocks& D) {
  Blocks out = X;
  for (std::size_t k = 0; k < X.size(); ++k) out[k] += a * D[k];
  return out;
}

// Largest step in (0, inf] keeping X + a D positive semidefinite.
double max_step(const Layout& L, const Blocks& X, const Blocks& D) {
  double amax = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < X.size(); ++k) {
    if (L.diag[k]) {
      for (int p = 0; p < L.n[k]; ++p) {
        if (D[k](p, 0) < 0) amax = std::min(amax, -X[k](p, 0) / D[k](p, 0));
      }
      continue;
    }
    Eigen::LLT<Mat> llt(X[k]);
    if (llt.info() != Eigen::Success) return 0.0;
    Mat W = llt.matrixL().solve(D[k]);
    W = llt.matrixL().solve(W.transpose()).transpose();
    W = 0.5 * (W + W.transpose());
    const double lmin = Eigen::SelfAdjointEigenSolver<Mat>(W, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    if (lmin < 0) amax = std::min(amax, -1.0 / lmin);
  }
  return amax;
}

Mat schur(const Layout& L, const Blocks& X, const Blocks& Zinv) {
  Mat M = Mat::Zero(L.m, L.m);
  for (std::size_t k = 0; k < L.n.size(); ++k) {
    const auto& cs = L.cons[k];
    if (L.diag[k]) {
      std::vector<std::vector<std::pair<int, double>>> by_pos(L.n[k]);
      for (const auto& [i, terms] : cs) {
        for (const auto& t : terms) by_pos[t.p].emplace_back(i, t.a);
      }
      for (int p = 0; p < L.n[k]; ++p) {
        const double d = X[k](p, 0) * Zinv[k](p, 0);
        for (const auto& [i, a] : by_pos[p]) {
          for (const auto& [j, b] : by_pos[p]) M(i, j) += a * b * d;
        }
      }
      continue;
    }
    const Mat& Xk = X[k];
    const Mat& H = Zinv[k];
    for (std::size_t a = 0; a < cs.size(); ++a) {
      for (std::size_t b = a; b < cs.size(); ++b) {
        double s = 0.0;
        for (const auto& ti : cs[a].second) {
          for (const auto& tj : cs[b].second) s += ti.a * tj.a * Xk(ti.q, tj.p) * H(tj.q, ti.p);
        }
        M(cs[a].first, cs[b].first) += s;
        if (a != b) M(cs[b].first, cs[a].first) += s;
      }
    }
  }
  return M;
}

// Factored Newton system [M B; B' 0] in (dy, dv); B holds the free columns.
// The system is equilibrated symmetrically and solved by pivoted LU with
// iterative refinement.
class Kkt {
 public:
  Kkt(const Mat& M, const Mat& B) : m_(static_cast<int>(M.rows())) {
    const int n = m_ + static_cast<int>(B.cols());
    K_ = Mat::Zero(n, n);
    K_.topLeftCorner(m_, m_) = M;
    K_.topRightCorner(m_, B.cols()) = B;
    K_.bottomLeftCorner(B.cols(), m_) = B.transpose();
    d_.resize(n);
    for (int i = 0; i < m_; ++i) d_[i] = 1.0 / std::sqrt(std::max(M(i, i), std::numeric_limits<double>::min()));
    for (int j = m_; j < n; ++j) {
      const double c = (d_.head(m_).asDiagonal() * K_.col(j).head(m_)).norm();
      d_[j] = c > 0 ? 1.0 / c : 1.0;
    }
    lu_.compute(d_.asDiagonal() * K_ * d_.asDiagonal());
  }

  // M dy + B dv = r, B' dy = rs.
  void solve(const Vec& r, const Vec& rs, Vec& dy, Vec& dv) const {
    Vec rhs(K_.rows());
    rhs << r, rs;
    Vec sol = d_.asDiagonal() * lu_.solve(d_.asDiagonal() * rhs);
    for (int k = 0; k < 3; ++k) sol += d_.asDiagonal() * lu_.solve(d_.asDiagonal() * (rhs - K_ * sol));
    dy = sol.head(m_);
    dv = sol.tail(K_.rows() - m_);
  }

 private:
  int m_;
  Mat K_;
  Vec d_;
  Eigen::PartialPivLU<Mat> lu_;
};

struct Direction {
  Blocks dX, dZ;
  Vec dy, dv;
};

// HKM direction for the target sigma*mu with optional second-order term dXa*dZa.
Direction direction(const Layout& L, const Kkt& kkt, const Blocks& X, const Blocks& Zinv, const Vec& rp,
                    const Blocks& Rd, const Vec& rs, double sigma_mu, const Direction* pred) {
  const std::size_t nb = L.n.size();
  auto centering = [&](std::size_t k) {
    Mat r = sigma_mu * Zinv[k] - X[k];
    if (pred) {
      if (L.diag[k]) {
        r -= pred->dX[k].cwiseProduct(pred->dZ[k]).cwiseProduct(Zinv[k]);
      } else {
        r -= pred->dX[k] * pred->dZ[k] * Zinv[k];
      }
    }
    return r;
  };
  // G = R Zinv - X Rd Zinv with R = sigma mu I - X Z - dXa dZa.
  Blocks G(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    G[k] = centering(k) - (L.diag[k] ? Mat(X[k].cwiseProduct(Rd[k]).cwiseProduct(Zinv[k]))
                                     : Mat(X[k] * Rd[k] * Zinv[k]));
  }
  Direction d;
  kkt.solve(rp - apply_A(L, G), rs, d.dy, d.dv);
  const Blocks Aty = apply_At(L, d.dy);
  d.dZ.resize(nb);
  d.dX.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    d.dZ[k] = Rd[k] - Aty[k];
    if (L.diag[k]) {
      d.dX[k] = centering(k) - X[k].cwiseProduct(d.dZ[k]).cwiseProduct(Zinv[k]);
    } else {
      const Mat dx = centering(k) - X[k] * d.dZ[k] * Zinv[k];
      d.dX[k] = 0.5 * (dx + dx.transpose());
    }
  }
  return d;
}

Blocks invert(const Layout& L, const Blocks& Z) {
  Blocks out(Z.size());
  for (std::size_t k = 0; k < Z.size(); ++k) {
    if (L.diag[k]) {
      out[k] = Z[k].cwiseInverse();
    } else {
      Mat inv = Z[k].llt().solve(Mat::Identity(L.n[k], L.n[k]));
      out[k] = 0.5 * (inv + inv.transpose());
    }
  }
  return out;
}

}  // namespace

SdpSolution solve_sdp(const SdpProblem& problem, const SdpOptions& opts) {
  problem.validate();
  if (problem.psd_dimension() > opts.dense_cap) {
    throw InvalidArgument(
        fmt::format("SDP dimension {} exceeds the dense cap {}", problem.psd_dimension(), opts.dense_cap));
  }
  const Layout L = build_layout(problem);
  const std::size_t nb = L.n.size();
  const int ntot = problem.total_dimension();
  const int nf = problem.n_free();
  const Mat B = nf > 0 ? problem.free_B : Mat::Zero(L.m, 0);
  const Vec g = nf > 0 ? Vec(-problem.free_obj) : Vec::Zero(0);

  // Gram matrix of the constraints, used to restore A(dX) + B dv = rp exactly
  // after each Newton solve.
  Blocks ones(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    ones[k] = L.diag[k] ? Mat(Mat::Ones(L.n[k], 1)) : Mat(Mat::Identity(L.n[k], L.n[k]));
  }
  Mat AAt = schur(L, ones, ones) + B * B.transpose();
  AAt.diagonal().array() += 1e-14 * std::max(1.0, AAt.diagonal().maxCoeff());
  const Eigen::LDLT<Mat> gram(AAt);
  auto restore = [&](Direction& d, const Vec& rp) {
    const Vec w = gram.solve(rp - apply_A(L, d.dX) - B * d.dv);
    const Blocks corr = apply_At(L, w);
    for (std::size_t k = 0; k < nb; ++k) d.dX[k] += corr[k];
    if (nf > 0) d.dv += B.transpose() * w;
  };

  // Scaled-identity start.
  Blocks X(nb), Z(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    double norm_c = L.C[k].norm(), max_a = 0.0, ratio = 0.0;
    std::vector<double> anorm(L.m, 0.0);
    for (const auto& [i, terms] : L.cons[k]) {
      double s = 0;
      for (const auto& t : terms) s += t.a * t.a;
      anorm[i] = std::sqrt(s);
      max_a = std::max(max_a, anorm[i]);
      ratio = std::max(ratio, (1 + std::abs(L.b[i])) / (1 + anorm[i]));
    }
    const double n = L.n[k];
    const double xi = std::max({10.0, std::sqrt(n), n * ratio});
    const double eta = std::max({10.0, std::sqrt(n), norm_c, max_a});
    if (L.diag[k]) {
      X[k] = Mat::Constant(L.n[k], 1, xi);
      Z[k] = Mat::Constant(L.n[k], 1, eta);
    } else {
      X[k] = xi * Mat::Identity(L.n[k], L.n[k]);
      Z[k] = eta * Mat::Identity(L.n[k], L.n[k]);
    }
  }
  Vec y = Vec::Zero(L.m);
  Vec v = Vec::Zero(nf);
  const double norm_b = L.b.norm();
  double norm_C = g.squaredNorm();
  for (const auto& c : L.C) norm_C += c.squaredNorm();
  norm_C = std::sqrt(norm_C);

  struct Residuals {
    Vec rp, rs;
    Blocks Rd, Aty;
    double pinf = 0.0, dinf = 0.0;
  };
  auto residuals = [&]() {
    Residuals r;
    r.rp = L.b - apply_A(L, X) - B * v;
    r.rs = g - B.transpose() * y;
    r.Aty = apply_At(L, y);
    r.Rd = L.C;
    for (std::size_t k = 0; k < nb; ++k) r.Rd[k] -= Z[k] + r.Aty[k];
    r.pinf = r.rp.norm() / (1 + norm_b);
    r.dinf = std::sqrt(std::pow(fro(r.Rd), 2) + r.rs.squaredNorm()) / (1 + norm_C);
    return r;
  };

  SdpSolution sol;
  auto finish = [&](SdpStatus st, int it) {
    const Residuals r = residuals();
    sol.status = st;
    sol.iterations = it;
    sol.x = -y;
    sol.X = Z;
    sol.Y = X;
    sol.free = v;
    sol.primal_objective = -L.b.dot(y);
    sol.dual_objective = -(inner(L.C, X) + g.dot(v));
    sol.primal_infeasibility = r.dinf;
    sol.dual_infeasibility = r.pinf;
    return sol;
  };

  struct Iterate {
    Blocks X, Z;
    Vec y, v;
    double merit = std::numeric_limits<double>::infinity();
  } best;
  int since_best = 0;
  const double mu0 = inner(X, Z) / ntot;
  auto finish_best = [&](int it) {
    if (std::isfinite(best.merit)) {
      X = best.X;
      Z = best.Z;
      y = best.y;
      v = best.v;
    }
    return finish(SdpStatus::max_iter, it);
  };

  for (int it = 0; it < opts.max_iter; ++it) {
    const Residuals r = residuals();
    const double pobj = inner(L.C, X) + g.dot(v), dobj = L.b.dot(y);
    const double rel_gap = std::abs(pobj - dobj) / (1 + std::abs(pobj) + std::abs(dobj));
    if (rel_gap <= opts.tolerance && r.pinf <= opts.tolerance && r.dinf <= opts.tolerance) {
      return finish(SdpStatus::optimal, it);
    }
    // Infeasibility certificates.
    if (dobj > 0) {
      Blocks cert = r.Aty;
      for (std::size_t k = 0; k < nb; ++k) cert[k] += Z[k];
      const double norm = std::hypot(fro(cert), (B.transpose() * y).norm());
      if (norm / dobj < opts.tolerance) return finish(SdpStatus::dual_infeasible, it);
    }
    if (pobj < 0 && (apply_A(L, X) + B * v).norm() / -pobj < opts.tolerance) {
      return finish(SdpStatus::primal_infeasible, it);
    }
    const double mu = inner(X, Z) / ntot;
    const double merit = std::max({r.pinf, r.dinf, rel_gap});
    if (merit < 0.9 * best.merit) {
      best = {X, Z, y, v, merit};
      since_best = 0;
    } else if (mu < opts.tolerance * mu0 && ++since_best >= opts.stall_iterations) {
      return finish_best(it);
    }

    const Blocks Zinv = invert(L, Z);
    const Kkt kkt(schur(L, X, Zinv), B);
    const Direction pred = direction(L, kkt, X, Zinv, r.rp, r.Rd, r.rs, 0.0, nullptr);
    const double ap = std::min(1.0, max_step(L, X, pred.dX));
    const double ad = std::min(1.0, max_step(L, Z, pred.dZ));
    const double mu_aff = inner(axpy(X, ap, pred.dX), axpy(Z, ad, pred.dZ)) / ntot;
    const double expon = std::max(1.0, 3.0 * std::pow(std::min(ap, ad), 2));
    const double sigma = std::clamp(std::pow(mu_aff / mu, expon), 0.0, 1.0);
    Direction corr = direction(L, kkt, X, Zinv, r.rp, r.Rd, r.rs, sigma * mu, &pred);
    restore(corr, r.rp);
    if (!corr.dy.allFinite() || !corr.dv.allFinite()) return finish_best(it);
    const double step = std::min(
        {1.0, opts.step_fraction * max_step(L, X, corr.dX), opts.step_fraction * max_step(L, Z, corr.dZ)});
    if (!(step > 1e-12)) return finish_best(it);
    X = axpy(X, step, corr.dX);
    v += step * corr.dv;
    Z = axpy(Z, step, corr.dZ);
    y += step * corr.dy;
  }
  return finish_best(opts.max_iter);
}

bool has_feasible_point(const SdpSolution& s, double residual) {
  if (s.status == SdpStatus::optimal) return true;
  return s.status == SdpStatus::max_iter && !s.Y.empty() && s.dual_infeasibility <= residual;
}

}  // namespace ocpkit
