#pragma once

// Linear complementarity problems LCP(M, q): find z >= 0 with
// w = q + M z >= 0 and z^T w = 0.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "coinfect/error.hpp"

namespace coinfect::lcp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct LcpProblem {
  Matrix M;
  Vector q;

  Eigen::Index size() const { return q.size(); }
};

struct LcpSolution {
  Vector z;
  Vector w;
  std::vector<int> support;  // {i : z_i > tol}
  std::uint32_t support_mask = 0;
  double residual = 0.0;  // max of |z_i w_i| and negativity violations
  int iterations = 0;
};

inline void validate(const LcpProblem& prob) {
  const auto n = prob.q.size();
  if (n < 1 || prob.M.rows() != n || prob.M.cols() != n)
    throw Error(ErrorCode::InvalidArgument, "LCP needs a square M matching q, n >= 1");
  if (!prob.M.allFinite() || !prob.q.allFinite())
    throw Error(ErrorCode::InvalidArgument, "LCP data must be finite");
}

/// max(|z_i w_i|, -z_i, -w_i) over all i.
inline double lcp_residual(const Vector& z, const Vector& w) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    r = std::max({r, std::abs(z[i] * w[i]), -z[i], -w[i]});
  return r;
}

/// Magnitude of the terms entering w_i = q_i + (M z)_i.
inline Vector row_scales(const LcpProblem& prob, const Vector& z) {
  return (prob.q.cwiseAbs() + prob.M.cwiseAbs() * z.cwiseAbs()).cwiseMax(1.0);
}

/// Residual with each inequality measured relative to its own magnitude.
inline double scaled_residual(const LcpProblem& prob, const Vector& z) {
  const Vector w = prob.q + prob.M * z;
  const Vector ws = row_scales(prob, z);
  const double zs = std::max(1.0, z.cwiseAbs().maxCoeff());
  double r = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i)
    r = std::max({r, -z[i] / zs, -w[i] / ws[i], std::abs(z[i] * w[i]) / (zs * ws[i])});
  return r;
}

inline LcpSolution make_solution(const LcpProblem& prob, Vector z, double support_tol) {
  LcpSolution s;
  s.w = prob.q + prob.M * z;
  const double zs = std::max(1.0, z.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    if (z[i] > support_tol * zs) {
      s.support.push_back(static_cast<int>(i));
      s.support_mask |= (1u << i);
    }
  s.residual = lcp_residual(z, s.w);
  s.z = std::move(z);
  return s;
}

/// Solves the complementary system for one support: w_i = 0 on the support,
/// z_i = 0 off it. Returns nothing when the basis is near singular.
inline std::optional<Vector> solve_support(const LcpProblem& prob, std::uint32_t mask,
                                           double cond_limit = 1e12) {
  const auto n = prob.size();
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < n; ++i)
    if (mask & (1u << i)) idx.push_back(i);
  Vector z = Vector::Zero(n);
  if (idx.empty()) return z;
  const auto k = static_cast<Eigen::Index>(idx.size());
  Matrix sub(k, k);
  Vector rhs(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    rhs[r] = -prob.q[idx[r]];
    for (Eigen::Index c = 0; c < k; ++c) sub(r, c) = prob.M(idx[r], idx[c]);
  }
  Eigen::JacobiSVD<Matrix> svd(sub, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv[0] == 0.0 || sv[k - 1] <= sv[0] / cond_limit) return std::nullopt;
  const Vector zk = Eigen::FullPivLU<Matrix>(sub).solve(rhs);
  for (Eigen::Index r = 0; r < k; ++r) z[idx[r]] = zk[r];
  return z;
}

struct EnumerationOptions {
  double feasibility_tol = 1e-9;  // relative
  double cond_limit = 1e12;
};

inline constexpr Eigen::Index kMaxEnumerationSize = 20;

/// Every solution found over all 2^n complementary supports, ordered by
/// support bitmask. Near-singular bases are skipped.
inline std::vector<LcpSolution> solve_enumeration(const LcpProblem& prob, const EnumerationOptions& opt = {}) {
  validate(prob);
  const auto n = prob.size();
  if (n > kMaxEnumerationSize) {
    std::ostringstream os;
    os << "enumeration over 2^" << n << " supports refused (limit n <= " << kMaxEnumerationSize << ")";
    throw Error(ErrorCode::DimensionTooLarge, os.str());
  }
  std::vector<LcpSolution> out;
  const std::uint32_t count = 1u << n;
  for (std::uint32_t mask = 0; mask < count; ++mask) {
    auto z = solve_support(prob, mask, opt.cond_limit);
    if (!z) continue;
    const Vector w = prob.q + prob.M * *z;
    const Vector ws = row_scales(prob, *z);
    const double zs = std::max(1.0, z->cwiseAbs().maxCoeff());
    bool ok = true;
    for (Eigen::Index i = 0; i < n && ok; ++i)
      ok = (*z)[i] >= -opt.feasibility_tol * zs && w[i] >= -opt.feasibility_tol * ws[i];
    if (!ok) continue;
    LcpSolution s = make_solution(prob, std::move(*z), opt.feasibility_tol);
    s.support_mask = mask;
    s.support.clear();
    for (Eigen::Index i = 0; i < n; ++i)
      if (mask & (1u << i)) s.support.push_back(static_cast<int>(i));
    out.push_back(std::move(s));
  }
  return out;
}

/// Solutions with coincident points merged (first occurrence kept).
inline std::vector<LcpSolution> distinct_solutions(const std::vector<LcpSolution>& sols, double rel_tol = 1e-8) {
  std::vector<LcpSolution> out;
  for (const auto& s : sols) {
    const bool seen = std::any_of(out.begin(), out.end(), [&](const LcpSolution& o) {
      const double scale = std::max({1.0, s.z.cwiseAbs().maxCoeff(), o.z.cwiseAbs().maxCoeff()});
      return (s.z - o.z).cwiseAbs().maxCoeff() <= rel_tol * scale;
    });
    if (!seen) out.push_back(s);
  }
  return out;
}

/// Raised by solve_pd; carries the best iterate found.
class NotConvergedError : public Error {
 public:
  NotConvergedError(const std::string& what, LcpSolution best)
      : Error(ErrorCode::NotConverged, what), best_(std::move(best)) {}
  const LcpSolution& best() const { return best_; }

 private:
  LcpSolution best_;
};

struct PdOptions {
  double tol = 1e-9;  // scaled residual accepted at exit
  int max_iter = 0;   // 0 selects 50 * n
  bool check_positive_definite = false;
};

/// Smallest eigenvalue of the symmetric part of M.
inline double min_symmetric_eigenvalue(const Matrix& M) {
  const Matrix sym = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

namespace detail {

inline void pivot(Matrix& T, Eigen::Index row, Eigen::Index col) {
  T.row(row) /= T(row, col);
  for (Eigen::Index i = 0; i < T.rows(); ++i)
    if (i != row && T(i, col) != 0.0) T.row(i) -= T(i, col) * T.row(row);
}

}  // namespace detail

/// Lemke's complementary pivoting with covering vector e = 1 and a
/// lexicographic ratio test; ties go to the lowest row index, so the pivot
/// sequence is fixed for fixed input. Unique solution when M is positive
/// definite. The basic solution is re-solved from its support at exit.
inline LcpSolution solve_pd(const LcpProblem& prob, const PdOptions& opt = {}) {
  validate(prob);
  const auto n = prob.size();
  if (opt.check_positive_definite) {
    const double lam = min_symmetric_eigenvalue(prob.M);
    if (!(lam > 0.0)) {
      std::ostringstream os;
      os << "symmetric part of M has minimal eigenvalue " << lam;
      throw Error(ErrorCode::NotPositiveDefinite, os.str());
    }
  }
  const int max_iter = opt.max_iter > 0 ? opt.max_iter : static_cast<int>(50 * n);

  if (prob.q.minCoeff() >= 0.0) return make_solution(prob, Vector::Zero(n), 0.0);

  // Columns: w (0..n-1), z (n..2n-1), z0 (2n), rhs (2n+1). Rows: w - M z - e z0 = q.
  const Eigen::Index z0_col = 2 * n, rhs = 2 * n + 1;
  Matrix T = Matrix::Zero(n, 2 * n + 2);
  T.leftCols(n).setIdentity();
  T.middleCols(n, n) = -prob.M;
  T.col(z0_col).setConstant(-1.0);
  T.col(rhs) = prob.q;
  std::vector<Eigen::Index> basis(n);
  for (Eigen::Index i = 0; i < n; ++i) basis[i] = i;

  Eigen::Index leave = 0;
  prob.q.minCoeff(&leave);
  detail::pivot(T, leave, z0_col);
  Eigen::Index leaving_var = basis[leave];
  basis[leave] = z0_col;
  Eigen::Index entering = leaving_var < n ? leaving_var + n : leaving_var - n;

  auto extract = [&]() {
    Vector z = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
      if (basis[i] >= n && basis[i] < 2 * n) z[basis[i] - n] = std::max(0.0, T(i, rhs));
    return z;
  };

  const double piv_tol = 1e-12;
  for (int iter = 1; iter <= max_iter; ++iter) {
    // Lexicographic minimum ratio over rows with a positive entering entry.
    Eigen::Index row = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = T(i, entering);
      if (a <= piv_tol * std::max(1.0, T.row(i).head(2 * n + 1).cwiseAbs().maxCoeff())) continue;
      if (row < 0) {
        row = i;
        continue;
      }
      const double ri = T(i, rhs) / a, rr = T(row, rhs) / T(row, entering);
      const double tie = 1e-12 * std::max({1.0, std::abs(ri), std::abs(rr)});
      if (ri < rr - tie) {
        row = i;
      } else if (std::abs(ri - rr) <= tie) {
        if (basis[i] == z0_col) {
          row = i;
        } else if (basis[row] != z0_col) {
          for (Eigen::Index c = 0; c < n; ++c) {
            const double li = T(i, c) / a, lr = T(row, c) / T(row, entering);
            if (li < lr - 1e-14) { row = i; break; }
            if (li > lr + 1e-14) break;
          }
        }
      }
    }
    if (row < 0) {
      LcpSolution best = make_solution(prob, extract(), 1e-12);
      best.iterations = iter;
      throw NotConvergedError("Lemke terminated on a secondary ray", best);
    }
    detail::pivot(T, row, entering);
    leaving_var = basis[row];
    basis[row] = entering;
    if (leaving_var == z0_col) {
      Vector z = extract();
      std::uint32_t mask = 0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (basis[i] >= n && basis[i] < 2 * n) mask |= (1u << (basis[i] - n));
      // Re-solve the final basis directly for accuracy.
      if (auto refined = solve_support(prob, mask, 1e14)) {
        if (scaled_residual(prob, *refined) <= scaled_residual(prob, z)) z = *refined;
      }
      z = z.cwiseMax(0.0);
      LcpSolution s = make_solution(prob, z, 1e-12);
      s.iterations = iter;
      if (scaled_residual(prob, s.z) > opt.tol) {
        std::ostringstream os;
        os << "Lemke solution residual " << scaled_residual(prob, s.z) << " exceeds " << opt.tol;
        throw NotConvergedError(os.str(), s);
      }
      return s;
    }
    entering = leaving_var < n ? leaving_var + n : leaving_var - n;
  }
  LcpSolution best = make_solution(prob, extract(), 1e-12);
  best.iterations = max_iter;
  throw NotConvergedError("Lemke iteration limit reached", best);
}

struct ConvexityWitness {
  std::size_t first = 0;
  std::size_t second = 0;
  double t = 0.0;
  double residual = 0.0;
};

struct ConvexityReport {
  bool convex = true;
  std::optional<ConvexityWitness> witness;
};

/// Checks that (1 - t) z + t z' solves the LCP for every pair of given
/// solutions and t in {1/4, 1/2, 3/4}.
inline ConvexityReport convexity_probe(const LcpProblem& prob, const std::vector<Vector>& solutions,
                                       double tol = 1e-9) {
  validate(prob);
  ConvexityReport rep;
  for (std::size_t a = 0; a < solutions.size(); ++a)
    for (std::size_t b = a + 1; b < solutions.size(); ++b)
      for (double t : {0.25, 0.5, 0.75}) {
        const Vector zeta = (1.0 - t) * solutions[a] + t * solutions[b];
        const double r = scaled_residual(prob, zeta);
        if (r > tol) {
          rep.convex = false;
          rep.witness = ConvexityWitness{a, b, t, r};
          return rep;
        }
      }
  return rep;
}

}  // namespace coinfect::lcp
