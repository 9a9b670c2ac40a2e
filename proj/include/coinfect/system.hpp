#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "coinfect/params.hpp"

namespace coinfect {

/// Class sizes (S, I1, I2, I12) = (Y0, Y1, Y2, Y3).
using StatePoint = Eigen::Vector4d;
using Matrix4 = Eigen::Matrix4d;

/// dY_k/dt = F_k(Y) Y_k with F(Y) = -q + A Y.
struct SystemForm {
  Matrix4 A = Matrix4::Zero();
  StatePoint q = StatePoint::Zero();
};

namespace detail {

inline SystemForm assemble(const ModelParams& p, double capacity_term) {
  SystemForm form;
  auto& A = form.A;
  A << -capacity_term, -p.alpha1, -p.alpha2, -p.alpha3,
       p.alpha1, 0.0, 0.0, -p.eta1,
       p.alpha2, 0.0, 0.0, -p.eta2,
       p.alpha3, p.eta1, p.eta2, 0.0;
  form.q << -p.b + p.mu0, p.mu1, p.mu2, p.mu3;
  return form;
}

}  // namespace detail

inline SystemForm assemble_system(const AdmissibleParams& p) {
  if (p.has_infinite_capacity())
    throw Error(ErrorCode::InfiniteK, "finite-capacity form requested for K = inf; use assemble_system_infinite");
  return detail::assemble(p.raw(), p.raw().b / p.raw().K);
}

/// The K = inf system: A loses its -b/K entry and becomes skew-symmetric.
inline SystemForm assemble_system_infinite(const AdmissibleParams& p) {
  return detail::assemble(p.raw(), 0.0);
}

/// Either form, chosen by the capacity of `p`.
inline SystemForm assemble_any(const AdmissibleParams& p) {
  return p.has_infinite_capacity() ? assemble_system_infinite(p) : assemble_system(p);
}

inline StatePoint growth_rates(const SystemForm& form, const StatePoint& y) {
  return -form.q + form.A * y;
}

/// Right-hand side of the Lotka-Volterra form.
inline StatePoint vector_field(const SystemForm& form, const StatePoint& y) {
  return growth_rates(form, y).cwiseProduct(y);
}

struct BalanceResiduals {
  double r1 = 0.0;  // alpha . I - (b/K)(S2 - y0)
  double r2 = 0.0;  // mu . I - (b/K)(S2 - y0) y0
};

/// Both residuals vanish at every nonzero equilibrium with finite K.
inline BalanceResiduals balance_residuals(const AdmissibleParams& p, const StatePoint& y) {
  const ModelParams& m = p.raw();
  const double bk = m.b / m.K;
  const double gap = bk * (p.derived().S2 - y[0]);
  BalanceResiduals r;
  r.r1 = m.alpha1 * y[1] + m.alpha2 * y[2] + m.alpha3 * y[3] - gap;
  r.r2 = m.mu1 * y[1] + m.mu2 * y[2] + m.mu3 * y[3] - gap * y[0];
  return r;
}

/// Magnitude against which balance residuals are compared.
inline std::pair<double, double> balance_scales(const AdmissibleParams& p, const StatePoint& y) {
  const ModelParams& m = p.raw();
  const double bk = m.b / m.K;
  const double s1 = m.alpha1 * std::abs(y[1]) + m.alpha2 * std::abs(y[2]) + m.alpha3 * std::abs(y[3]) +
                    bk * (std::abs(p.derived().S2) + std::abs(y[0]));
  const double s2 = m.mu1 * std::abs(y[1]) + m.mu2 * std::abs(y[2]) + m.mu3 * std::abs(y[3]) +
                    bk * (std::abs(p.derived().S2) + std::abs(y[0])) * std::abs(y[0]);
  return {std::max(1.0, s1), std::max(1.0, s2)};
}

namespace detail {

inline long double leibniz_minor(const Matrix4& A, unsigned mask, bool absolute) {
  std::array<int, 4> idx{};
  int n = 0;
  for (int i = 0; i < 4; ++i)
    if (mask & (1u << i)) idx[n++] = i;
  std::array<int, 4> perm = idx;
  long double sum = 0.0L;
  do {
    int inversions = 0;
    for (int i = 0; i < n; ++i)
      for (int k = i + 1; k < n; ++k) inversions += perm[i] > perm[k];
    long double term = 1.0L;
    for (int i = 0; i < n; ++i) term *= static_cast<long double>(A(idx[i], perm[i]));
    if (absolute)
      sum += std::fabs(term);
    else
      sum += (inversions % 2 ? -term : term);
  } while (std::next_permutation(perm.begin(), perm.begin() + n));
  return sum;
}

}  // namespace detail

/// Determinant of the principal submatrix selected by the bits of `mask`,
/// by Leibniz expansion in extended precision. Structurally zero minors come
/// out exactly zero. The empty minor is 1.
inline long double principal_minor(const Matrix4& A, unsigned mask) {
  return detail::leibniz_minor(A, mask, false);
}

/// Sum of |term| over the Leibniz expansion of the principal minor (the
/// permanent of |A| on the index set). Rounding error in the minor is a small
/// multiple of this.
inline long double principal_minor_scale(const Matrix4& A, unsigned mask) {
  return detail::leibniz_minor(A, mask, true);
}

/// Index sets whose principal minors of A vanish identically, as bitmasks:
/// {0,1,2}, {1,2,3}, {1,2}, {1}, {2}, {3}.
inline constexpr std::array<unsigned, 6> kZeroMinorMasks = {0b0111u, 0b1110u, 0b0110u,
                                                            0b0010u, 0b0100u, 0b1000u};

inline bool is_zero_minor_mask(unsigned mask) {
  for (unsigned m : kZeroMinorMasks)
    if (m == mask) return true;
  return false;
}

}  // namespace coinfect
