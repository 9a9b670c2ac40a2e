#pragma once

// The F-stable point as the solution of LCP(-A, q), computed by brute-force
// enumeration and by the eps-perturbation path M = eps I - A.

#include <cmath>
#include <sstream>
#include <vector>

#include "coinfect/equilibria.hpp"
#include "coinfect/lcp.hpp"
#include "coinfect/system.hpp"

namespace coinfect {

inline lcp::LcpProblem model_lcp(const SystemForm& form) {
  return {-form.A, form.q};
}

/// LCP(eps I - A, q), positive definite for eps > 0.
inline lcp::LcpProblem perturbed_lcp(const SystemForm& form, double eps) {
  return {Matrix4::Identity() * eps - form.A, form.q};
}

struct EpsilonStep {
  double eps = 0.0;
  lcp::LcpSolution solution;
  double identity_residual = 0.0;    // relative defect of the eps energy identity
  double unperturbed_residual = 0.0;  // scaled LCP(-A, q) residual at z(eps)
};

struct PsdLimitOptions {
  std::vector<double> schedule = {1e-2, 1e-4, 1e-6, 1e-8};
  double cauchy_tol = 1e-7;  // relative, on successive limit estimates
  double accept_tol = 1e-9;  // scaled residual of the limit in LCP(-A, q)
};

struct PsdLimitResult {
  lcp::LcpSolution limit;
  std::vector<EpsilonStep> path;
  double cauchy_gap = 0.0;  // relative gap of the last two limit estimates
  bool polished = false;    // limit came from an exact support solve
};

/// Relative defect of
///   (b - mu0) z0 = (b/K) z0^2 + sum_{i>=1} mu_i z_i + eps sum_i z_i^2,
/// written for a general form as -q.z = -A00 z0^2 + eps |z|^2 (A + A^T is
/// zero outside (0,0)).
inline double energy_identity_residual(const SystemForm& form, const lcp::Vector& z, double eps) {
  const double lhs = -form.q[0] * z[0];
  double rhs = -form.A(0, 0) * z[0] * z[0] + eps * z.squaredNorm();
  double scale = std::abs(lhs) + std::abs(rhs);
  for (int i = 1; i < 4; ++i) {
    rhs += form.q[i] * z[i];
    scale += std::abs(form.q[i] * z[i]);
  }
  return std::abs(lhs - rhs) / std::max(scale, 1e-300);
}

namespace detail {

/// Unperturbed solution sharing the support of z(eps), if that support
/// yields a valid solution of LCP(-A, q).
inline std::optional<lcp::Vector> polish_on_support(const lcp::LcpProblem& base, const lcp::LcpSolution& s,
                                                    double accept_tol) {
  auto z = lcp::solve_support(base, s.support_mask);
  if (!z) return std::nullopt;
  if (lcp::scaled_residual(base, *z) > accept_tol) return std::nullopt;
  return z->cwiseMax(0.0).eval();
}

inline double relative_gap(const lcp::Vector& a, const lcp::Vector& b) {
  const double scale = std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace detail

/// Solves LCP(eps I - A, q) along a decreasing schedule and returns the
/// eps -> 0 limit. Each z(eps) gives a limit estimate: the exact solution on
/// its support when that solves the unperturbed problem, otherwise a linear
/// extrapolation in eps. The last two estimates must agree (Cauchy check).
inline PsdLimitResult solve_psd_limit(const SystemForm& form, const PsdLimitOptions& opt = {}) {
  if (opt.schedule.size() < 2)
    throw Error(ErrorCode::InvalidArgument, "eps schedule needs at least two values");
  for (std::size_t i = 0; i < opt.schedule.size(); ++i)
    if (!(opt.schedule[i] > 0) || (i && !(opt.schedule[i] < opt.schedule[i - 1])))
      throw Error(ErrorCode::InvalidArgument, "eps schedule must be positive and strictly decreasing");

  const lcp::LcpProblem base = model_lcp(form);
  PsdLimitResult res;
  std::vector<lcp::Vector> estimates;
  std::vector<bool> exact;
  for (double eps : opt.schedule) {
    EpsilonStep step;
    step.eps = eps;
    step.solution = lcp::solve_pd(perturbed_lcp(form, eps));
    step.identity_residual = energy_identity_residual(form, step.solution.z, eps);
    step.unperturbed_residual = lcp::scaled_residual(base, step.solution.z);
    res.path.push_back(step);

    if (auto z = detail::polish_on_support(base, step.solution, opt.accept_tol)) {
      estimates.push_back(*z);
      exact.push_back(true);
    } else if (res.path.size() >= 2) {
      const auto& prev = res.path[res.path.size() - 2];
      const double e1 = prev.eps, e2 = eps;
      const lcp::Vector& z1 = prev.solution.z;
      const lcp::Vector& z2 = step.solution.z;
      estimates.push_back((z2 - e2 * (z1 - z2) / (e1 - e2)).cwiseMax(0.0));
      exact.push_back(false);
    } else {
      estimates.push_back(step.solution.z);
      exact.push_back(false);
    }
  }

  const auto k = estimates.size();
  res.cauchy_gap = detail::relative_gap(estimates[k - 1], estimates[k - 2]);
  res.polished = exact[k - 1];
  res.limit = lcp::make_solution(base, estimates[k - 1], 1e-12);
  const double limit_residual = lcp::scaled_residual(base, res.limit.z);
  if (res.cauchy_gap > opt.cauchy_tol || limit_residual > opt.accept_tol) {
    std::ostringstream os;
    os << "eps path did not settle: Cauchy gap " << res.cauchy_gap << ", limit residual " << limit_residual;
    throw lcp::NotConvergedError(os.str(), res.limit);
  }
  return res;
}

/// Relative max-norm agreement used between independent F-stable routes.
inline constexpr double kOracleAgreementTolerance = 1e-8;

struct LcpRoutes {
  std::vector<lcp::LcpSolution> enumeration;  // distinct solutions
  PsdLimitResult limit;
};

/// Both LCP routes for LCP(-A, q), without cross-checking.
inline LcpRoutes solve_model_lcp(const SystemForm& form, const PsdLimitOptions& opt = {}) {
  LcpRoutes r;
  r.enumeration = lcp::distinct_solutions(lcp::solve_enumeration(model_lcp(form)));
  r.limit = solve_psd_limit(form, opt);
  return r;
}

/// F-stable point from LCP(-A, q); enumeration and the eps-limit must agree.
inline FStableResult f_stable_via_lcp(const AdmissibleParams& p, const PsdLimitOptions& opt = {}) {
  const SystemForm form = assemble_system(p);
  const LcpRoutes routes = solve_model_lcp(form, opt);
  if (routes.enumeration.size() != 1) {
    std::ostringstream os;
    os << "enumeration found " << routes.enumeration.size() << " distinct solutions, expected exactly one";
    throw Error(ErrorCode::OracleDisagreement, os.str());
  }
  const StatePoint by_enum = routes.enumeration.front().z;
  const StatePoint by_limit = routes.limit.limit.z;
  const double gap = detail::relative_gap(by_enum, by_limit);
  if (gap > kOracleAgreementTolerance) {
    std::ostringstream os;
    os << "enumeration and eps-limit differ by relative " << gap;
    throw Error(ErrorCode::OracleDisagreement, os.str());
  }
  return detail::make_result(form, by_limit, labels_for_point(p, by_limit), Method::Lcp);
}

}  // namespace coinfect
