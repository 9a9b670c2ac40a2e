#pragma once

// Adaptive Dormand-Prince 5(4) integrator for small fixed-size systems.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <type_traits>

#include "coinfect/error.hpp"

namespace coinfect::ode {

struct StepperOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  double initial_step = 0.0;  // 0 selects a step from the initial slope
  double max_step = std::numeric_limits<double>::infinity();
  double min_step = 1e-14;    // relative to max(1, |t|)
  long max_steps = 50'000'000;
  /// Reject steps that push any coordinate below -atol.
  bool keep_nonnegative = false;
};

struct StepStats {
  long accepted = 0;
  long rejected = 0;
  long positivity_rejections = 0;
  long rhs_evaluations = 0;
  double max_error_estimate = 0.0;  // largest accepted normalized local error
  double last_step = 0.0;
};

namespace detail {

// Dormand & Prince (1980) coefficients.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                        b6 = 11.0 / 84;
// b - b_hat (embedded 4th-order weights)
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace detail

/// Integrates y' = f(y) (autonomous) from t0 to t1. `observer(t, y)` is called
/// at t0 and after every accepted step; returning false stops the run early.
/// Returns the final time reached.
template <class Vec, class Rhs, class Observer>
double integrate_adaptive(Rhs&& f, Vec& y, double t0, double t1, const StepperOptions& opt, StepStats& stats,
                          Observer&& observer) {
  using namespace detail;
  if (!(t1 > t0)) throw Error(ErrorCode::InvalidArgument, "integration horizon must be positive");
  if (!y.allFinite()) throw Error(ErrorCode::NonFiniteState, "initial state is not finite");

  auto call_observer = [&](double t, const Vec& state) {
    if constexpr (std::is_same_v<std::invoke_result_t<Observer, double, const Vec&>, bool>)
      return observer(t, state);
    else {
      observer(t, state);
      return true;
    }
  };

  auto error_norm = [&](const Vec& y0, const Vec& y1, const Vec& err) {
    const Vec sc = (opt.atol + opt.rtol * y0.cwiseAbs().cwiseMax(y1.cwiseAbs()).array()).matrix();
    return std::sqrt((err.cwiseQuotient(sc)).squaredNorm() / static_cast<double>(y0.size()));
  };

  Vec k1 = f(y);
  ++stats.rhs_evaluations;
  double t = t0;
  double h = opt.initial_step;
  if (!(h > 0)) {
    // Hairer's starting step heuristic, first part.
    const Vec sc = (opt.atol + opt.rtol * y.cwiseAbs().array()).matrix();
    const double d0 = std::sqrt(y.cwiseQuotient(sc).squaredNorm() / y.size());
    const double d1 = std::sqrt(k1.cwiseQuotient(sc).squaredNorm() / y.size());
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  }
  h = std::min({h, opt.max_step, t1 - t0});

  if (!call_observer(t, y)) return t;

  Vec k2, k3, k4, k5, k6, k7, ytmp, ynew, err;
  long steps = 0;
  while (t < t1) {
    if (++steps > opt.max_steps) throw Error(ErrorCode::StepSizeUnderflow, "maximum number of steps exceeded");
    const double hmin = opt.min_step * std::max(1.0, std::abs(t));
    bool last = false;
    if (t + h >= t1) {
      h = t1 - t;
      last = true;
    }
    if (h < hmin && !last) {
      std::ostringstream os;
      os << "step size " << h << " fell below " << hmin << " at t=" << t;
      throw Error(ErrorCode::StepSizeUnderflow, os.str());
    }

    ytmp = y + h * a21 * k1;
    k2 = f(ytmp);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    k3 = f(ytmp);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    k4 = f(ytmp);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    k5 = f(ytmp);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    k6 = f(ytmp);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    k7 = f(ynew);
    stats.rhs_evaluations += 6;
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    if (!ynew.allFinite() || !k7.allFinite()) {
      if (h <= hmin) throw Error(ErrorCode::NonFiniteState, "state became non-finite");
      h *= 0.25;
      ++stats.rejected;
      continue;
    }
    if (opt.keep_nonnegative && ynew.minCoeff() < -opt.atol) {
      ++stats.positivity_rejections;
      ++stats.rejected;
      h *= 0.5;
      continue;
    }

    const double en = error_norm(y, ynew, err);
    if (en <= 1.0) {
      t = last ? t1 : t + h;
      y = ynew;
      if (opt.keep_nonnegative) y = y.cwiseMax(0.0);
      k1 = (opt.keep_nonnegative && y != ynew) ? f(y) : k7;
      ++stats.accepted;
      stats.max_error_estimate = std::max(stats.max_error_estimate, en);
      stats.last_step = h;
      if (!call_observer(t, y)) return t;
      const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
      h = std::min(h * fac, opt.max_step);
    } else {
      ++stats.rejected;
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
    }
  }
  return t;
}

}  // namespace coinfect::ode
