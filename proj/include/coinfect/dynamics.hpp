#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "coinfect/equilibria.hpp"
#include "coinfect/integrator.hpp"
#include "coinfect/system.hpp"

namespace coinfect {

struct Trajectory {
  std::vector<double> times;
  std::vector<StatePoint> states;
  std::vector<double> v_values;  // filled by attach_lyapunov
  ode::StepStats step_stats;

  std::size_t size() const { return times.size(); }
  const StatePoint& final_state() const { return states.back(); }
};

/// Positive coordinates are integrated as ln y, so the tolerances apply to
/// the logarithms.
struct IntegrateOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  /// Upper bound on the step; 0 selects horizon / 200 so that at least 200
  /// samples are recorded.
  double max_step = 0.0;
  /// Record every n-th accepted step (the first and last are always kept).
  int sample_stride = 1;
};

inline IntegrateOptions infinite_k_defaults() {
  IntegrateOptions o;
  o.rtol = 1e-10;
  o.atol = 1e-12;
  return o;
}

namespace detail {

inline void require_initial_state(const StatePoint& y0) {
  if (!y0.allFinite() || y0.minCoeff() < 0.0)
    throw Error(ErrorCode::InvalidArgument, "initial state must be finite and nonnegative");
}

inline ode::StepperOptions stepper_options(const IntegrateOptions& o, double horizon) {
  ode::StepperOptions s;
  s.rtol = o.rtol;
  s.atol = o.atol;
  s.max_step = o.max_step > 0 ? o.max_step : horizon / 200.0;
  return s;
}

// Positive coordinates evolve as u = ln y with du/dt = F(y); zero
// coordinates stay zero and are carried as u = 0 with zero derivative.
struct LogCoordinates {
  std::array<bool, 4> active{};

  explicit LogCoordinates(const StatePoint& y0) {
    for (int i = 0; i < 4; ++i) active[i] = y0[i] > 0.0;
  }
  StatePoint to_log(const StatePoint& y) const {
    StatePoint u = StatePoint::Zero();
    for (int i = 0; i < 4; ++i)
      if (active[i]) u[i] = std::log(y[i]);
    return u;
  }
  StatePoint to_state(const StatePoint& u) const {
    StatePoint y = StatePoint::Zero();
    for (int i = 0; i < 4; ++i)
      if (active[i]) y[i] = std::exp(u[i]);
    return y;
  }
  // V evaluated from u, so it stays finite when exp(u) underflows.
  double lyapunov(const StatePoint& u, const StatePoint& ystar) const {
    StatePoint y = to_state(u);
    double v = 0.0;
    for (int i = 0; i < 4; ++i) {
      if (ystar[i] == 0.0) {
        v += y[i];
      } else if (active[i]) {
        v += y[i] - ystar[i] * u[i];
      } else {
        throw Error(ErrorCode::LogOfNonpositive,
                    "coordinate " + std::to_string(i) + " is 0 where the target is " + std::to_string(ystar[i]));
      }
    }
    return v;
  }
  StatePoint rhs(const SystemForm& form, const StatePoint& u) const {
    StatePoint f = growth_rates(form, to_state(u));
    for (int i = 0; i < 4; ++i)
      if (!active[i]) f[i] = 0.0;
    return f;
  }
};

inline Trajectory integrate_form(const SystemForm& form, const StatePoint& y0, double horizon,
                                 const IntegrateOptions& opt) {
  require_initial_state(y0);
  if (!(horizon > 0)) throw Error(ErrorCode::InvalidArgument, "horizon must be positive");
  Trajectory traj;
  const LogCoordinates lc(y0);
  StatePoint u = lc.to_log(y0);
  const int stride = std::max(1, opt.sample_stride);
  long count = 0;
  auto rhs = [&](const StatePoint& s) -> StatePoint { return lc.rhs(form, s); };
  auto obs = [&](double t, const StatePoint& s) {
    if (count++ % stride == 0 || t >= horizon) {
      traj.times.push_back(t);
      traj.states.push_back(t == 0.0 ? y0 : lc.to_state(s));
    }
  };
  ode::integrate_adaptive(rhs, u, 0.0, horizon, stepper_options(opt, horizon), traj.step_stats, obs);
  if (traj.times.back() < horizon) {
    traj.times.push_back(horizon);
    traj.states.push_back(lc.to_state(u));
  }
  return traj;
}

}  // namespace detail

/// Integrates the four-class system from y0 over [0, horizon]. Coordinates
/// that start at zero stay exactly zero.
inline Trajectory integrate(const AdmissibleParams& p, const StatePoint& y0, double horizon,
                            const IntegrateOptions& opt = {}) {
  return detail::integrate_form(assemble_system(p), y0, horizon, opt);
}

/// Same system with the b S^2 / K term removed.
inline Trajectory integrate_infinite_k(const AdmissibleParams& p, const StatePoint& y0, double horizon,
                                       const IntegrateOptions& opt = infinite_k_defaults()) {
  return detail::integrate_form(assemble_system_infinite(p), y0, horizon, opt);
}

// ---------------------------------------------------------------------------
// Volterra function

/// V(y) = sum_i (y_i - Y*_i ln y_i); terms with Y*_i = 0 keep only y_i.
inline double lyapunov_value(const StatePoint& y, const StatePoint& ystar) {
  double v = 0.0;
  for (int i = 0; i < 4; ++i) {
    v += y[i];
    if (ystar[i] != 0.0) {
      if (!(y[i] > 0.0)) {
        std::ostringstream os;
        os << "coordinate " << i << " is " << y[i] << " where the target is " << ystar[i];
        throw Error(ErrorCode::LogOfNonpositive, os.str());
      }
      v -= ystar[i] * std::log(y[i]);
    }
  }
  return v;
}

/// dV/dt along trajectories: -(b/K)(y0 - Y*0)^2 + sum_i F_i(Y*) y_i.
inline double lyapunov_rate(const SystemForm& form, const StatePoint& y, const StatePoint& ystar) {
  const StatePoint fstar = growth_rates(form, ystar);
  const double d0 = y[0] - ystar[0];
  return form.A(0, 0) * d0 * d0 + fstar.dot(y);
}

struct LyapunovSeries {
  std::vector<double> values;
  double max_increase = 0.0;  // largest positive V(t_{k+1}) - V(t_k)
};

inline LyapunovSeries lyapunov_series(const Trajectory& traj, const StatePoint& ystar) {
  LyapunovSeries s;
  s.values.reserve(traj.size());
  for (const auto& y : traj.states) s.values.push_back(lyapunov_value(y, ystar));
  for (std::size_t k = 1; k < s.values.size(); ++k)
    s.max_increase = std::max(s.max_increase, s.values[k] - s.values[k - 1]);
  return s;
}

inline void attach_lyapunov(Trajectory& traj, const StatePoint& ystar) {
  traj.v_values = lyapunov_series(traj, ystar).values;
}

// ---------------------------------------------------------------------------
// A-priori bounds

enum class BoundKind { LogisticEnvelope, SusceptibleMax, TotalPopulation };

constexpr std::string_view to_string(BoundKind k) {
  switch (k) {
    case BoundKind::LogisticEnvelope: return "logistic_envelope";
    case BoundKind::SusceptibleMax: return "susceptible_max";
    case BoundKind::TotalPopulation: return "total_population";
  }
  return "?";
}

struct BoundViolation {
  BoundKind kind = BoundKind::LogisticEnvelope;
  std::size_t sample = 0;
  double t = 0.0;
  double value = 0.0;
  double bound = 0.0;
};

struct BoundTolerance {
  double rel = 1e-7;
  double abs = 1e-9;
};

/// Bounds on a solution with initial value `y_init` at time t:
/// the logistic envelope of Y0, max{S2, Y0(0)}, and the total-population bound.
class SolutionBounds {
 public:
  SolutionBounds(const AdmissibleParams& p, const StatePoint& y_init)
      : growth_(p.raw().b - p.raw().mu0), S2_(p.derived().S2), y00_(y_init[0]) {
    const ModelParams& m = p.raw();
    const double mu_hat = std::min({m.mu0, m.mu1, m.mu2, m.mu3});
    total_cap_ = std::max(y_init.sum(), m.K * m.b / (4.0 * mu_hat));
    s_cap_ = std::max(S2_, y00_);
  }

  double logistic_envelope(double t) const {
    if (y00_ <= 0.0) return 0.0;
    const double decay = std::exp(-growth_ * t);
    return 1.0 / (-std::expm1(-growth_ * t) / S2_ + decay / y00_);
  }
  double susceptible_cap() const { return s_cap_; }
  double total_cap() const { return total_cap_; }

  template <class Sink>
  void check(std::size_t k, double t, const StatePoint& y, const BoundTolerance& tol, Sink&& sink) const {
    auto test = [&](BoundKind kind, double value, double bound) {
      if (value > bound + tol.rel * std::abs(bound) + tol.abs) sink(BoundViolation{kind, k, t, value, bound});
    };
    test(BoundKind::LogisticEnvelope, y[0], logistic_envelope(t));
    test(BoundKind::SusceptibleMax, y[0], s_cap_);
    test(BoundKind::TotalPopulation, y.sum(), total_cap_);
  }

 private:
  double growth_;
  double S2_;
  double y00_;
  double total_cap_ = 0.0;
  double s_cap_ = 0.0;
};

/// Empty iff every sample satisfies the a-priori bounds (finite K only).
inline std::vector<BoundViolation> bounds_check(const Trajectory& traj, const AdmissibleParams& p,
                                               const BoundTolerance& tol = {}) {
  if (p.has_infinite_capacity())
    throw Error(ErrorCode::InfiniteK, "a-priori bounds are stated for finite K");
  std::vector<BoundViolation> out;
  if (traj.states.empty()) return out;
  const SolutionBounds bounds(p, traj.states.front());
  for (std::size_t k = 0; k < traj.size(); ++k)
    bounds.check(k, traj.times[k] - traj.times.front(), traj.states[k], tol,
                 [&](const BoundViolation& v) { out.push_back(v); });
  return out;
}

// ---------------------------------------------------------------------------
// Recovered class

/// R' = rho . I - mu4' R along the sampled trajectory, with the forcing
/// interpolated linearly between samples and the linear part solved exactly.
inline std::vector<double> integrate_recovered(const AdmissibleParams& p, const Trajectory& traj, double r0) {
  const ModelParams& m = p.raw();
  std::vector<double> r;
  if (traj.size() == 0) return r;
  r.reserve(traj.size());
  auto forcing = [&](const StatePoint& y) { return m.rho1 * y[1] + m.rho2 * y[2] + m.rho3 * y[3]; };
  const double mu = m.mu4p;
  double R = r0;
  r.push_back(R);
  for (std::size_t k = 1; k < traj.size(); ++k) {
    const double h = traj.times[k] - traj.times[k - 1];
    const double g0 = forcing(traj.states[k - 1]);
    const double g1 = forcing(traj.states[k]);
    if (mu == 0.0) {
      R += 0.5 * h * (g0 + g1);
    } else {
      const double x = mu * h;
      const double decay = std::exp(-x);
      // phi1 = (1 - e^-x)/x, phi2 = (x - 1 + e^-x)/x^2, series near 0.
      double phi1, phi2;
      if (x < 1e-4) {
        phi1 = 1.0 - x / 2 + x * x / 6;
        phi2 = 0.5 - x / 6 + x * x / 24;
      } else {
        phi1 = -std::expm1(-x) / x;
        phi2 = (x + std::expm1(-x)) / (x * x);
      }
      // int_0^h e^{-mu(h-s)} (g0 + (g1-g0) s/h) ds
      R = R * decay + h * (g1 * phi2 + g0 * (phi1 - phi2));
    }
    r.push_back(R);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Convergence to the F-stable point

struct ConvergenceOptions {
  IntegrateOptions integration;
  double tol = 1e-4;              // max-norm distance at the horizon
  double initial_horizon = 100.0;
  double max_horizon = 1e6;
  double flat_tol = 1e-9;         // |V(T) - V(T/2)| considered flat
  BoundTolerance bound_tol;
};

struct ConvergenceReport {
  StatePoint target = StatePoint::Zero();
  StatePoint final_state = StatePoint::Zero();
  double horizon = 0.0;
  double final_distance = 0.0;
  bool converged = false;
  double lyapunov_max_increase = 0.0;
  std::vector<BoundViolation> bound_violations;
  long steps = 0;
};

/// Streams the trajectory from y0 without storing it, monitoring V and the
/// a-priori bounds. The horizon doubles from `initial_horizon` until V is
/// flat and the state is within `tol` of the target, or `max_horizon`.
inline ConvergenceReport converge_to(const AdmissibleParams& p, const StatePoint& y0, const StatePoint& target,
                                     const ConvergenceOptions& opt = {}) {
  detail::require_initial_state(y0);
  const SystemForm form = assemble_system(p);
  const SolutionBounds bounds(p, y0);
  ConvergenceReport rep;
  rep.target = target;

  const detail::LogCoordinates lc(y0);
  StatePoint u = lc.to_log(y0);
  StatePoint y = y0;
  double t = 0.0;
  double v_prev = lyapunov_value(y, target);
  std::size_t sample = 0;
  ode::StepStats stats;
  auto rhs = [&](const StatePoint& z) -> StatePoint { return lc.rhs(form, z); };
  auto obs = [&](double tt, const StatePoint& z) {
    const StatePoint s = lc.to_state(z);
    const double v = lc.lyapunov(z, target);
    rep.lyapunov_max_increase = std::max(rep.lyapunov_max_increase, v - v_prev);
    v_prev = v;
    if (rep.bound_violations.size() < 16)
      bounds.check(sample, tt, s, opt.bound_tol, [&](const BoundViolation& bv) { rep.bound_violations.push_back(bv); });
    ++sample;
  };

  double horizon = opt.initial_horizon;
  double v_half = v_prev;
  while (true) {
    ode::StepperOptions so = detail::stepper_options(opt.integration, horizon);
    if (opt.integration.max_step <= 0) so.max_step = opt.initial_horizon / 200.0;
    ode::integrate_adaptive(rhs, u, t, horizon, so, stats, obs);
    y = lc.to_state(u);
    t = horizon;
    const double v_end = v_prev;
    const double dist = (y - target).cwiseAbs().maxCoeff();
    const bool flat = std::abs(v_end - v_half) < opt.flat_tol;
    if ((flat && dist < opt.tol) || horizon >= opt.max_horizon) break;
    v_half = v_end;
    horizon = std::min(2.0 * horizon, opt.max_horizon);
  }
  rep.final_state = y;
  rep.horizon = t;
  rep.final_distance = (y - target).cwiseAbs().maxCoeff();
  rep.converged = rep.final_distance < opt.tol;
  rep.steps = stats.accepted;
  return rep;
}

// ---------------------------------------------------------------------------
// Infinite carrying capacity

enum class InfiniteKRegion { A, B, C };  // E'3, E'5, E'8 selected

constexpr std::string_view to_string(InfiniteKRegion r) {
  switch (r) {
    case InfiniteKRegion::A: return "a";
    case InfiniteKRegion::B: return "b";
    case InfiniteKRegion::C: return "c";
  }
  return "?";
}

struct InfiniteKResult {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  std::vector<Equilibrium> candidates;  // E'3, E'5 and E'8 when Delta != 0
  InfiniteKRegion region = InfiniteKRegion::A;
  FStableResult selected;
};

/// Equilibria of the K = inf system and the F-stable one, chosen by the
/// signs of gamma1 and gamma2 and confirmed by the raw F-check.
inline InfiniteKResult infinite_k_equilibria(const AdmissibleParams& p) {
  if (!p.has_infinite_capacity())
    throw Error(ErrorCode::InvalidArgument, "infinite_k_equilibria needs K = inf");
  const ModelParams& m = p.raw();
  const DerivedConstants& d = p.derived();
  const SystemForm form = assemble_system_infinite(p);
  const double growth = m.b - m.mu0;

  InfiniteKResult res;
  res.gamma1 = d.gamma1;
  res.gamma2 = d.gamma2;
  const double scale1 = std::max(std::abs(m.eta1 * growth), std::abs(m.alpha1 * m.alpha3 * (d.sigma3 - d.sigma1)));
  const double scale2 = std::max(std::abs(m.eta2 * growth), std::abs(m.alpha2 * m.alpha3 * (d.sigma3 - d.sigma2)));
  if (std::abs(d.gamma1) <= kClassifyTolerance * scale1 || std::abs(d.gamma2) <= kClassifyTolerance * scale2) {
    std::ostringstream os;
    os << "gamma1=" << d.gamma1 << ", gamma2=" << d.gamma2 << " on the borderline gamma1*gamma2 = 0";
    throw Error(ErrorCode::BorderlineGamma, os.str());
  }

  auto add = [&](Label l, StatePoint y, StatePoint f) {
    Equilibrium e;
    e.label = l;
    e.y = y;
    e.f = f;
    detail::fill_flags(form, e);
    res.candidates.push_back(std::move(e));
  };
  add(Label::Eprime3, StatePoint(d.sigma1, growth / m.alpha1, 0, 0),
      StatePoint(0, 0, (d.sigma1 - d.sigma2) * m.alpha2, d.gamma1 / m.alpha1));
  add(Label::Eprime5, StatePoint(d.sigma3, 0, 0, growth / m.alpha3),
      StatePoint(0, -d.gamma1 / m.alpha3, d.gamma2 / m.alpha3, 0));
  if (d.S8) {
    const double D = d.Delta;
    add(Label::Eprime8,
        StatePoint(*d.S8, d.gamma2 / D, d.gamma1 / D, (d.sigma2 - d.sigma1) * m.alpha1 * m.alpha2 / D),
        StatePoint::Zero());
  }

  Label pick;
  if (d.gamma1 < 0) {
    res.region = InfiniteKRegion::A;
    pick = Label::Eprime3;
  } else if (d.gamma2 < 0) {
    res.region = InfiniteKRegion::B;
    pick = Label::Eprime5;
  } else {
    res.region = InfiniteKRegion::C;
    pick = Label::Eprime8;
  }
  const auto it = std::find_if(res.candidates.begin(), res.candidates.end(),
                               [&](const Equilibrium& e) { return e.label == pick; });
  if (it == res.candidates.end() || !it->f_stable)
    throw Error(ErrorCode::NoMatch, std::string("region-selected point ") + std::string(to_string(pick)) +
                                        " fails the raw F-stability check");
  res.selected = detail::make_result(form, it->y, {pick}, Method::InfiniteCapacity);
  return res;
}

/// Conserved Volterra-type quantity of each K = inf region:
/// (a) terms 0 and 1, (b) terms 0 and 3, (c) all four.
inline double infinite_k_invariant(const StatePoint& y, const StatePoint& ystar, InfiniteKRegion region) {
  auto term = [&](int i) {
    if (ystar[i] == 0.0) return y[i];
    if (!(y[i] > 0.0)) throw Error(ErrorCode::LogOfNonpositive, "invariant needs positive coordinates");
    return y[i] - ystar[i] * std::log(y[i]);
  };
  switch (region) {
    case InfiniteKRegion::A: return term(0) + term(1);
    case InfiniteKRegion::B: return term(0) + term(3);
    case InfiniteKRegion::C: return term(0) + term(1) + term(2) + term(3);
  }
  return 0.0;
}

/// max_k |I(y_k) - I(y_0)| / max(1, |I(y_0)|).
inline double invariant_drift(const Trajectory& traj, const StatePoint& ystar, InfiniteKRegion region) {
  if (traj.size() == 0) return 0.0;
  const double v0 = infinite_k_invariant(traj.states.front(), ystar, region);
  double drift = 0.0;
  for (const auto& y : traj.states)
    drift = std::max(drift, std::abs(infinite_k_invariant(y, ystar, region) - v0));
  return drift / std::max(1.0, std::abs(v0));
}

}  // namespace coinfect
