#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "coinfect/params.hpp"
#include "coinfect/system.hpp"

namespace coinfect {

enum class Label { E1, E2, E3, E4, E5, E6, E7, E8, Eprime3, Eprime5, Eprime8 };

constexpr std::string_view to_string(Label label) {
  switch (label) {
    case Label::E1: return "E1";
    case Label::E2: return "E2";
    case Label::E3: return "E3";
    case Label::E4: return "E4";
    case Label::E5: return "E5";
    case Label::E6: return "E6";
    case Label::E7: return "E7";
    case Label::E8: return "E8";
    case Label::Eprime3: return "Eprime3";
    case Label::Eprime5: return "Eprime5";
    case Label::Eprime8: return "Eprime8";
  }
  return "?";
}

inline std::optional<Label> parse_label(std::string_view text) {
  for (Label l : {Label::E1, Label::E2, Label::E3, Label::E4, Label::E5, Label::E6, Label::E7,
                  Label::E8, Label::Eprime3, Label::Eprime5, Label::Eprime8})
    if (to_string(l) == text) return l;
  return std::nullopt;
}

/// Labels joined with '=', e.g. "E2=E3" for a degenerate point.
inline std::string join_labels(const std::vector<Label>& labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += '=';
    out += to_string(labels[i]);
  }
  return out;
}

/// Tolerance used for classification margins and zero tests.
inline constexpr double kClassifyTolerance = 1e-9;
/// Relative max-norm distance below which two candidate points coincide.
inline constexpr double kCoincidenceTolerance = 1e-6;

struct Equilibrium {
  Label label = Label::E1;
  StatePoint y = StatePoint::Zero();
  StatePoint f = StatePoint::Zero();  // closed-form F-part
  bool feasible = false;
  bool f_stable = false;
  bool degenerate = false;
  double complementarity_residual = 0.0;  // max |y_i F_i(y)| / scale, F evaluated directly
  std::vector<Label> coincident_with;
};

enum class Method { ClosedForm, Lcp, Enumeration, InfiniteCapacity };

constexpr std::string_view to_string(Method m) {
  switch (m) {
    case Method::ClosedForm: return "closed_form";
    case Method::Lcp: return "lcp";
    case Method::Enumeration: return "enumeration";
    case Method::InfiniteCapacity: return "infinite_capacity";
  }
  return "?";
}

struct FStableResult {
  StatePoint point = StatePoint::Zero();
  std::vector<Label> labels;
  Method method = Method::ClosedForm;
  StatePoint f = StatePoint::Zero();               // F(point), evaluated directly
  StatePoint complementarity = StatePoint::Zero();  // point_i * F_i(point)
  bool degenerate = false;

  Label primary() const { return labels.back(); }
};

struct FStableCheck {
  bool f_stable = false;
  StatePoint f = StatePoint::Zero();
  double max_negative_y = 0.0;     // max(0, -min y_i)
  double max_positive_f = 0.0;     // max(0, max F_i)
  double max_complementarity = 0.0;  // max |y_i F_i|
};

/// Raw F-stability test with an absolute tolerance.
inline FStableCheck check_f_stable(const SystemForm& form, const StatePoint& y, double tol) {
  FStableCheck c;
  c.f = growth_rates(form, y);
  c.max_negative_y = std::max(0.0, -y.minCoeff());
  c.max_positive_f = std::max(0.0, c.f.maxCoeff());
  c.max_complementarity = y.cwiseProduct(c.f).cwiseAbs().maxCoeff();
  c.f_stable = c.max_negative_y <= tol && c.max_positive_f <= tol && c.max_complementarity <= tol;
  return c;
}

namespace detail {

/// Per-component magnitude of the terms making up F_i(y).
inline StatePoint growth_scale(const SystemForm& form, const StatePoint& y) {
  return (form.q.cwiseAbs() + form.A.cwiseAbs() * y.cwiseAbs()).cwiseMax(1e-300);
}

inline double point_scale(const StatePoint& y) { return std::max(1.0, y.cwiseAbs().maxCoeff()); }

inline bool points_coincide(const StatePoint& a, const StatePoint& b, double rel_tol) {
  const double scale = std::max(point_scale(a), point_scale(b));
  return (a - b).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

/// a <= b up to a relative margin.
inline bool leq(double a, double b, double tol = kClassifyTolerance) {
  return a <= b + tol * std::max({std::abs(a), std::abs(b), 1e-300});
}

/// x <= 0 where x is a difference of terms of size `scale`.
inline bool nonpositive(double x, double scale, double tol = kClassifyTolerance) {
  return x <= tol * std::max(scale, 1e-300);
}

inline void fill_flags(const SystemForm& form, Equilibrium& e) {
  const double ys = point_scale(e.y);
  const StatePoint direct = growth_scale(form, e.y);
  const StatePoint f_direct = growth_rates(form, e.y);
  e.feasible = e.y.minCoeff() >= -kClassifyTolerance * ys;
  bool f_ok = true;
  bool degenerate = false;
  double resid = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (e.f[i] > kClassifyTolerance * direct[i]) f_ok = false;
    const bool y_zero = std::abs(e.y[i]) <= kClassifyTolerance * ys;
    const bool f_zero = std::abs(e.f[i]) <= kClassifyTolerance * direct[i];
    if (y_zero && f_zero) degenerate = true;
    resid = std::max(resid, std::abs(e.y[i] * f_direct[i]) / (ys * direct[i]));
  }
  e.f_stable = e.feasible && f_ok;
  e.degenerate = degenerate;
  e.complementarity_residual = resid;
}

}  // namespace detail

/// Closed-form candidates E1..E7, plus E8 when Delta != 0, with F-parts and flags.
inline std::vector<Equilibrium> enumerate_candidates(const AdmissibleParams& p) {
  if (p.has_infinite_capacity())
    throw Error(ErrorCode::InfiniteK, "closed-form candidates need finite K; use infinite_k_equilibria");
  const ModelParams& m = p.raw();
  const DerivedConstants& d = p.derived();
  const SystemForm form = assemble_system(p);
  const double bK = m.b / m.K;
  const double a1 = m.alpha1, a2 = m.alpha2, a3 = m.alpha3, e1 = m.eta1, e2 = m.eta2;
  const double S2 = d.S2, S3 = d.S3, S4 = d.S4, S5 = d.S5, S6 = d.S6, S7 = d.S7;
  // (S6 - S8) Delta and (S8 - S7) Delta, well defined even for Delta = 0.
  const double f6 = S6 * d.Delta - d.delta;
  const double f7 = d.delta - S7 * d.Delta;

  std::vector<Equilibrium> out;
  auto add = [&](Label l, StatePoint y, StatePoint f) {
    Equilibrium e;
    e.label = l;
    e.y = y;
    e.f = f;
    out.push_back(std::move(e));
  };

  add(Label::E1, StatePoint::Zero(), -form.q);
  add(Label::E2, StatePoint(S2, 0, 0, 0),
      StatePoint(0, (S2 - S3) * a1, (S2 - S4) * a2, (S2 - S5) * a3));
  add(Label::E3, StatePoint(S3, (S2 - S3) * bK / a1, 0, 0),
      StatePoint(0, 0, (S3 - S4) * a2, (S6 - S3) * bK * e1 / a1));
  add(Label::E4, StatePoint(S4, 0, (S2 - S4) * bK / a2, 0),
      StatePoint(0, (S4 - S3) * a1, 0, (S7 - S4) * bK * e2 / a2));
  add(Label::E5, StatePoint(S5, 0, 0, (S2 - S5) * bK / a3),
      StatePoint(0, (S5 - S6) * bK * e1 / a3, (S5 - S7) * bK * e2 / a3, 0));
  add(Label::E6, StatePoint(S6, (S5 - S6) * a3 / e1, 0, (S6 - S3) * a1 / e1),
      StatePoint(0, 0, f6 / e1, 0));
  add(Label::E7, StatePoint(S7, 0, (S5 - S7) * a3 / e2, (S7 - S4) * a2 / e2),
      StatePoint(0, f7 / e2, 0, 0));
  if (d.S8) {
    const double S8 = *d.S8;
    const double D = d.Delta;
    add(Label::E8,
        StatePoint(S8, (S8 - S7) * bK * e2 / D, (S6 - S8) * bK * e1 / D, (S4 - S3) * a1 * a2 / D),
        StatePoint::Zero());
  }

  for (auto& e : out) detail::fill_flags(form, e);
  for (auto& e : out)
    for (const auto& other : out)
      if (other.label != e.label && detail::points_coincide(e.y, other.y, kClassifyTolerance))
        e.coincident_with.push_back(other.label);
  return out;
}

/// Number of distinct nonnegative equilibria among the closed-form candidates.
inline int count_nonnegative_equilibria(const AdmissibleParams& p) {
  const auto candidates = enumerate_candidates(p);
  std::vector<StatePoint> distinct;
  for (const auto& e : candidates) {
    if (!e.feasible || e.complementarity_residual > 1e-10) continue;
    const bool seen = std::any_of(distinct.begin(), distinct.end(), [&](const StatePoint& y) {
      return detail::points_coincide(y, e.y, kClassifyTolerance);
    });
    if (!seen) distinct.push_back(e.y);
  }
  return static_cast<int>(distinct.size());
}

/// Which of the six F-stability conditions hold, in label order E2, E3, E5, E6, E7, E8.
/// `tol` is the relative slack allowed in each comparison.
inline std::vector<Label> f_stability_conditions(const AdmissibleParams& p, double tol = kClassifyTolerance) {
  const auto leq = [tol](double a, double b) { return detail::leq(a, b, tol); };
  const auto nonpositive = [tol](double x, double scale) { return detail::nonpositive(x, scale, tol); };
  const DerivedConstants& d = p.derived();
  const double s1 = d.sigma1, s2 = d.sigma2, s3 = d.sigma3;
  std::vector<Label> hits;
  if (leq(d.S2, s1)) hits.push_back(Label::E2);
  if (leq(d.S6, s1) && leq(s1, d.S2)) hits.push_back(Label::E3);
  if (leq(s3, d.S2) && leq(s3, d.S6) && leq(s3, d.S7)) hits.push_back(Label::E5);
  {
    const double lhs = d.S6 * d.Delta - d.delta;
    const double scale = std::max(std::abs(d.S6 * d.Delta), std::abs(d.delta));
    if (nonpositive(lhs, scale) && leq(s1, d.S6) && leq(d.S6, s3)) hits.push_back(Label::E6);
  }
  {
    const double lhs = d.delta - d.S7 * d.Delta;
    const double scale = std::max(std::abs(d.S7 * d.Delta), std::abs(d.delta));
    if (nonpositive(lhs, scale) && leq(s2, d.S7) && leq(d.S7, s3)) hits.push_back(Label::E7);
  }
  if (d.S8 && d.Delta > 0) {
    const double S8 = *d.S8;
    if (leq(std::max(0.0, d.S7), S8) && leq(S8, d.S6)) hits.push_back(Label::E8);
  }
  return hits;
}

namespace detail {

inline FStableResult make_result(const SystemForm& form, const StatePoint& y, std::vector<Label> labels,
                                 Method method) {
  FStableResult r;
  r.point = y;
  r.labels = std::move(labels);
  std::sort(r.labels.begin(), r.labels.end());
  r.method = method;
  r.f = growth_rates(form, y);
  r.complementarity = y.cwiseProduct(r.f);
  const double ys = point_scale(y);
  const StatePoint fs = growth_scale(form, y);
  bool degenerate = r.labels.size() > 1;
  for (int i = 0; i < 4; ++i)
    if (std::abs(y[i]) <= kClassifyTolerance * ys && std::abs(r.f[i]) <= kClassifyTolerance * fs[i])
      degenerate = true;
  r.degenerate = degenerate;
  return r;
}

/// Scaled raw check used to confirm a classified point.
inline FStableCheck scaled_check(const SystemForm& form, const StatePoint& y, double rel_tol) {
  FStableCheck c = check_f_stable(form, y, std::numeric_limits<double>::infinity());
  const double ys = point_scale(y);
  const StatePoint fs = growth_scale(form, y);
  bool ok = y.minCoeff() >= -rel_tol * ys;
  for (int i = 0; i < 4; ++i) {
    if (c.f[i] > rel_tol * fs[i]) ok = false;
    if (std::abs(y[i] * c.f[i]) > rel_tol * ys * fs[i]) ok = false;
  }
  c.f_stable = ok;
  return c;
}

}  // namespace detail

/// Labels the unique F-stable point from the explicit inequality conditions.
/// Boundary ties yield several coincident labels; disjoint matches are an error.
inline FStableResult classify_f_stable(const AdmissibleParams& p) {
  const auto candidates = enumerate_candidates(p);
  const SystemForm form = assemble_system(p);
  // Exact comparisons first; the tolerant ones only catch rounding at a tie.
  auto hits = f_stability_conditions(p, 0.0);
  if (hits.empty()) hits = f_stability_conditions(p);
  if (hits.empty())
    throw Error(ErrorCode::NoMatch, "no F-stability condition holds");

  auto point_of = [&](Label l) -> const StatePoint& {
    for (const auto& e : candidates)
      if (e.label == l) return e.y;
    throw Error(ErrorCode::NoMatch, std::string("candidate missing for ") + std::string(to_string(l)));
  };

  // Any hidden constraint missed by the printed conditions shows up in the raw
  // check. Near a tie the proposed points differ by amplified rounding, so
  // only those that pass it are kept.
  std::vector<Label> passing;
  for (Label l : hits)
    if (detail::scaled_check(form, point_of(l), 1e-8).f_stable) passing.push_back(l);
  if (passing.empty()) {
    const Label top = *std::max_element(hits.begin(), hits.end());
    throw Error(ErrorCode::NoMatch,
                std::string("point labelled ") + std::string(to_string(top)) + " fails the raw F-stability check");
  }
  const Label primary = *std::max_element(passing.begin(), passing.end());
  const StatePoint& y = point_of(primary);
  for (Label l : passing) {
    if (!detail::points_coincide(point_of(l), y, kCoincidenceTolerance)) {
      std::ostringstream os;
      os << "conditions for " << to_string(l) << " and " << to_string(primary)
         << " both hold but the points differ";
      throw Error(ErrorCode::MultipleDisjointMatches, os.str());
    }
  }

  std::vector<Label> labels = passing;
  for (const auto& e : candidates)
    if (e.label != Label::E1 && e.label != Label::E4 &&
        std::find(labels.begin(), labels.end(), e.label) == labels.end() && e.f_stable &&
        detail::points_coincide(e.y, y, kClassifyTolerance))
      labels.push_back(e.label);
  return detail::make_result(form, y, std::move(labels), Method::ClosedForm);
}

/// Candidate labels whose points equal `y` within the coincidence tolerance.
inline std::vector<Label> labels_for_point(const AdmissibleParams& p, const StatePoint& y) {
  std::vector<Label> labels;
  for (const auto& e : enumerate_candidates(p))
    if (detail::points_coincide(e.y, y, kCoincidenceTolerance)) labels.push_back(e.label);
  return labels;
}

}  // namespace coinfect
