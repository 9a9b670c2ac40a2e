#pragma once

// One-parameter sweeps in the carrying capacity K.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "coinfect/equilibria.hpp"
#include "coinfect/params.hpp"

namespace coinfect {

/// Position on the transition path E2 - E3 - E6 - E8 - E7 - E5.
inline std::optional<int> gamma_position(Label l) {
  switch (l) {
    case Label::E2: return 0;
    case Label::E3: return 1;
    case Label::E6: return 2;
    case Label::E8: return 3;
    case Label::E7: return 4;
    case Label::E5: return 5;
    default: return std::nullopt;
  }
}

inline bool is_gamma_edge(Label a, Label b) {
  const auto pa = gamma_position(a), pb = gamma_position(b);
  return pa && pb && std::abs(*pa - *pb) == 1;
}

/// Representative of a label set at a grid point: the largest label, i.e. the
/// nondegenerate member when several equilibria coincide.
inline Label representative(const std::vector<Label>& labels) {
  return *std::max_element(labels.begin(), labels.end());
}

enum class Scenario { I, II, III, Unknown };

constexpr std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::I: return "i";
    case Scenario::II: return "ii";
    case Scenario::III: return "iii";
    case Scenario::Unknown: return "unknown";
  }
  return "?";
}

struct Threshold {
  double k_star = 0.0;
  double k_lo = 0.0;  // last K classified as `before`
  double k_hi = 0.0;  // first K classified as `after`
  Label before = Label::E2;
  Label after = Label::E3;
  std::vector<Label> labels_at_k_star;
};

struct GridFailure {
  double K = 0.0;
  ErrorCode code = ErrorCode::InadmissibleGridPoint;
  std::string message;
};

struct TransitionDiagram {
  std::vector<double> k_values;
  std::vector<std::vector<Label>> labels;
  std::vector<StatePoint> points;
  std::vector<Threshold> thresholds;
  Scenario scenario = Scenario::Unknown;
  std::vector<GridFailure> failures;
  std::size_t refined_points = 0;

  std::size_t size() const { return k_values.size(); }
  /// Distinct representative labels in order of appearance along the grid.
  std::vector<Label> runs() const {
    std::vector<Label> out;
    for (const auto& ls : labels) {
      const Label r = representative(ls);
      if (out.empty() || out.back() != r) out.push_back(r);
    }
    return out;
  }
};

struct SweepOptions {
  bool refine = true;
  int max_depth = 20;
  bool locate = true;
  double tol_k = 1e-6;  // relative width of threshold brackets
  /// Worker threads for the initial grid; 0 = hardware concurrency,
  /// negative = read COINFECT_THREADS (unset means 0).
  int threads = -1;
};

inline unsigned resolve_thread_count(int requested) {
  if (requested < 0) {
    requested = 0;
    if (const char* env = std::getenv("COINFECT_THREADS")) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end != env && *end == '\0' && v >= 0) requested = static_cast<int>(v);
    }
  }
  if (requested == 0) return std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(requested);
}

/// n log-spaced values from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0) || !(hi > lo) || n < 2) throw Error(ErrorCode::InvalidArgument, "log_grid needs 0 < lo < hi, n >= 2");
  std::vector<double> g(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

namespace detail {

struct GridSample {
  double K = 0.0;
  std::optional<FStableResult> result;
  std::optional<GridFailure> failure;
};

inline GridSample classify_at(const ModelParams& rates, double K) {
  GridSample s;
  s.K = K;
  try {
    ModelParams m = rates;
    m.K = K;
    s.result = classify_f_stable(validate_params(m));
  } catch (const Error& e) {
    const bool validation = !is_numerical_failure(e.code());
    s.failure = GridFailure{K, validation ? ErrorCode::InadmissibleGridPoint : e.code(), e.what()};
  }
  return s;
}

inline Label primary_at(const ModelParams& rates, double K) {
  GridSample s = classify_at(rates, K);
  if (!s.result) throw Error(s.failure->code, s.failure->message);
  return s.result->primary();
}

inline double geometric_mid(double a, double b) { return std::sqrt(a) * std::sqrt(b); }

/// Bisection on the classifier label between K = lo (label a) and K = hi
/// (label != a) until hi/lo - 1 < tol.
inline Threshold bisect_threshold(const ModelParams& rates, double lo, double hi, Label a, Label b, double tol) {
  for (int it = 0; it < 200 && hi / lo - 1.0 >= tol; ++it) {
    const double mid = geometric_mid(lo, hi);
    if (mid <= lo || mid >= hi) break;
    if (primary_at(rates, mid) == a)
      lo = mid;
    else
      hi = mid;
  }
  Threshold t;
  t.k_lo = lo;
  t.k_hi = hi;
  t.k_star = geometric_mid(lo, hi);
  t.before = a;
  t.after = b;
  // Labels are read off much closer to the boundary, where both sides coincide.
  double tlo = lo, thi = hi;
  for (int it = 0; it < 200 && thi / tlo - 1.0 >= 1e-14; ++it) {
    const double mid = geometric_mid(tlo, thi);
    if (mid <= tlo || mid >= thi) break;
    (primary_at(rates, mid) == a ? tlo : thi) = mid;
  }
  // The coincident band lies on whichever side carries the larger label.
  for (double k : {tlo, thi}) {
    GridSample s = classify_at(rates, k);
    if (s.result && s.result->labels.size() > t.labels_at_k_star.size()) t.labels_at_k_star = s.result->labels;
  }
  return t;
}

inline void refine_between(const ModelParams& rates, const GridSample& lo, const GridSample& hi, int depth,
                           std::vector<GridSample>& out) {
  if (depth <= 0) return;
  const Label a = lo.result->primary(), b = hi.result->primary();
  if (a == b || is_gamma_edge(a, b)) return;
  const double mid = geometric_mid(lo.K, hi.K);
  if (mid <= lo.K || mid >= hi.K) return;
  GridSample m = classify_at(rates, mid);
  if (!m.result) {
    out.push_back(std::move(m));
    return;
  }
  refine_between(rates, lo, m, depth - 1, out);
  out.push_back(m);
  refine_between(rates, m, hi, depth - 1, out);
}

inline Scenario detect_scenario(const std::vector<Label>& runs) {
  static const Label chain[] = {Label::E2, Label::E3, Label::E6, Label::E8, Label::E7, Label::E5};
  if (runs.empty() || runs.size() > 6) return Scenario::Unknown;
  // The grid may start past E2, so any contiguous piece of the chain counts.
  const auto* start = std::find(std::begin(chain), std::end(chain), runs.front());
  if (start == std::end(chain) || static_cast<std::size_t>(std::end(chain) - start) < runs.size())
    return Scenario::Unknown;
  for (std::size_t i = 0; i < runs.size(); ++i)
    if (runs[i] != start[i]) return Scenario::Unknown;
  switch (runs.back()) {
    case Label::E3: return Scenario::I;
    case Label::E8: return Scenario::II;
    case Label::E5: return Scenario::III;
    default: return Scenario::Unknown;
  }
}

}  // namespace detail

/// Classifies the F-stable point at each K of the grid (rates.K is ignored).
/// Grid points that fail are recorded in `failures` and skipped.
inline TransitionDiagram sweep_carrying_capacity(const ModelParams& rates, const std::vector<double>& k_grid,
                                                 const SweepOptions& opt = {}) {
  for (std::size_t i = 1; i < k_grid.size(); ++i)
    if (!(k_grid[i] > k_grid[i - 1])) throw Error(ErrorCode::InvalidArgument, "K grid must be strictly increasing");

  std::vector<detail::GridSample> samples(k_grid.size());
  const unsigned nthreads = std::min<std::size_t>(resolve_thread_count(opt.threads), std::max<std::size_t>(1, k_grid.size()));
  if (nthreads <= 1) {
    for (std::size_t i = 0; i < k_grid.size(); ++i) samples[i] = detail::classify_at(rates, k_grid[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < k_grid.size();) samples[i] = detail::classify_at(rates, k_grid[i]);
      });
    for (auto& th : pool) th.join();
  }

  TransitionDiagram d;
  std::vector<detail::GridSample> ok;
  for (auto& s : samples) {
    if (s.result)
      ok.push_back(std::move(s));
    else
      d.failures.push_back(*s.failure);
  }

  if (opt.refine && ok.size() >= 2) {
    std::vector<detail::GridSample> merged;
    merged.push_back(ok.front());
    for (std::size_t i = 1; i < ok.size(); ++i) {
      std::vector<detail::GridSample> extra;
      detail::refine_between(rates, ok[i - 1], ok[i], opt.max_depth, extra);
      for (auto& e : extra) {
        if (e.result) {
          ++d.refined_points;
          merged.push_back(std::move(e));
        } else {
          d.failures.push_back(*e.failure);
        }
      }
      merged.push_back(ok[i]);
    }
    ok = std::move(merged);
  }

  for (const auto& s : ok) {
    d.k_values.push_back(s.K);
    d.labels.push_back(s.result->labels);
    d.points.push_back(s.result->point);
  }

  if (opt.locate) {
    for (std::size_t i = 1; i < ok.size(); ++i) {
      const Label a = ok[i - 1].result->primary(), b = ok[i].result->primary();
      if (a != b) d.thresholds.push_back(detail::bisect_threshold(rates, ok[i - 1].K, ok[i].K, a, b, opt.tol_k));
    }
  }
  d.scenario = detail::detect_scenario(d.runs());
  return d;
}

/// All label changes of the classifier in [k_lo, k_hi], bracketed to
/// relative width tol_k.
inline std::vector<Threshold> locate_thresholds(const ModelParams& rates, double k_lo, double k_hi, double tol_k = 1e-6,
                                                std::size_t probe_points = 64) {
  if (!(k_lo > 0) || !(k_hi > k_lo)) throw Error(ErrorCode::InvalidArgument, "need 0 < k_lo < k_hi");
  if (detail::primary_at(rates, k_lo) == detail::primary_at(rates, k_hi)) {
    std::ostringstream os;
    os << "classification is the same at K=" << k_lo << " and K=" << k_hi;
    throw Error(ErrorCode::NoTransitionInRange, os.str());
  }
  SweepOptions o;
  o.tol_k = tol_k;
  o.threads = 1;
  return sweep_carrying_capacity(rates, log_grid(k_lo, k_hi, std::max<std::size_t>(2, probe_points)), o).thresholds;
}

/// Narrows a threshold bracket further, to relative width `tol`.
inline Threshold refine_threshold(const ModelParams& rates, const Threshold& t, double tol) {
  return detail::bisect_threshold(rates, t.k_lo, t.k_hi, t.before, t.after, tol);
}

/// Scaled max-norm distance between the closed-form candidates for the two
/// labels at K: |a - b|_inf / max(1, |a|_inf).
inline double coincidence_gap(const ModelParams& rates, double K, Label a, Label b) {
  ModelParams m = rates;
  m.K = K;
  const auto cands = enumerate_candidates(validate_params(m));
  const Equilibrium* ea = nullptr;
  const Equilibrium* eb = nullptr;
  for (const auto& c : cands) {
    if (c.label == a) ea = &c;
    if (c.label == b) eb = &c;
  }
  if (!ea || !eb) throw Error(ErrorCode::InvalidArgument, "candidate missing at threshold (Delta = 0?)");
  return (ea->y - eb->y).cwiseAbs().maxCoeff() / std::max(1.0, ea->y.cwiseAbs().maxCoeff());
}

struct GammaCheck {
  bool ok = true;
  std::optional<std::pair<Label, Label>> first_violation;
  std::size_t index = 0;  // grid index of the second point of the violating pair
};

/// True iff every consecutive pair of distinct representative labels is an
/// edge of the transition path. A grid that skips a label counts as a
/// violation.
inline GammaCheck verify_gamma_edges(const TransitionDiagram& d) {
  GammaCheck c;
  for (std::size_t i = 1; i < d.labels.size(); ++i) {
    const Label a = representative(d.labels[i - 1]), b = representative(d.labels[i]);
    if (a != b && !is_gamma_edge(a, b)) {
      c.ok = false;
      c.first_violation = std::make_pair(a, b);
      c.index = i;
      return c;
    }
  }
  return c;
}

struct MonotonicityViolation {
  std::size_t index = 0;
  Label label = Label::E2;
  double y0_prev = 0.0;
  double y0 = 0.0;
  std::string kind;  // "decrease", "not_constant" or "not_increasing"
};

struct MonotonicityReport {
  bool ok = true;
  double max_decrease = 0.0;
  std::vector<MonotonicityViolation> violations;
};

/// Y0* along the grid: nondecreasing overall, constant within runs labeled
/// E3, E5, E8 and strictly increasing within runs labeled E2, E6, E7.
inline MonotonicityReport monotonicity_report(const TransitionDiagram& d, double tol = 1e-9) {
  MonotonicityReport r;
  for (std::size_t i = 1; i < d.points.size(); ++i) {
    const double prev = d.points[i - 1][0], cur = d.points[i][0];
    const double scale = std::max({1.0, std::abs(prev), std::abs(cur)});
    const Label a = representative(d.labels[i - 1]), b = representative(d.labels[i]);
    r.max_decrease = std::max(r.max_decrease, (prev - cur) / scale);
    if (prev - cur > tol * scale) r.violations.push_back({i, b, prev, cur, "decrease"});
    if (a != b) continue;
    if (b == Label::E3 || b == Label::E5 || b == Label::E8) {
      if (std::abs(cur - prev) > tol * scale) r.violations.push_back({i, b, prev, cur, "not_constant"});
    } else if (b == Label::E2 || b == Label::E6 || b == Label::E7) {
      if (!(cur > prev)) r.violations.push_back({i, b, prev, cur, "not_increasing"});
    }
  }
  r.ok = r.violations.empty();
  return r;
}

}  // namespace coinfect
