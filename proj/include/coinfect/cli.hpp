#pragma once

// Command-line driver: classify, simulate, sweep, lcp and limit.

#include <CLI11.hpp>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "coinfect/config.hpp"
#include "coinfect/dynamics.hpp"
#include "coinfect/equilibria.hpp"
#include "coinfect/lcp.hpp"
#include "coinfect/lcp_model.hpp"
#include "coinfect/sweep.hpp"

namespace coinfect::cli {

using nlohmann::json;

/// 17 significant digits, locale independent.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  }
  CsvWriter& cell(double x) { return raw(format_double(x)); }
  CsvWriter& cell(std::string_view s) { return raw(s); }
  void end_row() {
    out_ << '\n';
    first_ = true;
  }
  void header(std::initializer_list<std::string_view> names) {
    for (auto n : names) cell(n);
    end_row();
  }

 private:
  CsvWriter& raw(std::string_view s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
    return *this;
  }
  std::ofstream out_;
  bool first_ = true;
};

struct RunContext {
  RunConfig cfg;
  json result = json::object();
  json diagnostics = json::object();
  std::vector<std::string> files;
  int exit_code = 0;

  std::filesystem::path output_path(const std::string& name) {
    std::filesystem::path dir(cfg.output.directory);
    std::filesystem::create_directories(dir);
    const auto p = dir / (cfg.output.prefix + name);
    files.push_back(p.generic_string());
    return p;
  }
};

namespace detail {

inline json state_json(const StatePoint& y) { return coinfect::detail::state_json(y); }

inline json labels_json(const std::vector<Label>& labels) {
  json a = json::array();
  for (Label l : labels) a.push_back(std::string(to_string(l)));
  return a;
}

inline json tolerances_json() {
  return {{"classify", kClassifyTolerance},
          {"coincidence", kCoincidenceTolerance},
          {"oracle_agreement", kOracleAgreementTolerance}};
}

inline json f_stable_json(const FStableResult& r) {
  return {{"label", join_labels(r.labels)},     {"labels", labels_json(r.labels)},
          {"point", state_json(r.point)},       {"certificate", state_json(r.f)},
          {"degenerate", r.degenerate},         {"method", std::string(to_string(r.method))}};
}

inline json bound_violations_json(const std::vector<BoundViolation>& v) {
  json a = json::array();
  for (const auto& b : v)
    a.push_back({{"kind", std::string(to_string(b.kind))}, {"t", b.t}, {"value", b.value}, {"bound", b.bound}});
  return a;
}

inline json step_stats_json(const ode::StepStats& s) {
  return {{"accepted", s.accepted},
          {"rejected", s.rejected},
          {"positivity_rejections", s.positivity_rejections},
          {"rhs_evaluations", s.rhs_evaluations},
          {"max_error_estimate", s.max_error_estimate}};
}

/// Target point for V in simulate: the classifier's point, or the selected
/// K = inf equilibrium.
struct Target {
  FStableResult point;
  std::optional<InfiniteKRegion> region;
};

inline Target target_for(const AdmissibleParams& p) {
  if (p.has_infinite_capacity()) {
    const auto ik = infinite_k_equilibria(p);
    return {ik.selected, ik.region};
  }
  return {classify_f_stable(p), std::nullopt};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

inline void cmd_classify(RunContext& ctx) {
  const AdmissibleParams p = validate_params(ctx.cfg.params);
  ctx.diagnostics["tolerances"] = detail::tolerances_json();
  if (p.has_infinite_capacity()) {
    const auto ik = infinite_k_equilibria(p);
    ctx.result = detail::f_stable_json(ik.selected);
    ctx.result["region"] = std::string(to_string(ik.region));
    ctx.result["gamma1"] = ik.gamma1;
    ctx.result["gamma2"] = ik.gamma2;
    json cands = json::array();
    for (const auto& e : ik.candidates)
      cands.push_back({{"label", std::string(to_string(e.label))},
                       {"point", detail::state_json(e.y)},
                       {"f", detail::state_json(e.f)},
                       {"feasible", e.feasible},
                       {"f_stable", e.f_stable}});
    ctx.result["candidates"] = cands;
    return;
  }
  const FStableResult closed = classify_f_stable(p);
  ctx.result = detail::f_stable_json(closed);
  const FStableResult via_lcp = f_stable_via_lcp(p);
  const double gap = (closed.point - via_lcp.point).cwiseAbs().maxCoeff() /
                     std::max(1.0, closed.point.cwiseAbs().maxCoeff());
  if (gap > kOracleAgreementTolerance) {
    std::ostringstream os;
    os << "closed form and LCP routes differ by relative " << gap;
    throw Error(ErrorCode::OracleDisagreement, os.str());
  }
  ctx.diagnostics["lcp_agreement_gap"] = gap;
  ctx.diagnostics["feasible_equilibria"] = count_nonnegative_equilibria(p);
}

inline void cmd_simulate(RunContext& ctx) {
  const AdmissibleParams p = validate_params(ctx.cfg.params);
  const SimulateConfig& s = ctx.cfg.simulate;
  const bool inf = p.has_infinite_capacity();
  IntegrateOptions opt = inf ? infinite_k_defaults() : IntegrateOptions{};
  if (s.rtol > 0) opt.rtol = s.rtol;
  if (s.atol > 0) opt.atol = s.atol;
  opt.sample_stride = s.sample_stride;

  const detail::Target target = detail::target_for(p);
  Trajectory traj = inf ? integrate_infinite_k(p, s.y0, s.horizon, opt) : integrate(p, s.y0, s.horizon, opt);
  const std::vector<double> R = integrate_recovered(p, traj, s.r0);

  bool v_defined = true;
  std::vector<double> V(traj.size(), std::numeric_limits<double>::quiet_NaN());
  try {
    V = lyapunov_series(traj, target.point.point).values;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::LogOfNonpositive) throw;
    v_defined = false;
  }

  if (ctx.cfg.output.write_csv) {
    CsvWriter w(ctx.output_path("trajectory.csv"));
    w.header({"t", "S", "I1", "I2", "I12", "R", "V"});
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const auto& y = traj.states[k];
      w.cell(traj.times[k]).cell(y[0]).cell(y[1]).cell(y[2]).cell(y[3]).cell(R[k]).cell(V[k]);
      w.end_row();
    }
  }

  ctx.result["target"] = detail::f_stable_json(target.point);
  ctx.result["final_state"] = detail::state_json(traj.final_state());
  ctx.result["final_recovered"] = R.back();
  ctx.result["final_distance"] = (traj.final_state() - target.point.point).cwiseAbs().maxCoeff();
  ctx.result["samples"] = traj.size();
  if (v_defined) {
    double max_inc = 0.0;
    for (std::size_t k = 1; k < V.size(); ++k) max_inc = std::max(max_inc, V[k] - V[k - 1]);
    ctx.result["lyapunov_max_increase"] = max_inc;
  } else {
    ctx.result["lyapunov_max_increase"] = nullptr;
    ctx.diagnostics["note"] = "V undefined: a coordinate with positive target value is zero";
  }
  if (inf) {
    ctx.result["region"] = std::string(to_string(*target.region));
    ctx.result["invariant_drift"] = v_defined ? json(invariant_drift(traj, target.point.point, *target.region)) : json(nullptr);
  } else {
    ctx.result["bound_violations"] = detail::bound_violations_json(bounds_check(traj, p));
  }
  ctx.diagnostics["rtol"] = opt.rtol;
  ctx.diagnostics["atol"] = opt.atol;
  ctx.diagnostics["steps"] = detail::step_stats_json(traj.step_stats);
}

inline void cmd_sweep(RunContext& ctx) {
  const SweepConfig& s = ctx.cfg.sweep;
  if (s.grid_points < 2) throw Error(ErrorCode::InvalidArgument, "grid_points must be at least 2");
  SweepOptions opt;
  opt.tol_k = s.tol_k;
  opt.refine = s.refine;
  const TransitionDiagram d = sweep_carrying_capacity(ctx.cfg.params, log_grid(s.k_lo, s.k_hi, s.grid_points), opt);

  if (ctx.cfg.output.write_csv) {
    CsvWriter w(ctx.output_path("sweep.csv"));
    w.header({"K", "label", "Y0", "Y1", "Y2", "Y3"});
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto& y = d.points[i];
      w.cell(d.k_values[i]).cell(join_labels(d.labels[i])).cell(y[0]).cell(y[1]).cell(y[2]).cell(y[3]);
      w.end_row();
    }
    CsvWriter t(ctx.output_path("thresholds.csv"));
    t.header({"K_star", "label_before", "label_after"});
    for (const auto& th : d.thresholds) {
      t.cell(th.k_star).cell(to_string(th.before)).cell(to_string(th.after));
      t.end_row();
    }
  }

  const GammaCheck g = verify_gamma_edges(d);
  const MonotonicityReport m = monotonicity_report(d);
  ctx.result["scenario"] = std::string(to_string(d.scenario));
  ctx.result["runs"] = detail::labels_json(d.runs());
  ctx.result["gamma_edges_ok"] = g.ok;
  if (g.first_violation)
    ctx.result["first_violation"] = {{"before", std::string(to_string(g.first_violation->first))},
                                     {"after", std::string(to_string(g.first_violation->second))},
                                     {"K", d.k_values[g.index]}};
  ctx.result["monotonic"] = m.ok;
  ctx.result["monotonicity_violations"] = m.violations.size();
  json ths = json::array();
  for (const auto& th : d.thresholds)
    ths.push_back({{"K_star", th.k_star},
                   {"before", std::string(to_string(th.before))},
                   {"after", std::string(to_string(th.after))},
                   {"labels_at_K_star", join_labels(th.labels_at_k_star)}});
  ctx.result["thresholds"] = ths;
  json fails = json::array();
  for (const auto& f : d.failures)
    fails.push_back({{"K", f.K}, {"code", std::string(to_string(f.code))}, {"message", f.message}});
  ctx.result["failures"] = fails;
  ctx.diagnostics["grid_points"] = d.size();
  ctx.diagnostics["refined_points"] = d.refined_points;
  ctx.diagnostics["tol_k"] = s.tol_k;
}

/// n on the first line, then M row-major, then q; whitespace separated.
inline lcp::LcpProblem read_lcp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open LCP file " + path);
  std::vector<double> v;
  std::string tok;
  while (in >> tok) v.push_back(coinfect::detail::parse_number(tok, 0));
  if (v.empty() || v[0] < 1 || v[0] != std::floor(v[0]))
    throw Error(ErrorCode::ParseError, path + ": first entry must be the dimension n");
  const auto n = static_cast<Eigen::Index>(v[0]);
  if (static_cast<Eigen::Index>(v.size()) != 1 + n * n + n)
    throw Error(ErrorCode::ParseError, path + ": expected " + std::to_string(n * n + n) + " numbers after n");
  lcp::LcpProblem prob{lcp::Matrix(n, n), lcp::Vector(n)};
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) prob.M(i, j) = v[1 + i * n + j];
  for (Eigen::Index i = 0; i < n; ++i) prob.q(i) = v[1 + n * n + i];
  return prob;
}

inline void cmd_lcp(RunContext& ctx) {
  const lcp::LcpProblem prob = read_lcp_file(ctx.cfg.lcp.matrix);
  const double lambda_min = lcp::min_symmetric_eigenvalue(prob.M);
  const bool pd = lambda_min > 0;
  auto vec_json = [](const lcp::Vector& x) {
    json a = json::array();
    for (Eigen::Index i = 0; i < x.size(); ++i) a.push_back(x[i]);
    return a;
  };
  std::optional<lcp::LcpSolution> primary;
  if (pd) {
    primary = lcp::solve_pd(prob);
    ctx.result["lemke"] = {{"z", vec_json(primary->z)}, {"iterations", primary->iterations},
                           {"residual", primary->residual}};
  }
  json sols = json::array();
  if (prob.size() <= lcp::kMaxEnumerationSize) {
    const auto all = lcp::distinct_solutions(lcp::solve_enumeration(prob));
    for (const auto& s : all) sols.push_back(vec_json(s.z));
    if (!primary && !all.empty()) primary = all.front();
    ctx.result["enumeration"] = sols;
  } else if (!pd) {
    throw Error(ErrorCode::DimensionTooLarge, "enumeration is limited to n <= 20 and M is not positive definite");
  }
  if (!primary) throw Error(ErrorCode::NoMatch, "the LCP has no solution");
  ctx.result["z"] = vec_json(primary->z);
  ctx.result["w"] = vec_json(primary->w);
  ctx.diagnostics["min_symmetric_eigenvalue"] = lambda_min;
  ctx.diagnostics["positive_definite"] = pd;
  if (ctx.cfg.output.write_csv) {
    CsvWriter w(ctx.output_path("lcp.csv"));
    w.header({"i", "z", "w"});
    for (Eigen::Index i = 0; i < primary->z.size(); ++i) {
      w.cell(std::to_string(i)).cell(primary->z[i]).cell(primary->w[i]);
      w.end_row();
    }
  }
}

inline void cmd_limit(RunContext& ctx) {
  const AdmissibleParams p = validate_params(ctx.cfg.params);
  const LimitConfig& l = ctx.cfg.limit;
  if (p.has_infinite_capacity()) {
    const auto ik = infinite_k_equilibria(p);
    const Trajectory traj = integrate_infinite_k(p, l.y0, l.horizon);
    ctx.result["target"] = detail::f_stable_json(ik.selected);
    ctx.result["region"] = std::string(to_string(ik.region));
    ctx.result["final_state"] = detail::state_json(traj.final_state());
    ctx.result["invariant_drift"] = invariant_drift(traj, ik.selected.point, ik.region);
    ctx.diagnostics["steps"] = detail::step_stats_json(traj.step_stats);
    return;
  }
  const FStableResult target = classify_f_stable(p);
  ConvergenceOptions opt;
  opt.initial_horizon = l.horizon;
  opt.max_horizon = std::max(l.horizon, l.max_horizon);
  opt.tol = l.tol;
  const ConvergenceReport rep = converge_to(p, l.y0, target.point, opt);
  ctx.result["target"] = detail::f_stable_json(target);
  ctx.result["final_state"] = detail::state_json(rep.final_state);
  ctx.result["final_distance"] = rep.final_distance;
  ctx.result["converged"] = rep.converged;
  ctx.result["horizon"] = rep.horizon;
  ctx.result["lyapunov_max_increase"] = rep.lyapunov_max_increase;
  ctx.result["bound_violations"] = detail::bound_violations_json(rep.bound_violations);
  ctx.diagnostics["accepted_steps"] = rep.steps;
  if (!rep.converged) {
    std::ostringstream os;
    os << "distance " << rep.final_distance << " to the F-stable point at T=" << rep.horizon;
    throw Error(ErrorCode::NotConverged, os.str());
  }
}

// ---------------------------------------------------------------------------

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline int exit_code_for(ErrorCode c) { return is_numerical_failure(c) ? 2 : 1; }

inline void report_error(std::ostream& err, std::string_view code, std::string_view message) {
  err << json{{"error", {{"code", std::string(code)}, {"message", std::string(message)}}}}.dump() << '\n';
}

/// Entry point; returns the process exit code (0 ok, 1 invalid input,
/// 2 numerical failure).
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Two-strain coinfection model: equilibria, LCP, dynamics and K sweeps"};
  std::string command, config_path, summary_path, output_dir, y0, matrix;
  std::vector<std::string> sets;
  std::optional<double> horizon, rtol, atol, k_lo, k_hi, tol_k;
  std::optional<int> grid_points;
  std::optional<std::string> K;
  app.add_option("command", command, "classify | simulate | sweep | lcp | limit");
  app.add_option("-c,--config", config_path, "configuration file");
  app.add_option("--from-summary", summary_path, "re-run from a JSON summary");
  app.add_option("-o,--output", output_dir, "output directory");
  app.add_option("--set", sets, "override: section.key=value")->take_all();
  app.add_option("--K", K, "carrying capacity (number or inf)");
  app.add_option("--y0", y0, "initial state for simulate/limit, e.g. 1,1,1,1");
  app.add_option("--horizon", horizon);
  app.add_option("--rtol", rtol);
  app.add_option("--atol", atol);
  app.add_option("--k-lo", k_lo);
  app.add_option("--k-hi", k_hi);
  app.add_option("--grid-points", grid_points);
  app.add_option("--tol-k", tol_k);
  app.add_option("--matrix", matrix, "LCP file for the lcp command");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    report_error(err, "ParseError", e.what());
    return 1;
  }

  RunContext ctx;
  try {
    if (!summary_path.empty()) {
      ctx.cfg = config_from_summary(json::parse(read_file(summary_path)));
    } else if (!config_path.empty()) {
      ctx.cfg = parse_config(read_file(config_path));
    }
    RunConfig& c = ctx.cfg;
    if (!command.empty()) c.command = command;
    auto set = [&c](std::string_view section, std::string_view key, const std::string& value) {
      set_config_value(c, section, key, value);
      c.sections.insert(std::string(section));
    };
    for (const auto& s : sets) {
      const auto dot = s.find('.'), eq = s.find('=');
      if (dot == std::string::npos || eq == std::string::npos || dot > eq)
        throw Error(ErrorCode::ParseError, "--set expects section.key=value, got '" + s + "'");
      set(s.substr(0, dot), coinfect::detail::trim(s.substr(dot + 1, eq - dot - 1)), s.substr(eq + 1));
    }
    const std::string block = c.command == "limit" ? "limit" : "simulate";
    if (K) set("params", "K", *K);
    if (!y0.empty()) set(block, "y0", y0);
    if (horizon) set(block, "horizon", format_double(*horizon));
    if (rtol) set("simulate", "rtol", format_double(*rtol));
    if (atol) set("simulate", "atol", format_double(*atol));
    if (k_lo) set("sweep", "k_lo", format_double(*k_lo));
    if (k_hi) set("sweep", "k_hi", format_double(*k_hi));
    if (grid_points) set("sweep", "grid_points", std::to_string(*grid_points));
    if (tol_k) set("sweep", "tol_k", format_double(*tol_k));
    if (!matrix.empty()) set("lcp", "matrix", matrix);
    if (!output_dir.empty()) set("output", "directory", output_dir);
    require_sections(c);

    if (c.command == "classify") cmd_classify(ctx);
    else if (c.command == "simulate") cmd_simulate(ctx);
    else if (c.command == "sweep") cmd_sweep(ctx);
    else if (c.command == "lcp") cmd_lcp(ctx);
    else if (c.command == "limit") cmd_limit(ctx);
  } catch (const Error& e) {
    report_error(err, to_string(e.code()), e.what());
    ctx.exit_code = exit_code_for(e.code());
    if (ctx.result.empty()) return ctx.exit_code;
  } catch (const json::exception& e) {
    report_error(err, "ParseError", e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error(err, "InvalidArgument", e.what());
    return 1;
  }

  json summary;
  summary["command"] = ctx.cfg.command;
  summary["params_echo"] = config_to_json(ctx.cfg);
  summary["result"] = ctx.result;
  summary["diagnostics"] = ctx.diagnostics;
  summary["files"] = ctx.files;
  out << summary.dump(2) << '\n';
  return ctx.exit_code;
}

}  // namespace coinfect::cli
