#pragma once

// Run configuration: a line-oriented `key = value` format with [section]
// headers, plus a JSON echo used to re-run a previous invocation.

#include <charconv>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "coinfect/params.hpp"
#include "coinfect/system.hpp"

namespace coinfect {

struct SimulateConfig {
  StatePoint y0 = StatePoint(1.0, 1.0, 1.0, 1.0);
  double horizon = 100.0;
  double rtol = 0.0;  // 0 selects the default of the finite or infinite K integrator
  double atol = 0.0;
  double r0 = 0.0;
  int sample_stride = 1;
};

struct SweepConfig {
  double k_lo = 1.0;
  double k_hi = 200.0;
  int grid_points = 400;
  double tol_k = 1e-6;
  bool refine = true;
};

struct LcpConfig {
  std::string matrix;  // path: n, then M row-major, then q
};

struct LimitConfig {
  StatePoint y0 = StatePoint(1.0, 1.0, 1.0, 1.0);
  double horizon = 100.0;  // initial horizon; doubled until V flattens
  double max_horizon = 1e6;
  double tol = 1e-4;
};

struct OutputConfig {
  std::string directory = ".";
  std::string prefix;
  bool write_csv = true;
};

struct RunConfig {
  std::string command;  // classify, simulate, sweep, lcp or limit
  ModelParams params;
  SimulateConfig simulate;
  SweepConfig sweep;
  LcpConfig lcp;
  LimitConfig limit;
  OutputConfig output;
  std::set<std::string> sections;      // sections present in the input
  std::set<std::string> params_given;  // [params] keys present
};

inline const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> c = {"classify", "simulate", "sweep", "lcp", "limit"};
  return c;
}

inline const std::vector<std::string>& param_keys() {
  static const std::vector<std::string> k = {"b",      "K",      "mu0",  "mu1",  "mu2",  "mu3",  "alpha1", "alpha2",
                                             "alpha3", "eta1",   "eta2", "rho1", "rho2", "rho3", "mu4p"};
  return k;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string where(int line) { return line > 0 ? "line " + std::to_string(line) + ": " : ""; }

inline double parse_number(std::string_view text, int line, bool allow_inf = false) {
  text = trim(text);
  if (allow_inf && (text == "inf" || text == "Inf" || text == "infinity")) return kInfiniteCapacity;
  double v = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty() || !std::isfinite(v))
    throw Error(ErrorCode::ParseError, where(line) + "expected a finite number, got '" + std::string(text) + "'");
  return v;
}

inline int parse_int(std::string_view text, int line) {
  text = trim(text);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw Error(ErrorCode::ParseError, where(line) + "expected an integer, got '" + std::string(text) + "'");
  return v;
}

inline bool parse_bool(std::string_view text, int line) {
  text = trim(text);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw Error(ErrorCode::ParseError, where(line) + "expected true or false, got '" + std::string(text) + "'");
}

/// Four numbers separated by commas and/or whitespace.
inline StatePoint parse_state(std::string_view text, int line) {
  std::string s(text);
  for (char& c : s)
    if (c == ',') c = ' ';
  std::istringstream is(s);
  std::vector<double> v;
  for (std::string tok; is >> tok;) v.push_back(parse_number(tok, line));
  if (v.size() != 4)
    throw Error(ErrorCode::ParseError, where(line) + "expected 4 state coordinates, got " + std::to_string(v.size()));
  return StatePoint(v[0], v[1], v[2], v[3]);
}

inline double* param_slot(ModelParams& p, std::string_view key) {
  if (key == "b") return &p.b;
  if (key == "K") return &p.K;
  if (key == "mu0") return &p.mu0;
  if (key == "mu1") return &p.mu1;
  if (key == "mu2") return &p.mu2;
  if (key == "mu3") return &p.mu3;
  if (key == "alpha1") return &p.alpha1;
  if (key == "alpha2") return &p.alpha2;
  if (key == "alpha3") return &p.alpha3;
  if (key == "eta1") return &p.eta1;
  if (key == "eta2") return &p.eta2;
  if (key == "rho1") return &p.rho1;
  if (key == "rho2") return &p.rho2;
  if (key == "rho3") return &p.rho3;
  if (key == "mu4p") return &p.mu4p;
  return nullptr;
}

[[noreturn]] inline void unknown_key(std::string_view section, std::string_view key, int line) {
  throw Error(ErrorCode::UnknownKey,
              where(line) + "unknown key '" + std::string(key) + "' in [" + std::string(section) + "]");
}

}  // namespace detail

/// Assigns one `key = value` entry. Shared by the file parser and by
/// command-line overrides (line = 0).
inline void set_config_value(RunConfig& cfg, std::string_view section, std::string_view key, std::string_view value,
                             int line = 0) {
  using namespace detail;
  if (section.empty()) {
    if (key != "command") unknown_key("(top level)", key, line);
    cfg.command = std::string(trim(value));
    return;
  }
  if (section == "params") {
    double* slot = param_slot(cfg.params, key);
    if (!slot) unknown_key(section, key, line);
    *slot = parse_number(value, line, key == "K");
    cfg.params_given.insert(std::string(key));
  } else if (section == "simulate") {
    auto& s = cfg.simulate;
    if (key == "y0") s.y0 = parse_state(value, line);
    else if (key == "horizon") s.horizon = parse_number(value, line);
    else if (key == "rtol") s.rtol = parse_number(value, line);
    else if (key == "atol") s.atol = parse_number(value, line);
    else if (key == "r0") s.r0 = parse_number(value, line);
    else if (key == "sample_stride") s.sample_stride = parse_int(value, line);
    else unknown_key(section, key, line);
  } else if (section == "sweep") {
    auto& s = cfg.sweep;
    if (key == "k_lo") s.k_lo = parse_number(value, line);
    else if (key == "k_hi") s.k_hi = parse_number(value, line);
    else if (key == "grid_points") s.grid_points = parse_int(value, line);
    else if (key == "tol_k") s.tol_k = parse_number(value, line);
    else if (key == "refine") s.refine = parse_bool(value, line);
    else unknown_key(section, key, line);
  } else if (section == "lcp") {
    if (key == "matrix") cfg.lcp.matrix = std::string(trim(value));
    else unknown_key(section, key, line);
  } else if (section == "limit") {
    auto& s = cfg.limit;
    if (key == "y0") s.y0 = parse_state(value, line);
    else if (key == "horizon") s.horizon = parse_number(value, line);
    else if (key == "max_horizon") s.max_horizon = parse_number(value, line);
    else if (key == "tol") s.tol = parse_number(value, line);
    else unknown_key(section, key, line);
  } else if (section == "output") {
    auto& s = cfg.output;
    if (key == "directory") s.directory = std::string(trim(value));
    else if (key == "prefix") s.prefix = std::string(trim(value));
    else if (key == "csv") s.write_csv = parse_bool(value, line);
    else unknown_key(section, key, line);
  } else {
    throw Error(ErrorCode::ParseError, where(line) + "unknown section [" + std::string(section) + "]");
  }
}

/// Parses the text of a configuration file. `#` and `;` start comments.
inline RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::string section;
  std::set<std::pair<std::string, std::string>> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto c = raw.find_first_of("#;"); c != std::string_view::npos) raw = raw.substr(0, c);
    const std::string_view line = detail::trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw Error(ErrorCode::ParseError, detail::where(line_no) + "malformed section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      if (cfg.sections.count(section))
        throw Error(ErrorCode::ParseError, detail::where(line_no) + "duplicate section [" + section + "]");
      static const std::set<std::string> known = {"params", "simulate", "sweep", "lcp", "limit", "output"};
      if (!known.count(section))
        throw Error(ErrorCode::ParseError, detail::where(line_no) + "unknown section [" + section + "]");
      cfg.sections.insert(section);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::ParseError, detail::where(line_no) + "expected 'key = value'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw Error(ErrorCode::ParseError, detail::where(line_no) + "empty key");
    if (!seen.insert({section, key}).second)
      throw Error(ErrorCode::ParseError, detail::where(line_no) + "duplicate key '" + key + "'");
    set_config_value(cfg, section, key, value, line_no);
  }
  return cfg;
}

/// Errors unless the sections the command needs are present.
inline void require_sections(const RunConfig& cfg) {
  if (cfg.command.empty()) throw Error(ErrorCode::InvalidArgument, "no command given");
  if (std::find(known_commands().begin(), known_commands().end(), cfg.command) == known_commands().end())
    throw Error(ErrorCode::InvalidArgument, "unknown command '" + cfg.command + "'");
  if (cfg.command == "lcp") {
    if (cfg.lcp.matrix.empty()) throw Error(ErrorCode::MissingSection, "command lcp needs [lcp] matrix = <file>");
    return;
  }
  if (!cfg.sections.count("params")) throw Error(ErrorCode::MissingSection, "missing section [params]");
  for (const auto& k : param_keys()) {
    if (k == "K" && cfg.command == "sweep") continue;
    if (k.rfind("rho", 0) == 0 || k == "mu4p") continue;
    if (!cfg.params_given.count(k)) throw Error(ErrorCode::MissingSection, "[params] is missing key '" + k + "'");
  }
}

// ---------------------------------------------------------------------------
// JSON echo

namespace detail {

inline nlohmann::json state_json(const StatePoint& y) { return {y[0], y[1], y[2], y[3]}; }

inline StatePoint state_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorCode::ParseError, "expected a 4-element array");
  return StatePoint(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

}  // namespace detail

inline nlohmann::json params_json(const ModelParams& p) {
  nlohmann::json j = nlohmann::json::object();
  ModelParams copy = p;
  for (const auto& k : param_keys()) {
    const double v = *detail::param_slot(copy, k);
    if (std::isinf(v))
      j[k] = "inf";
    else
      j[k] = v;
  }
  return j;
}

/// Everything needed to reproduce a run.
inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["params"] = params_json(c.params);
  j["simulate"] = {{"y0", detail::state_json(c.simulate.y0)}, {"horizon", c.simulate.horizon},
                   {"rtol", c.simulate.rtol},                {"atol", c.simulate.atol},
                   {"r0", c.simulate.r0},                    {"sample_stride", c.simulate.sample_stride}};
  j["sweep"] = {{"k_lo", c.sweep.k_lo},
                {"k_hi", c.sweep.k_hi},
                {"grid_points", c.sweep.grid_points},
                {"tol_k", c.sweep.tol_k},
                {"refine", c.sweep.refine}};
  j["lcp"] = {{"matrix", c.lcp.matrix}};
  j["limit"] = {{"y0", detail::state_json(c.limit.y0)},
                {"horizon", c.limit.horizon},
                {"max_horizon", c.limit.max_horizon},
                {"tol", c.limit.tol}};
  j["output"] = {{"directory", c.output.directory}, {"prefix", c.output.prefix}, {"csv", c.output.write_csv}};
  return j;
}

/// Rebuilds a configuration from a summary's `command` and `params_echo`.
inline RunConfig config_from_summary(const nlohmann::json& summary) {
  try {
    RunConfig c;
    c.command = summary.at("command").get<std::string>();
    const auto& e = summary.at("params_echo");
    for (const auto& k : param_keys()) {
      const auto& v = e.at("params").at(k);
      *detail::param_slot(c.params, k) = v.is_string() ? detail::parse_number(v.get<std::string>(), 0, true) : v.get<double>();
      c.params_given.insert(k);
    }
    const auto& s = e.at("simulate");
    c.simulate.y0 = detail::state_from_json(s.at("y0"));
    c.simulate.horizon = s.at("horizon").get<double>();
    c.simulate.rtol = s.at("rtol").get<double>();
    c.simulate.atol = s.at("atol").get<double>();
    c.simulate.r0 = s.at("r0").get<double>();
    c.simulate.sample_stride = s.at("sample_stride").get<int>();
    const auto& w = e.at("sweep");
    c.sweep.k_lo = w.at("k_lo").get<double>();
    c.sweep.k_hi = w.at("k_hi").get<double>();
    c.sweep.grid_points = w.at("grid_points").get<int>();
    c.sweep.tol_k = w.at("tol_k").get<double>();
    c.sweep.refine = w.at("refine").get<bool>();
    c.lcp.matrix = e.at("lcp").at("matrix").get<std::string>();
    const auto& l = e.at("limit");
    c.limit.y0 = detail::state_from_json(l.at("y0"));
    c.limit.horizon = l.at("horizon").get<double>();
    c.limit.max_horizon = l.at("max_horizon").get<double>();
    c.limit.tol = l.at("tol").get<double>();
    const auto& o = e.at("output");
    c.output.directory = o.at("directory").get<std::string>();
    c.output.prefix = o.at("prefix").get<std::string>();
    c.output.write_csv = o.at("csv").get<bool>();
    c.sections = {"params", "simulate", "sweep", "lcp", "limit", "output"};
    return c;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("malformed run summary: ") + ex.what());
  }
}

}  // namespace coinfect
