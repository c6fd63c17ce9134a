#pragma once

// Run configuration: line-oriented sections with key = value pairs.
//
//   # comment
//   [system]
//   model = phase                 # phase | planar
//   n = 2
//   omega = -0.5, 0.5             # one value is broadcast to every node
//   alpha = 1                     # clock rates
//   graph = complete:2            # ring:N | complete:N | star:N | path:N
//   edges = 0-1:1, 1-2:0.5        # alternative to graph (undirected unless directed = true)
//   coupling = sine               # sine | diffusive
//   lambda = 1.0
//   lambda_grid = 0.1, 0.3, 0.7
//   metric_weights = 1, 1
//   initial = 0, 1                # phases; planar nodes as r:theta
//   [metric]
//   t_max = 2
//   [experiment]
//   blocks = {0,3},{1,4},{2,5}
//   image = 1,2,3,4,5,0           # repeatable: one generator per line
//   [output]
//   csv = out.csv

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "synclattice/async_metric.hpp"
#include "synclattice/core_dynamics.hpp"
#include "synclattice/csv.hpp"
#include "synclattice/error.hpp"
#include "synclattice/synchrony.hpp"

namespace synclattice {

class ConfigError : public Error {
 public:
  ConfigError(std::size_t line, const std::string& what)
      : Error(line > 0 ? "config line " + std::to_string(line) + ": " + what : "config: " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct RunConfig {
  // [system]
  ModelKind model = ModelKind::PhaseOscillator;
  std::size_t n = 0;
  std::vector<double> omega, alpha, metric_weights;
  std::vector<Edge> edges;
  bool directed = false;
  std::string graph_family;  // empty when edges were given explicitly
  CouplingKind coupling = CouplingKind::SineDifference;
  std::optional<double> lambda;
  std::vector<double> lambda_grid;
  std::optional<GlobalState> initial;

  // [metric]
  ShiftWindow window{2.0};

  // [experiment]
  double t_total = 200.0;
  double t_transient = 50.0;
  double dt = kDefaultStep;
  double sample_interval = 0.1;
  std::uint64_t seed = 0;
  std::size_t n_initial = 4;
  double lock_threshold = 1e-2;
  double t0 = 1.0;
  std::size_t n_pairs = 16;
  double pair_scale = 1e-3;
  double contraction_t_max = 0.0;
  std::optional<double> lo, hi, tol;
  std::optional<double> horizon;
  std::size_t n_samples = 101;
  std::optional<Partition> blocks;
  bool check_invariance = false;
  std::vector<Permutation> generators;
  std::vector<double> times;

  // [output]
  std::string csv_path;
  std::string svg_path;

  // Coupled system at the configured lambda (0 when only a grid is given).
  LatticeSystem system(std::optional<double> lambda_override = {}) const {
    LatticeSystem::Params p;
    for (std::size_t i = 0; i < n; ++i)
      p.models.push_back(model == ModelKind::PhaseOscillator ? SubsystemModel::phase_oscillator(omega[i])
                                                             : SubsystemModel::planar_limit_cycle(omega[i]));
    p.rates = alpha;
    p.metric_weights = metric_weights;
    p.graph = directed ? CouplingGraph::directed(n, edges) : CouplingGraph::undirected(n, edges);
    p.coupling = coupling;
    p.lambda = lambda_override ? *lambda_override : lambda.value_or(0.0);
    return LatticeSystem(std::move(p));
  }
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline double to_double(const std::string& s, std::size_t line, const std::string& key) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (!s.empty() && *b == '+') ++b;
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || ptr != e || s.empty() || !std::isfinite(v))
    throw ConfigError(line, "key '" + key + "': expected a number, got '" + s + "'");
  return v;
}

inline std::uint64_t to_uint(const std::string& s, std::size_t line, const std::string& key) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw ConfigError(line, "key '" + key + "': expected a non-negative integer, got '" + s + "'");
  return v;
}

inline std::vector<double> to_doubles(const std::string& s, std::size_t line, const std::string& key) {
  std::vector<double> out;
  if (trim(s).empty()) return out;
  for (const auto& item : split(s, ',')) out.push_back(to_double(item, line, key));
  return out;
}

inline bool to_bool(const std::string& s, std::size_t line, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(line, "key '" + key + "': expected true or false, got '" + s + "'");
}

struct Entry {
  std::string value;
  std::size_t line = 0;
};

inline const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"system",
       {"model", "n", "omega", "alpha", "graph", "edges", "directed", "coupling", "lambda", "lambda_grid",
        "metric_weights", "initial"}},
      {"metric", {"t_max", "grid_points", "refine_tol"}},
      {"experiment",
       {"t_total", "t_transient", "dt", "sample_interval", "seed", "n_initial", "lock_threshold", "t0", "n_pairs",
        "pair_scale", "contraction_t_max", "lo", "hi", "tol", "horizon", "n_samples", "blocks", "check_invariance",
        "image", "times"}},
      {"output", {"csv", "svg"}},
  };
  return keys;
}

// "{0,3},{1,4},{2,5}"
inline Partition parse_blocks(const std::string& s, std::size_t n, std::size_t line) {
  std::vector<std::vector<std::size_t>> blocks;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto open = s.find('{', pos);
    if (open == std::string::npos) {
      if (!trim(s.substr(pos)).empty() && trim(s.substr(pos)) != ",")
        throw ConfigError(line, "key 'blocks': unexpected text '" + trim(s.substr(pos)) + "'");
      break;
    }
    const auto close = s.find('}', open);
    if (close == std::string::npos) throw ConfigError(line, "key 'blocks': unterminated block");
    std::vector<std::size_t> block;
    const std::string inner = s.substr(open + 1, close - open - 1);
    if (trim(inner).empty()) throw ConfigError(line, "key 'blocks': empty block");
    for (const auto& item : split(inner, ',')) block.push_back(to_uint(item, line, "blocks"));
    blocks.push_back(std::move(block));
    pos = close + 1;
  }
  try {
    return Partition::from_blocks(n, blocks);
  } catch (const InvalidInput& e) {
    throw ConfigError(line, std::string("key 'blocks': ") + e.what());
  }
}

inline Permutation parse_image(const std::string& s, std::size_t n, std::size_t line) {
  std::vector<std::size_t> im;
  for (const auto& item : split(s, ',')) im.push_back(to_uint(item, line, "image"));
  if (im.size() != n)
    throw ConfigError(line, "key 'image': expected " + std::to_string(n) + " entries, got " + std::to_string(im.size()));
  try {
    return Permutation(std::move(im));
  } catch (const InvalidInput& e) {
    throw ConfigError(line, std::string("key 'image': ") + e.what());
  }
}

inline std::vector<Edge> family_edges(const std::string& spec, std::size_t n, std::size_t line) {
  const auto parts = split(spec, ':');
  if (parts.size() != 2) throw ConfigError(line, "key 'graph': expected family:N, got '" + spec + "'");
  const std::size_t m = to_uint(parts[1], line, "graph");
  if (m != n) throw ConfigError(line, "key 'graph': family size " + std::to_string(m) + " does not match n = " +
                                          std::to_string(n));
  std::vector<Edge> e;
  const std::string& fam = parts[0];
  if (fam == "ring") {
    if (n < 3) throw ConfigError(line, "key 'graph': ring needs at least 3 nodes");
    for (std::size_t i = 0; i < n; ++i) e.push_back({i, (i + 1) % n, 1.0});
  } else if (fam == "complete") {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) e.push_back({i, j, 1.0});
  } else if (fam == "star") {
    for (std::size_t i = 1; i < n; ++i) e.push_back({0, i, 1.0});
  } else if (fam == "path") {
    for (std::size_t i = 0; i + 1 < n; ++i) e.push_back({i, i + 1, 1.0});
  } else {
    throw ConfigError(line, "key 'graph': unknown family '" + fam + "'");
  }
  return e;
}

// "0-1:1, 1-2:0.5" (weight defaults to 1)
inline std::vector<Edge> parse_edges(const std::string& s, std::size_t n, std::size_t line) {
  std::vector<Edge> out;
  if (trim(s).empty()) return out;
  for (const auto& item : split(s, ',')) {
    const auto colon = item.find(':');
    const std::string pair = trim(item.substr(0, colon));
    const double w = colon == std::string::npos ? 1.0 : to_double(trim(item.substr(colon + 1)), line, "edges");
    const auto dash = pair.find('-');
    if (dash == std::string::npos) throw ConfigError(line, "key 'edges': expected i-j[:w], got '" + item + "'");
    const std::size_t i = to_uint(trim(pair.substr(0, dash)), line, "edges");
    const std::size_t j = to_uint(trim(pair.substr(dash + 1)), line, "edges");
    if (i >= n || j >= n) throw ConfigError(line, "key 'edges': node index out of range in '" + item + "'");
    if (i == j) throw ConfigError(line, "key 'edges': self-loop in '" + item + "'");
    if (w < 0.0) throw ConfigError(line, "key 'edges': negative weight in '" + item + "'");
    out.push_back({i, j, w});
  }
  return out;
}

inline std::vector<double> per_node(const std::vector<double>& v, std::size_t n, std::size_t line,
                                    const std::string& key) {
  if (v.size() == 1) return std::vector<double>(n, v[0]);
  if (v.size() != n)
    throw ConfigError(line, "key '" + key + "': expected 1 or " + std::to_string(n) + " values, got " +
                                std::to_string(v.size()));
  return v;
}

}  // namespace config_detail

inline RunConfig parse_config(std::istream& in) {
  using namespace config_detail;
  std::map<std::string, std::map<std::string, Entry>> sections;
  std::vector<Entry> images;
  std::string section;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (!known_keys().count(section)) throw ConfigError(line_no, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "expected key = value, got '" + line + "'");
    if (section.empty()) throw ConfigError(line_no, "key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!known_keys().at(section).count(key))
      throw ConfigError(line_no, "unknown key '" + key + "' in [" + section + "]");
    if (key == "image") {
      images.push_back({value, line_no});
      continue;
    }
    if (sections[section].count(key)) throw ConfigError(line_no, "duplicate key '" + key + "'");
    sections[section][key] = {value, line_no};
  }

  const auto get = [&](const std::string& sec, const std::string& key) -> const Entry* {
    auto s = sections.find(sec);
    if (s == sections.end()) return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  };
  const auto require = [&](const std::string& sec, const std::string& key) -> const Entry& {
    const Entry* e = get(sec, key);
    if (!e) throw ConfigError(0, "missing required key '" + key + "' in [" + sec + "]");
    return *e;
  };

  RunConfig c;
  {
    const Entry& e = require("system", "n");
    c.n = to_uint(e.value, e.line, "n");
    if (c.n == 0) throw ConfigError(e.line, "key 'n': need at least one node");
  }
  if (const Entry* e = get("system", "model")) {
    if (e->value == "phase") c.model = ModelKind::PhaseOscillator;
    else if (e->value == "planar") c.model = ModelKind::PlanarLimitCycle;
    else throw ConfigError(e->line, "key 'model': expected phase or planar, got '" + e->value + "'");
  }
  {
    const Entry& e = require("system", "omega");
    c.omega = per_node(to_doubles(e.value, e.line, "omega"), c.n, e.line, "omega");
  }
  if (const Entry* e = get("system", "alpha")) {
    c.alpha = per_node(to_doubles(e->value, e->line, "alpha"), c.n, e->line, "alpha");
    for (double a : c.alpha)
      if (!(a > 0.0)) throw ConfigError(e->line, "key 'alpha': rates must be positive");
  } else {
    c.alpha.assign(c.n, 1.0);
  }
  if (const Entry* e = get("system", "metric_weights")) {
    c.metric_weights = per_node(to_doubles(e->value, e->line, "metric_weights"), c.n, e->line, "metric_weights");
    for (double m : c.metric_weights)
      if (!(m > 0.0)) throw ConfigError(e->line, "key 'metric_weights': weights must be positive");
  } else {
    c.metric_weights.assign(c.n, 1.0);
  }
  if (const Entry* e = get("system", "directed")) c.directed = to_bool(e->value, e->line, "directed");
  {
    const Entry* g = get("system", "graph");
    const Entry* ed = get("system", "edges");
    if (g && ed) throw ConfigError(ed->line, "give either 'graph' or 'edges', not both");
    if (!g && !ed) throw ConfigError(0, "missing required key 'graph' (or 'edges') in [system]");
    if (g) {
      c.edges = family_edges(g->value, c.n, g->line);
      c.graph_family = g->value;
      if (c.directed) throw ConfigError(g->line, "graph families are undirected");
    } else {
      c.edges = parse_edges(ed->value, c.n, ed->line);
    }
  }
  if (const Entry* e = get("system", "coupling")) {
    if (e->value == "sine") c.coupling = CouplingKind::SineDifference;
    else if (e->value == "diffusive") c.coupling = CouplingKind::Diffusive;
    else throw ConfigError(e->line, "key 'coupling': expected sine or diffusive, got '" + e->value + "'");
    if (c.coupling == CouplingKind::SineDifference && c.model != ModelKind::PhaseOscillator)
      throw ConfigError(e->line, "sine coupling requires model = phase");
  } else if (c.model == ModelKind::PlanarLimitCycle) {
    c.coupling = CouplingKind::Diffusive;
  }
  if (const Entry* e = get("system", "lambda")) {
    c.lambda = to_double(e->value, e->line, "lambda");
    if (*c.lambda < 0.0) throw ConfigError(e->line, "key 'lambda': must be >= 0");
  }
  if (const Entry* e = get("system", "lambda_grid")) {
    c.lambda_grid = to_doubles(e->value, e->line, "lambda_grid");
    if (c.lambda_grid.empty()) throw ConfigError(e->line, "key 'lambda_grid': empty list");
    for (std::size_t k = 0; k < c.lambda_grid.size(); ++k) {
      if (c.lambda_grid[k] < 0.0) throw ConfigError(e->line, "key 'lambda_grid': values must be >= 0");
      for (std::size_t j = 0; j < k; ++j)
        if (c.lambda_grid[j] == c.lambda_grid[k])
          throw ConfigError(e->line, "key 'lambda_grid': duplicate value " + csv::format(c.lambda_grid[k]));
      if (k > 0 && !(c.lambda_grid[k] > c.lambda_grid[k - 1]))
        throw ConfigError(e->line, "key 'lambda_grid': values must be strictly increasing");
    }
  }
  if (const Entry* e = get("system", "initial")) {
    const auto items = split(e->value, ',');
    if (items.size() != c.n)
      throw ConfigError(e->line, "key 'initial': expected " + std::to_string(c.n) + " node states");
    std::vector<NodeState> nodes;
    for (const auto& item : items) {
      if (c.model == ModelKind::PhaseOscillator) {
        nodes.push_back(NodeState::phase(to_double(item, e->line, "initial")));
      } else {
        const auto rt = split(item, ':');
        if (rt.size() != 2) throw ConfigError(e->line, "key 'initial': planar nodes are given as r:theta");
        nodes.push_back(NodeState::planar(to_double(rt[0], e->line, "initial"), to_double(rt[1], e->line, "initial")));
      }
    }
    c.initial = GlobalState::from_nodes(nodes);
  }

  // [metric]
  if (const Entry* e = get("metric", "t_max")) c.window.t_max = to_double(e->value, e->line, "t_max");
  if (const Entry* e = get("metric", "grid_points")) c.window.grid_points = to_uint(e->value, e->line, "grid_points");
  if (const Entry* e = get("metric", "refine_tol")) c.window.refine_tol = to_double(e->value, e->line, "refine_tol");
  try {
    c.window.validate();
  } catch (const InvalidInput& ex) {
    throw ConfigError(get("metric", "t_max") ? get("metric", "t_max")->line : 0, ex.what());
  }

  // [experiment]
  const auto positive = [&](const char* key, double& slot) {
    if (const Entry* e = get("experiment", key)) {
      slot = to_double(e->value, e->line, key);
      if (!(slot > 0.0)) throw ConfigError(e->line, std::string("key '") + key + "': must be positive");
    }
  };
  positive("t_total", c.t_total);
  positive("dt", c.dt);
  positive("sample_interval", c.sample_interval);
  positive("lock_threshold", c.lock_threshold);
  positive("t0", c.t0);
  if (const Entry* e = get("experiment", "t_transient")) {
    c.t_transient = to_double(e->value, e->line, "t_transient");
    if (!(c.t_transient >= 0.0 && c.t_transient < c.t_total))
      throw ConfigError(e->line, "key 't_transient': need 0 <= t_transient < t_total");
  } else if (c.t_transient >= c.t_total) {
    c.t_transient = 0.25 * c.t_total;
  }
  if (c.dt > 0.1) throw ConfigError(get("experiment", "dt")->line, "key 'dt': must not exceed 0.1");
  if (const Entry* e = get("experiment", "seed")) c.seed = to_uint(e->value, e->line, "seed");
  if (const Entry* e = get("experiment", "n_initial")) {
    c.n_initial = to_uint(e->value, e->line, "n_initial");
    if (c.n_initial == 0) throw ConfigError(e->line, "key 'n_initial': must be >= 1");
  }
  if (const Entry* e = get("experiment", "n_pairs")) {
    c.n_pairs = to_uint(e->value, e->line, "n_pairs");
    if (c.n_pairs == 0) throw ConfigError(e->line, "key 'n_pairs': must be >= 1");
  }
  if (const Entry* e = get("experiment", "pair_scale")) {
    c.pair_scale = to_double(e->value, e->line, "pair_scale");
    if (c.pair_scale < 0.0) throw ConfigError(e->line, "key 'pair_scale': must be >= 0");
  }
  if (const Entry* e = get("experiment", "contraction_t_max")) {
    c.contraction_t_max = to_double(e->value, e->line, "contraction_t_max");
    if (c.contraction_t_max < 0.0) throw ConfigError(e->line, "key 'contraction_t_max': must be >= 0");
  }
  if (const Entry* e = get("experiment", "lo")) c.lo = to_double(e->value, e->line, "lo");
  if (const Entry* e = get("experiment", "hi")) c.hi = to_double(e->value, e->line, "hi");
  if (const Entry* e = get("experiment", "tol")) {
    c.tol = to_double(e->value, e->line, "tol");
    if (!(*c.tol > 0.0)) throw ConfigError(e->line, "key 'tol': must be positive");
  }
  if (c.lo && c.hi && !(*c.lo >= 0.0 && *c.lo < *c.hi))
    throw ConfigError(get("experiment", "hi")->line, "need 0 <= lo < hi");
  if (const Entry* e = get("experiment", "horizon")) {
    c.horizon = to_double(e->value, e->line, "horizon");
    if (!(*c.horizon > 0.0)) throw ConfigError(e->line, "key 'horizon': must be positive");
  }
  if (const Entry* e = get("experiment", "n_samples")) {
    c.n_samples = to_uint(e->value, e->line, "n_samples");
    if (c.n_samples < 2) throw ConfigError(e->line, "key 'n_samples': must be >= 2");
  }
  if (const Entry* e = get("experiment", "blocks")) c.blocks = parse_blocks(e->value, c.n, e->line);
  if (const Entry* e = get("experiment", "check_invariance"))
    c.check_invariance = to_bool(e->value, e->line, "check_invariance");
  for (const Entry& e : images) c.generators.push_back(parse_image(e.value, c.n, e.line));
  if (const Entry* e = get("experiment", "times")) {
    c.times = to_doubles(e->value, e->line, "times");
    for (double t : c.times)
      if (t < 0.0) throw ConfigError(e->line, "key 'times': must be >= 0");
  }

  // [output]
  if (const Entry* e = get("output", "csv")) c.csv_path = e->value;
  if (const Entry* e = get("output", "svg")) c.svg_path = e->value;

  // Cross-field validation through the library's own constructors.
  try {
    (void)c.system();
  } catch (const InvalidInput& ex) {
    throw ConfigError(0, ex.what());
  }
  return c;
}

inline RunConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(0, "cannot open config file " + path);
  return parse_config(f);
}

}  // namespace synclattice
