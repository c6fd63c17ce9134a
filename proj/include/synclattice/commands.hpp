#pragma once

// Command implementations behind the synclattice CLI. Each command reads a
// parsed RunConfig, writes its CSV (and optional SVG) files and returns a
// process exit code:
//
//   0 success, 1 parse/config error, 2 analysis precondition failed,
//   3 integration failure.

#include <cstdlib>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "synclattice/async_metric.hpp"
#include "synclattice/config.hpp"
#include "synclattice/core_dynamics.hpp"
#include "synclattice/csv.hpp"
#include "synclattice/svg.hpp"
#include "synclattice/synchrony.hpp"
#include "synclattice/transition.hpp"

namespace synclattice::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kPreconditionError = 2, kIntegrationError = 3 };

struct Overrides {
  std::optional<std::string> out;
  std::optional<std::string> svg;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  unsigned threads = 1;
};

struct Streams {
  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
};

namespace detail {

inline std::string csv_path(const RunConfig& c, const Overrides& o) {
  const std::string p = o.out ? *o.out : c.csv_path;
  if (p.empty()) throw ConfigError(0, "no output path: set csv in [output] or pass --out");
  return p;
}

inline std::string svg_path(const RunConfig& c, const Overrides& o) { return o.svg ? *o.svg : c.svg_path; }

// "runs/out.csv" + "_summary" -> "runs/out_summary.csv"
inline std::string companion(const std::string& path, const std::string& suffix) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + suffix + ".csv";
  return path.substr(0, dot) + suffix + path.substr(dot);
}

inline std::uint64_t seed(const RunConfig& c, const Overrides& o) { return o.seed ? *o.seed : c.seed; }

inline double require_lambda(const RunConfig& c) {
  if (!c.lambda) throw ConfigError(0, "missing required key 'lambda' in [system]");
  return *c.lambda;
}

inline GlobalState start_state(const RunConfig& c, const LatticeSystem& sys, const Overrides& o) {
  if (c.initial) return *c.initial;
  Rng rng(seed(c, o), 0);
  return random_state(sys, rng);
}

inline ExperimentSpec make_spec(const RunConfig& c, const Overrides& o) {
  ExperimentSpec s(c.system());
  s.window = c.window;
  s.contraction_window = ShiftWindow{c.contraction_t_max, c.window.grid_points, c.window.refine_tol};
  s.t_total = c.t_total;
  s.t_transient = c.t_transient;
  s.dt = c.dt;
  s.sample_interval = c.sample_interval;
  s.n_initial_conditions = c.n_initial;
  s.rng_seed = seed(c, o);
  s.lock_threshold = c.lock_threshold;
  s.t0 = c.t0;
  s.n_pairs = c.n_pairs;
  s.pair_scale = c.pair_scale;
  if (c.initial) s.initial_states = {*c.initial};
  return s;
}

inline std::vector<std::string> partition_rows(std::size_t node, const Partition& p) {
  return {std::to_string(node), std::to_string(p.block_of(node))};
}

}  // namespace detail

// Trajectory CSV (time,node,coord,value) plus a companion *_summary.csv with
// per-time strict_sync and coarse_distance.
inline int cmd_simulate(const RunConfig& c, const Overrides& o, Streams io = {}) {
  const LatticeSystem sys = c.system(detail::require_lambda(c));
  const std::string path = detail::csv_path(c, o);
  const GlobalState x0 = detail::start_state(c, sys, o);
  const double horizon = c.horizon.value_or(c.t_total);

  csv::Table traj({"time", "node", "coord", "value"});
  csv::Table summary({"time", "strict_sync", "coarse_distance"});
  sample_flow(sys, x0, horizon, c.sample_interval, c.dt, [&](double t, const GlobalState& x) {
    for (std::size_t i = 0; i < sys.n_nodes(); ++i)
      for (std::size_t k = 0; k < sys.state_dim(); ++k)
        traj.add_row({csv::format(t), std::to_string(i), std::to_string(k), csv::format(x.node(i)[k])});
    summary.add_row({csv::format(t), csv::format(strict_sync_distance(sys, x)), csv::format(coarse_distance(sys, x, c.window))});
  });
  traj.write(path);
  const std::string summary_path = detail::companion(path, "_summary");
  summary.write(summary_path);
  if (!o.quiet) {
    const auto& last = summary.rows().back();
    io.out << "simulated " << sys.n_nodes() << " nodes to t=" << last[0] << "; final strict_sync=" << last[1]
           << ", coarse_distance=" << last[2] << "\n"
           << "wrote " << path << " and " << summary_path << "\n";
  }
  return kOk;
}

// Sweep CSV (lambda,R,drift,eta,mu,coherent) and an optional R(lambda) SVG.
inline int cmd_sweep(const RunConfig& c, const Overrides& o, Streams io = {}) {
  if (c.lambda_grid.empty()) throw ConfigError(0, "missing required key 'lambda_grid' in [system]");
  const std::string path = detail::csv_path(c, o);
  const ExperimentSpec spec = detail::make_spec(c, o);
  const SweepResult res = sweep(spec, c.lambda_grid, o.threads);

  csv::Table t({"lambda", "R", "drift", "eta", "mu", "coherent"});
  std::size_t failed = 0;
  for (const SweepRow& r : res.rows) {
    t.add_row({csv::format(r.lambda), csv::format(r.R), csv::format(r.drift), csv::format(r.eta), csv::format(r.mu),
               r.classified_coherent ? "1" : "0"});
    if (!r.error.empty()) io.err << "lambda=" << csv::format(r.lambda) << ": " << r.error << "\n";
    if (!std::isfinite(r.R)) ++failed;
  }
  t.write(path);
  const std::string svg = detail::svg_path(c, o);
  if (!svg.empty()) {
    svg::LinePlot plot{"Order parameter R versus coupling strength", "lambda", "R", {}};
    svg::Series s{"R", {}, {}};
    for (const SweepRow& r : res.rows) {
      s.x.push_back(r.lambda);
      s.y.push_back(r.R);
    }
    plot.series.push_back(std::move(s));
    svg::write(plot, svg);
  }
  if (!o.quiet) {
    for (const SweepRow& r : res.rows)
      io.out << "lambda=" << csv::format(r.lambda) << " R=" << csv::format(r.R)
             << (r.classified_coherent ? " coherent" : " incoherent") << "\n";
    io.out << "wrote " << path << (svg.empty() ? "" : " and " + svg) << "\n";
  }
  return failed == res.rows.size() ? kIntegrationError : kOk;
}

// Bisection for lambda_c; prints it and writes a one-row CSV.
inline int cmd_threshold(const RunConfig& c, const Overrides& o, Streams io = {}) {
  if (!c.lo || !c.hi || !c.tol) throw ConfigError(0, "missing required keys 'lo', 'hi', 'tol' in [experiment]");
  const std::string path = detail::csv_path(c, o);
  const ExperimentSpec spec = detail::make_spec(c, o);
  ThresholdResult r;
  try {
    r = find_lambda_c(spec, *c.lo, *c.hi, *c.tol);
  } catch (const EndpointClassificationError& e) {
    io.err << "threshold: " << e.what() << "\n";
    io.out << "R(lo)=" << csv::format(e.r_lo()) << " R(hi)=" << csv::format(e.r_hi()) << "\n";
    return kPreconditionError;
  }
  csv::Table t({"lambda_c", "lo", "hi", "tol", "R_lo", "R_hi", "evaluations"});
  t.add_row({csv::format(r.lambda_c), csv::format(*c.lo), csv::format(*c.hi), csv::format(*c.tol),
             csv::format(r.R_lo), csv::format(r.R_hi), std::to_string(r.evaluations)});
  t.write(path);
  io.out << "lambda_c = " << csv::format(r.lambda_c) << "\n";
  if (!o.quiet) io.out << "wrote " << path << "\n";
  return kOk;
}

// node,block of the coarsest balanced refinement of `blocks` (or of the one-block
// partition); with check_invariance, a companion *_defect.csv of time,defect.
inline int cmd_clusters(const RunConfig& c, const Overrides& o, Streams io = {}) {
  const std::string path = detail::csv_path(c, o);
  const LatticeSystem sys = c.system();
  const Partition p = coarsest_equitable_partition(sys.graph(), c.blocks);
  csv::Table t({"node", "block"});
  for (std::size_t i = 0; i < p.n_nodes(); ++i) t.add_row(detail::partition_rows(i, p));
  t.write(path);
  if (!o.quiet) io.out << "balanced partition with " << p.n_blocks() << " block(s); wrote " << path << "\n";
  if (c.check_invariance) {
    const LatticeSystem coupled = c.system(detail::require_lambda(c));
    const GlobalState x0 = project_to_partition(coupled, detail::start_state(c, coupled, o), p);
    const InvarianceReport rep =
        invariance_report(coupled, p, x0, c.horizon.value_or(c.t_total), c.dt, c.n_samples);
    csv::Table d({"time", "defect"});
    for (const auto& [time, defect] : rep.defect_series) d.add_row({csv::format(time), csv::format(defect)});
    const std::string dpath = detail::companion(path, "_defect");
    d.write(dpath);
    io.out << "max defect = " << csv::format(rep.max_defect) << "\n";
    if (!o.quiet) io.out << "wrote " << dpath << "\n";
  }
  return kOk;
}

// generator,time,defect for every configured generator and time, plus the
// orbit partition in a companion *_orbits.csv.
inline int cmd_symmetry(const RunConfig& c, const Overrides& o, Streams io = {}) {
  const std::string path = detail::csv_path(c, o);
  const LatticeSystem sys = c.system(detail::require_lambda(c));
  const GlobalState x = detail::start_state(c, sys, o);
  const std::vector<double> times = c.times.empty() ? std::vector<double>{c.horizon.value_or(10.0)} : c.times;
  csv::Table t({"generator", "time", "defect"});
  double worst = 0.0;
  for (std::size_t g = 0; g < c.generators.size(); ++g)
    for (double time : times) {
      const double d = equivariance_defect(sys, c.generators[g], x, time, c.dt);
      worst = std::max(worst, d);
      t.add_row({std::to_string(g), csv::format(time), csv::format(d)});
    }
  t.write(path);
  const Partition orbits = partition_from_group_orbits(sys.n_nodes(), c.generators);
  csv::Table ot({"node", "block"});
  for (std::size_t i = 0; i < orbits.n_nodes(); ++i) ot.add_row(detail::partition_rows(i, orbits));
  const std::string opath = detail::companion(path, "_orbits");
  ot.write(opath);
  if (!o.quiet)
    io.out << c.generators.size() << " generator(s), max defect = " << csv::format(worst) << ", "
           << orbits.n_blocks() << " orbit(s); wrote " << path << " and " << opath << "\n";
  return kOk;
}

// Maps library exceptions onto the exit-code contract.
inline int run_guarded(const std::function<int()>& fn, std::ostream& err = std::cerr) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const PreconditionFailure& e) {
    err << "error: " << e.what() << "\n";
    return kPreconditionError;
  } catch (const IntegrationFailure& e) {
    err << "error: " << e.what() << "\n";
    return kIntegrationError;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

inline unsigned threads_from_env() {
  const char* v = std::getenv("SYNCLATTICE_THREADS");
  if (!v) return 1;
  const long n = std::strtol(v, nullptr, 10);
  return n > 0 ? static_cast<unsigned>(n) : 1u;
}

}  // namespace synclattice::cli
