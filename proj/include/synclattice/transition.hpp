#pragma once

// Synchronization-threshold diagnostics.
//
//   order parameter R(lambda)  time- and replica-averaged distance to the fully
//                              synchronous stratum in the asynchronous metric
//   drift rate                 mean |d/dt| of pairwise phase offsets
//   contraction factor eta     sup of D_async(Phi x, Phi y) / D_async(x, y)
//   transverse multiplier mu   dominant multiplier of the time-t0 map
//                              transverse to the diagonal
//
// For two identical sine-coupled oscillators the offset obeys
// Delta' = -2 lambda sin(Delta), so mu = exp(-2 lambda t0); with frequencies
// differing by dw the offsets lock iff 2 lambda >= dw.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "synclattice/async_metric.hpp"
#include "synclattice/core_dynamics.hpp"
#include "synclattice/error.hpp"
#include "synclattice/random.hpp"

namespace synclattice {

struct ExperimentSpec {
  explicit ExperimentSpec(LatticeSystem sys) : system(std::move(sys)) {}

  LatticeSystem system;  // lambda is overridden per evaluation
  ShiftWindow window{2.0};
  // Window for contraction estimates. Any nonzero window absorbs per-node
  // perturbations of phase oscillators completely, so this defaults to 0.
  ShiftWindow contraction_window{0.0};
  double t_total = 200.0;
  double t_transient = 50.0;
  double dt = kDefaultStep;
  double sample_interval = 0.1;
  std::size_t n_initial_conditions = 4;
  std::uint64_t rng_seed = 0;
  double lock_threshold = 1e-2;
  // Stroboscopic period and near-diagonal pair protocol for eta.
  double t0 = 1.0;
  std::size_t n_pairs = 16;
  double pair_scale = 1e-3;
  // Fixed starting states; when empty, replicas start from seeded random states.
  std::vector<GlobalState> initial_states;

  void validate() const {
    window.validate();
    contraction_window.validate();
    if (!(t_transient >= 0.0) || !(t_transient < t_total) || !std::isfinite(t_total))
      throw InvalidInput("need 0 <= t_transient < t_total");
    if (!(dt > 0.0) || dt > system.max_step()) throw InvalidInput("integration step out of range");
    if (!(sample_interval > 0.0)) throw InvalidInput("sample interval must be positive");
    if (n_initial_conditions < 1 && initial_states.empty()) throw InvalidInput("need at least one initial condition");
    if (!(lock_threshold > 0.0)) throw InvalidInput("lock threshold must be positive");
    if (!(t0 > 0.0)) throw InvalidInput("t0 must be positive");
    for (const auto& x : initial_states) check_state(system, x);
  }

  // Replica r's starting state; random streams depend on (seed, r) only, so
  // every lambda sees the same initial conditions.
  std::vector<GlobalState> starting_states() const {
    if (!initial_states.empty()) return initial_states;
    std::vector<GlobalState> out;
    for (std::size_t r = 0; r < n_initial_conditions; ++r) {
      Rng rng(rng_seed, r);
      out.push_back(random_state(system, rng));
    }
    return out;
  }
};

namespace detail {

inline IntegrationFailure with_lambda(const IntegrationFailure& e, double lambda) {
  return IntegrationFailure(e.node(), e.time(), std::string(e.what()) + " at lambda=" + std::to_string(lambda));
}

}  // namespace detail

// Mean of coarse_distance over samples in [t_transient, t_total], averaged over replicas.
inline double order_parameter(const ExperimentSpec& spec, double lambda) {
  spec.validate();
  if (!(lambda >= 0.0)) throw InvalidInput("lambda must be >= 0");
  const LatticeSystem sys = spec.system.with_lambda(lambda);
  double total = 0.0;
  std::size_t count = 0;
  try {
    for (const GlobalState& x0 : spec.starting_states()) {
      sample_flow(sys, x0, spec.t_total, spec.sample_interval, spec.dt, [&](double t, const GlobalState& x) {
        if (t + 1e-9 < spec.t_transient) return;
        total += coarse_distance(sys, x, spec.window);
        ++count;
      });
    }
  } catch (const IntegrationFailure& e) {
    throw detail::with_lambda(e, lambda);
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

// Mean over node pairs of |d/dt (theta_i - theta_j)|, by finite differences of
// the unwrapped offsets sampled after the transient.
inline double drift_rate(const ExperimentSpec& spec, double lambda) {
  spec.validate();
  if (spec.system.kind() != ModelKind::PhaseOscillator) throw InvalidInput("drift rate requires phase oscillators");
  const LatticeSystem sys = spec.system.with_lambda(lambda);
  const std::size_t n = sys.n_nodes();
  if (n < 2) return 0.0;
  double total = 0.0;
  std::size_t count = 0;
  try {
    for (const GlobalState& x0 : spec.starting_states()) {
      std::optional<GlobalState> prev;
      sample_flow(sys, x0, spec.t_total, spec.sample_interval, spec.dt, [&](double t, const GlobalState& x) {
        if (t + 1e-9 < spec.t_transient) return;
        if (prev) {
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
              const double before = prev->values()[i] - prev->values()[j];
              const double now = x.values()[i] - x.values()[j];
              total += std::abs(phase_difference(now, before)) / spec.sample_interval;
              ++count;
            }
        }
        prev = x;
      });
    }
  } catch (const IntegrationFailure& e) {
    throw detail::with_lambda(e, lambda);
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

struct ContractionEstimate {
  double eta = std::numeric_limits<double>::quiet_NaN();
  std::size_t pairs_used = 0;
  bool conclusive() const { return pairs_used > 0; }
};

namespace detail {

// A synchronized state: every node at phase `phase` (radius 1 for planar nodes).
inline GlobalState diagonal_reference(const LatticeSystem& sys, double phase = 0.0) {
  const NodeState s = sys.kind() == ModelKind::PhaseOscillator ? NodeState::phase(phase) : NodeState::planar(1.0, phase);
  return GlobalState::diagonal(sys.n_nodes(), s);
}

// Adds a tangent vector to a state, re-wrapping phase coordinates.
inline GlobalState displace(const LatticeSystem& sys, const GlobalState& x, const std::vector<double>& v, double h) {
  GlobalState out = x;
  auto vals = out.values();
  const std::size_t dim = sys.state_dim();
  for (std::size_t k = 0; k < vals.size(); ++k) {
    vals[k] += h * v[k];
    if (k % dim == sys.model(0).phase_index()) vals[k] = wrap_phase(vals[k]);
  }
  return out;
}

// Tangent difference a - b (phase coordinates via the shortest signed arc).
inline std::vector<double> tangent_difference(const LatticeSystem& sys, const GlobalState& a, const GlobalState& b) {
  const std::size_t dim = sys.state_dim();
  const std::size_t ph = sys.model(0).phase_index();
  std::vector<double> d(a.values().size());
  for (std::size_t k = 0; k < d.size(); ++k)
    d[k] = k % dim == ph ? phase_difference(a.values()[k], b.values()[k]) : a.values()[k] - b.values()[k];
  return d;
}

// Removes the component along the diagonal tangent (equal phase shift of every node).
inline void project_transverse(const LatticeSystem& sys, std::vector<double>& v) {
  const std::size_t dim = sys.state_dim();
  const std::size_t ph = sys.model(0).phase_index();
  double mean = 0.0;
  for (std::size_t i = 0; i < sys.n_nodes(); ++i) mean += v[i * dim + ph];
  mean /= static_cast<double>(sys.n_nodes());
  for (std::size_t i = 0; i < sys.n_nodes(); ++i) v[i * dim + ph] -= mean;
}

inline double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

}  // namespace detail

// Sup of D_async(Phi^t0 x, Phi^t0 y) / D_async(x, y) over seeded near-diagonal
// pairs. Each pair shares a random diagonal base state; x is displaced from it
// by at most pair_scale per coordinate, and y differs from x by a transverse
// (zero-mean in phase) displacement of the same scale. Pairs with
// D_async(x, y) < 1e-8 are skipped; if all are skipped the estimate is inconclusive.
inline ContractionEstimate contraction_factor(const ExperimentSpec& spec, double lambda, double t0,
                                              std::size_t n_pairs) {
  spec.validate();
  if (!(t0 > 0.0)) throw InvalidInput("t0 must be positive");
  if (n_pairs < 1) throw InvalidInput("need at least one pair");
  const LatticeSystem sys = spec.system.with_lambda(lambda);
  const std::size_t len = sys.n_nodes() * sys.state_dim();
  ContractionEstimate est;
  double eta = 0.0;
  try {
    for (std::size_t k = 0; k < n_pairs; ++k) {
      Rng rng(mix_seed(spec.rng_seed, 0x636f6e7472616374ULL), k);
      const GlobalState base = detail::diagonal_reference(sys, rng.uniform(0.0, kTwoPi));
      std::vector<double> q(len), p(len);
      for (double& e : q) e = rng.uniform(-1.0, 1.0);
      for (double& e : p) e = rng.uniform(-1.0, 1.0);
      detail::project_transverse(sys, p);
      const GlobalState x = detail::displace(sys, base, q, spec.pair_scale);
      const GlobalState y = detail::displace(sys, x, p, spec.pair_scale);
      const double before = d_async(sys, x, y, spec.contraction_window);
      if (before < 1e-8) continue;
      const double after =
          d_async(sys, global_flow(sys, x, t0, spec.dt), global_flow(sys, y, t0, spec.dt), spec.contraction_window);
      eta = std::max(eta, after / before);
      ++est.pairs_used;
    }
  } catch (const IntegrationFailure& e) {
    throw detail::with_lambda(e, lambda);
  }
  if (est.pairs_used > 0) est.eta = eta;
  return est;
}

struct StrobeResult {
  GlobalState fixed_state;
  bool converged = false;
  double residual = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  double strict_sync = 0.0;
};

namespace detail {

// Node states relative to node 0's phase: the quotient by the common rotation.
inline GlobalState phase_offsets(const LatticeSystem& sys, const GlobalState& x) {
  GlobalState out = x;
  const std::size_t ph = sys.model(0).phase_index();
  const double ref = x.node(0)[ph];
  for (std::size_t i = 0; i < sys.n_nodes(); ++i) {
    NodeState s = x.node(i);
    s[ph] = wrap_phase(s[ph] - ref);
    out.set_node(i, s);
  }
  return out;
}

}  // namespace detail

// Iterates the time-t0 map until the phase-offset vector stops moving. A
// frozen offset vector (e.g. lambda = 0) also converges; strict_sync tells
// whether the fixed point is synchronous.
inline StrobeResult stroboscopic_fixed_point(const LatticeSystem& sys, double t0, const GlobalState& x0,
                                             std::size_t max_iter, double tol, double dt = kDefaultStep) {
  if (!(t0 > 0.0)) throw InvalidInput("t0 must be positive");
  if (!(tol > 0.0)) throw InvalidInput("tolerance must be positive");
  check_state(sys, x0);
  StrobeResult r;
  GlobalState x = x0;
  GlobalState offsets = detail::phase_offsets(sys, x);
  const LatticeSystem unit = [&] {
    LatticeSystem::Params p = sys.params();
    p.metric_weights.assign(sys.n_nodes(), 1.0);
    return LatticeSystem(std::move(p));
  }();
  for (std::size_t k = 1; k <= max_iter; ++k) {
    x = global_flow(sys, x, t0, dt);
    GlobalState next = detail::phase_offsets(sys, x);
    r.residual = product_metric(unit, next, offsets);
    offsets = std::move(next);
    r.iterations = k;
    if (r.residual < tol) {
      r.converged = true;
      break;
    }
  }
  r.fixed_state = x;
  r.strict_sync = strict_sync_distance(sys, x);
  return r;
}

struct MultiplierOptions {
  double relax_time = 0.0;  // integrate the diagonal reference this long first
  std::size_t max_iter = 200;
  double tol = 1e-10;       // relative change of successive growth factors
  double fd_step = 1e-6;    // central-difference step
  double dt = kDefaultStep;
  std::uint64_t seed = 0;
};

struct MultiplierEstimate {
  double mu = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  std::size_t iterations = 0;
};

// Power iteration on the linearized time-t0 map restricted to directions
// transverse to the diagonal, with Jacobian-vector products by central
// differences. The reference point advances with the map, so on an invariant
// synchronized orbit this is plain power iteration; on a drifting orbit the
// growth factors never settle and the estimate is their geometric mean (the
// transverse Lyapunov growth per t0), reported as not converged.
inline MultiplierEstimate transverse_multiplier(const LatticeSystem& sys, double t0, const MultiplierOptions& opt = {}) {
  if (!(t0 > 0.0)) throw InvalidInput("t0 must be positive");
  if (opt.max_iter < 1) throw InvalidInput("need at least one iteration");
  GlobalState x = detail::diagonal_reference(sys);
  if (opt.relax_time > 0.0) x = global_flow(sys, x, opt.relax_time, opt.dt);

  const std::size_t len = sys.n_nodes() * sys.state_dim();
  std::vector<double> v(len);
  Rng rng(mix_seed(opt.seed, 0x7472616e73ULL));
  for (double& e : v) e = rng.uniform(-1.0, 1.0);
  detail::project_transverse(sys, v);
  double nv = detail::norm2(v);
  if (nv < 1e-300) throw PreconditionFailure("no directions transverse to the diagonal");
  for (double& e : v) e /= nv;

  MultiplierEstimate est;
  const std::size_t burn_in = std::min<std::size_t>(5, opt.max_iter / 2);
  double log_sum = 0.0;
  std::size_t log_count = 0;
  double prev_growth = -1.0;
  for (std::size_t k = 1; k <= opt.max_iter; ++k) {
    const GlobalState plus = global_flow(sys, detail::displace(sys, x, v, opt.fd_step), t0, opt.dt);
    const GlobalState minus = global_flow(sys, detail::displace(sys, x, v, -opt.fd_step), t0, opt.dt);
    std::vector<double> w = detail::tangent_difference(sys, plus, minus);
    for (double& e : w) e /= 2.0 * opt.fd_step;
    detail::project_transverse(sys, w);
    const double growth = detail::norm2(w);
    if (!(growth > 0.0) || !std::isfinite(growth)) throw IntegrationFailure(0, t0, "degenerate tangent vector");
    for (std::size_t i = 0; i < len; ++i) v[i] = w[i] / growth;
    x = global_flow(sys, x, t0, opt.dt);
    est.iterations = k;
    if (k > burn_in || k == opt.max_iter) {
      log_sum += std::log(growth);
      ++log_count;
    }
    if (prev_growth > 0.0 && std::abs(growth - prev_growth) <= opt.tol * growth) {
      est.converged = true;
      est.mu = growth;
      return est;
    }
    prev_growth = growth;
  }
  est.mu = std::exp(log_sum / static_cast<double>(log_count));
  return est;
}

struct SweepRow {
  double lambda = 0.0;
  double R = std::numeric_limits<double>::quiet_NaN();
  double drift = std::numeric_limits<double>::quiet_NaN();
  double eta = std::numeric_limits<double>::quiet_NaN();
  double mu = std::numeric_limits<double>::quiet_NaN();
  bool classified_coherent = false;
  std::string error;  // empty when every diagnostic succeeded
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

inline MultiplierOptions sweep_multiplier_options(const ExperimentSpec& spec) {
  MultiplierOptions o;
  o.relax_time = spec.t_transient;
  o.max_iter = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::ceil((spec.t_total - spec.t_transient) / spec.t0 - 1e-9)));
  o.dt = spec.dt;
  o.seed = spec.rng_seed;
  return o;
}

inline SweepRow sweep_row(const ExperimentSpec& spec, double lambda) {
  SweepRow row;
  row.lambda = lambda;
  const auto record = [&](auto&& fn, double& slot, const char* name) {
    try {
      slot = fn();
    } catch (const Error& e) {
      if (!row.error.empty()) row.error += "; ";
      row.error += std::string(name) + ": " + e.what();
    }
  };
  record([&] { return order_parameter(spec, lambda); }, row.R, "R");
  record([&] { return drift_rate(spec, lambda); }, row.drift, "drift");
  record([&] { return contraction_factor(spec, lambda, spec.t0, spec.n_pairs).eta; }, row.eta, "eta");
  record([&] { return transverse_multiplier(spec.system.with_lambda(lambda), spec.t0, sweep_multiplier_options(spec)).mu; },
         row.mu, "mu");
  row.classified_coherent = std::isfinite(row.R) && row.R < spec.lock_threshold;
  return row;
}

// One row per lambda; rows are independent and may run on up to `threads`
// workers. Output order and values do not depend on the thread count.
inline SweepResult sweep(const ExperimentSpec& spec, const std::vector<double>& lambdas, unsigned threads = 1) {
  spec.validate();
  if (lambdas.empty()) throw InvalidInput("lambda list is empty");
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    if (!(lambdas[k] >= 0.0) || !std::isfinite(lambdas[k])) throw InvalidInput("lambda values must be finite and >= 0");
    if (k > 0 && !(lambdas[k] > lambdas[k - 1])) throw InvalidInput("lambda values must be strictly increasing");
  }
  SweepResult result;
  result.rows.resize(lambdas.size());
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(lambdas.size())));
  if (threads == 1) {
    for (std::size_t k = 0; k < lambdas.size(); ++k) result.rows[k] = sweep_row(spec, lambdas[k]);
    return result;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < lambdas.size(); k = next++) result.rows[k] = sweep_row(spec, lambdas[k]);
    });
  for (auto& th : pool) th.join();
  return result;
}

// Both bisection endpoints fall on the same side of the lock threshold.
class EndpointClassificationError : public PreconditionFailure {
 public:
  EndpointClassificationError(double r_lo, double r_hi, bool coherent)
      : PreconditionFailure(std::string("both endpoints classified ") + (coherent ? "coherent" : "incoherent") +
                            " (R(lo)=" + std::to_string(r_lo) + ", R(hi)=" + std::to_string(r_hi) + ")"),
        r_lo_(r_lo),
        r_hi_(r_hi) {}

  double r_lo() const noexcept { return r_lo_; }
  double r_hi() const noexcept { return r_hi_; }

 private:
  double r_lo_, r_hi_;
};

struct ThresholdResult {
  double lambda_c = 0.0;
  double R_lo = 0.0;
  double R_hi = 0.0;
  std::size_t evaluations = 0;
};

// Bisection on the coherent/incoherent classification of order_parameter.
// Assumes a single crossing in [lo, hi].
inline ThresholdResult find_lambda_c(const ExperimentSpec& spec, double lo, double hi, double tol) {
  if (!(tol > 0.0)) throw InvalidInput("bisection tolerance must be positive");
  if (!(lo >= 0.0) || !(hi > lo)) throw InvalidInput("need 0 <= lo < hi");
  ThresholdResult r;
  r.R_lo = order_parameter(spec, lo);
  r.R_hi = order_parameter(spec, hi);
  r.evaluations = 2;
  const bool coherent_lo = r.R_lo < spec.lock_threshold;
  const bool coherent_hi = r.R_hi < spec.lock_threshold;
  if (coherent_lo == coherent_hi)
    throw EndpointClassificationError(r.R_lo, r.R_hi, coherent_lo);
  while (hi - lo > 2.0 * tol) {
    const double mid = 0.5 * (lo + hi);
    const bool coherent_mid = order_parameter(spec, mid) < spec.lock_threshold;
    ++r.evaluations;
    if (coherent_mid == coherent_lo)
      lo = mid;
    else
      hi = mid;
  }
  r.lambda_c = 0.5 * (lo + hi);
  return r;
}

}  // namespace synclattice
