#pragma once

// Asynchronous evolution metric.
//
// The phase distance of node i is the distance from y to the best time-shifted
// image of x along node i's own uncoupled orbit:
//
//   d_i^phi(x, y) = min_{|t| <= t_max} d_i(phi_i^t(x), y)
//
// and D_async(x, y) = max_i d_i^phi(x_i, y_i), each node choosing its own shift.
// The shift is restricted to a window: over all of R every recurrent orbit
// (a phase oscillator's is the whole circle) collapses the distance to zero.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "synclattice/core_dynamics.hpp"
#include "synclattice/error.hpp"
#include "synclattice/golden_section.hpp"

namespace synclattice {

struct ShiftWindow {
  double t_max = 0.0;
  std::size_t grid_points = 256;
  double refine_tol = 1e-6;

  void validate() const {
    if (!(t_max >= 0.0) || !std::isfinite(t_max)) throw InvalidInput("shift window t_max must be finite and >= 0");
    if (grid_points < 2) throw InvalidInput("shift window needs at least 2 grid points");
    if (!(refine_tol > 0.0)) throw InvalidInput("shift window refine_tol must be positive");
  }
};

// Coarse grid scan over [-t_max, t_max], then golden-section refinement on the
// two grid cells around every discrete local minimum of the scan. Several
// windings of a periodic orbit give several minima, and the smallest grid value
// can sit at a window edge next to a zero just outside it. t = 0 is always
// evaluated, so the result never exceeds d_i(x, y). States that leave every
// bounded set in backward time (planar radius above 1) count as infinitely far.
inline double phase_distance(const SubsystemModel& model, double rate, const NodeState& x, const NodeState& y,
                             const ShiftWindow& w) {
  w.validate();
  check_node_state(model, x);
  check_node_state(model, y);
  const double at_zero = node_distance(model, x, y);
  if (w.t_max == 0.0 || at_zero == 0.0) return at_zero;

  const auto residual = [&](double t) {
    try {
      return node_distance(model, node_flow(model, rate, x, t), y);
    } catch (const IntegrationFailure&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  const std::size_t g = w.grid_points;
  const double spacing = 2.0 * w.t_max / static_cast<double>(g - 1);
  const auto grid_t = [&](std::size_t k) { return k + 1 == g ? w.t_max : -w.t_max + spacing * static_cast<double>(k); };
  std::vector<double> v(g);
  for (std::size_t k = 0; k < g; ++k) v[k] = residual(grid_t(k));
  double best = std::min(at_zero, *std::min_element(v.begin(), v.end()));
  for (std::size_t k = 0; k < g; ++k) {
    if (!std::isfinite(v[k])) continue;
    const bool left_lower = k > 0 && v[k - 1] < v[k], right_lower = k + 1 < g && v[k + 1] < v[k];
    const bool flat = (k == 0 || v[k - 1] == v[k]) && (k + 1 == g || v[k + 1] == v[k]);
    if (left_lower || right_lower || flat) continue;
    const double lo = grid_t(k == 0 ? 0 : k - 1);
    const double hi = grid_t(std::min(k + 1, g - 1));
    best = std::min(best, golden_section_minimize(residual, lo, hi, w.refine_tol).value);
  }
  return best;
}

inline double d_async(const LatticeSystem& sys, const GlobalState& x, const GlobalState& y, const ShiftWindow& w) {
  check_state(sys, x);
  check_state(sys, y);
  double d = 0.0;
  for (std::size_t i = 0; i < sys.n_nodes(); ++i)
    d = std::max(d, phase_distance(sys.model(i), sys.rate(i), x.node(i), y.node(i), w));
  return d;
}

// Candidate diagonal values y for inf over the fully synchronous stratum: every
// node state, the componentwise mean (circular for phases, when defined), and
// the center of the smallest enclosing set: the midpoint of the shortest arc
// covering all phases, or the midpoint of the farthest planar pair.
inline std::vector<NodeState> diagonal_candidates(const LatticeSystem& sys, const GlobalState& x) {
  check_state(sys, x);
  const std::size_t n = sys.n_nodes();
  std::vector<NodeState> out;
  out.reserve(n + 2);
  for (std::size_t i = 0; i < n; ++i) out.push_back(x.node(i));

  if (sys.kind() == ModelKind::PhaseOscillator) {
    std::complex<double> z{0.0, 0.0};
    std::vector<double> th(n);
    for (std::size_t i = 0; i < n; ++i) {
      th[i] = x.node(i)[0];
      z += std::polar(1.0, th[i]);
    }
    if (std::abs(z) > 1e-12 * static_cast<double>(n)) out.push_back(NodeState::phase(std::arg(z)));
    std::sort(th.begin(), th.end());
    // largest gap between consecutive sorted phases, including the wrap-around gap
    double gap = th.front() + kTwoPi - th.back();
    double arc_start = th.front();
    for (std::size_t i = 1; i < n; ++i) {
      if (th[i] - th[i - 1] > gap) {
        gap = th[i] - th[i - 1];
        arc_start = th[i];
      }
    }
    out.push_back(NodeState::phase(arc_start + 0.5 * (kTwoPi - gap)));
  } else {
    double su = 0.0, sv = 0.0;
    std::vector<std::pair<double, double>> p(n);
    for (std::size_t i = 0; i < n; ++i) {
      const NodeState s = x.node(i);
      p[i] = {s[0] * std::cos(s[1]), s[0] * std::sin(s[1])};
      su += p[i].first;
      sv += p[i].second;
    }
    const auto to_state = [](double u, double v) { return NodeState::planar(std::hypot(u, v), std::atan2(v, u)); };
    out.push_back(to_state(su / static_cast<double>(n), sv / static_cast<double>(n)));
    std::size_t bi = 0, bj = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = std::hypot(p[i].first - p[j].first, p[i].second - p[j].second);
        if (d > far) {
          far = d;
          bi = i;
          bj = j;
        }
      }
    out.push_back(to_state(0.5 * (p[bi].first + p[bj].first), 0.5 * (p[bi].second + p[bj].second)));
  }
  return out;
}

// Distance to the diagonal with no time shifts: min_y max_i d_i(x_i, y) over the candidate set.
inline double strict_sync_distance(const LatticeSystem& sys, const GlobalState& x) {
  double best = std::numeric_limits<double>::infinity();
  for (const NodeState& y : diagonal_candidates(sys, x)) {
    double worst = 0.0;
    for (std::size_t i = 0; i < sys.n_nodes(); ++i) worst = std::max(worst, node_distance(sys.model(i), x.node(i), y));
    best = std::min(best, worst);
  }
  return best;
}

// D_async(x, X_coarse): min over candidates y of D_async(x, diag(y)).
inline double coarse_distance(const LatticeSystem& sys, const GlobalState& x, const ShiftWindow& w) {
  w.validate();
  double best = std::numeric_limits<double>::infinity();
  for (const NodeState& y : diagonal_candidates(sys, x)) {
    double worst = 0.0;
    for (std::size_t i = 0; i < sys.n_nodes() && worst < best; ++i)
      worst = std::max(worst, phase_distance(sys.model(i), sys.rate(i), x.node(i), y, w));
    best = std::min(best, worst);
    if (best == 0.0) break;
  }
  return best;
}

inline bool phase_equivalent(const LatticeSystem& sys, const GlobalState& x, const GlobalState& y,
                             const ShiftWindow& w, double tol) {
  if (!(tol > 0.0)) throw InvalidInput("equivalence tolerance must be positive");
  return d_async(sys, x, y, w) < tol;
}

}  // namespace synclattice
