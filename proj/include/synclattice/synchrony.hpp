#pragma once

// Synchrony patterns. A partition P of the nodes defines the polydiagonal
// X_P = {x : i ~ j  =>  x_i = x_j}. For identical nodes X_P is invariant under
// the coupled flow exactly when P is balanced (equitable): every node of a
// block receives the same total coupling weight from each block.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "synclattice/core_dynamics.hpp"
#include "synclattice/error.hpp"

namespace synclattice {

inline constexpr double kBalanceTolerance = 1e-12;

class Partition {
 public:
  Partition() = default;

  // Any labelling; relabelled canonically (blocks ordered by smallest member).
  explicit Partition(const std::vector<std::size_t>& labels) {
    std::vector<std::size_t> seen_labels;
    block_of_.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      auto it = std::find(seen_labels.begin(), seen_labels.end(), labels[i]);
      std::size_t id;
      if (it == seen_labels.end()) {
        id = seen_labels.size();
        seen_labels.push_back(labels[i]);
        blocks_.emplace_back();
      } else {
        id = static_cast<std::size_t>(it - seen_labels.begin());
      }
      block_of_[i] = id;
      blocks_[id].push_back(i);
    }
  }

  static Partition from_blocks(std::size_t n_nodes, const std::vector<std::vector<std::size_t>>& blocks) {
    constexpr std::size_t unset = static_cast<std::size_t>(-1);
    std::vector<std::size_t> labels(n_nodes, unset);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (blocks[b].empty()) throw InvalidInput("partition block " + std::to_string(b) + " is empty");
      for (std::size_t i : blocks[b]) {
        if (i >= n_nodes) throw InvalidInput("partition references node " + std::to_string(i) + " out of range");
        if (labels[i] != unset) throw InvalidInput("node " + std::to_string(i) + " appears in two blocks");
        labels[i] = b;
      }
    }
    for (std::size_t i = 0; i < n_nodes; ++i)
      if (labels[i] == unset) throw InvalidInput("node " + std::to_string(i) + " is not covered by the partition");
    return Partition(labels);
  }

  static Partition singletons(std::size_t n) {
    std::vector<std::size_t> l(n);
    std::iota(l.begin(), l.end(), std::size_t{0});
    return Partition(l);
  }
  static Partition one_block(std::size_t n) { return Partition(std::vector<std::size_t>(n, 0)); }

  std::size_t n_nodes() const { return block_of_.size(); }
  std::size_t n_blocks() const { return blocks_.size(); }
  std::size_t block_of(std::size_t i) const { return block_of_[i]; }
  const std::vector<std::size_t>& labels() const { return block_of_; }
  const std::vector<std::vector<std::size_t>>& blocks() const { return blocks_; }

  friend bool operator==(const Partition& a, const Partition& b) { return a.block_of_ == b.block_of_; }

 private:
  std::vector<std::size_t> block_of_;
  std::vector<std::vector<std::size_t>> blocks_;
};

// Every block of fine lies inside a block of coarse.
inline bool is_refinement(const Partition& fine, const Partition& coarse) {
  if (fine.n_nodes() != coarse.n_nodes()) throw InvalidInput("partitions cover different node counts");
  for (const auto& block : fine.blocks())
    for (std::size_t i : block)
      if (coarse.block_of(i) != coarse.block_of(block.front())) return false;
  return true;
}

inline double membership_defect(const LatticeSystem& sys, const GlobalState& x, const Partition& p) {
  check_state(sys, x);
  if (p.n_nodes() != sys.n_nodes()) throw InvalidInput("partition size does not match lattice");
  double d = 0.0;
  for (const auto& block : p.blocks())
    for (std::size_t a = 0; a < block.size(); ++a)
      for (std::size_t b = a + 1; b < block.size(); ++b)
        d = std::max(d, node_distance(sys.model(block[a]), x.node(block[a]), x.node(block[b])));
  return d;
}

// Replaces each block by its mean state (circular mean of phases, arithmetic
// mean of planar points). Blocks whose circular mean is undefined take the
// state of their lowest-index node.
inline GlobalState project_to_partition(const LatticeSystem& sys, const GlobalState& x, const Partition& p) {
  check_state(sys, x);
  if (p.n_nodes() != sys.n_nodes()) throw InvalidInput("partition size does not match lattice");
  GlobalState out = x;
  for (const auto& block : p.blocks()) {
    const NodeState first = x.node(block.front());
    const bool already_equal =
        std::all_of(block.begin(), block.end(), [&](std::size_t i) { return x.node(i) == first; });
    if (already_equal) continue;
    NodeState rep = first;
    if (sys.kind() == ModelKind::PhaseOscillator) {
      std::complex<double> z{0.0, 0.0};
      for (std::size_t i : block) z += std::polar(1.0, x.node(i)[0]);
      if (std::abs(z) > 1e-12 * static_cast<double>(block.size())) rep = NodeState::phase(std::arg(z));
    } else {
      double su = 0.0, sv = 0.0;
      for (std::size_t i : block) {
        const NodeState s = x.node(i);
        su += s[0] * std::cos(s[1]);
        sv += s[0] * std::sin(s[1]);
      }
      su /= static_cast<double>(block.size());
      sv /= static_cast<double>(block.size());
      rep = NodeState::planar(std::hypot(su, sv), std::atan2(sv, su));
    }
    for (std::size_t i : block) out.set_node(i, rep);
  }
  return out;
}

namespace detail {

// in[i][c] = total weight node i receives from block c
inline std::vector<std::vector<double>> block_inputs(const CouplingGraph& g, const std::vector<std::size_t>& color,
                                                     std::size_t n_colors) {
  std::vector<std::vector<double>> in(g.n_nodes(), std::vector<double>(n_colors, 0.0));
  for (const Edge& e : g.edges()) in[e.to][color[e.from]] += e.weight;
  return in;
}

inline bool same_inputs(const std::vector<double>& a, const std::vector<double>& b) {
  for (std::size_t k = 0; k < a.size(); ++k)
    if (std::abs(a[k] - b[k]) > kBalanceTolerance) return false;
  return true;
}

}  // namespace detail

inline bool is_balanced(const CouplingGraph& g, const Partition& p) {
  if (p.n_nodes() != g.n_nodes()) throw InvalidInput("partition size does not match graph");
  const auto in = detail::block_inputs(g, p.labels(), p.n_blocks());
  for (const auto& block : p.blocks())
    for (std::size_t i : block)
      if (!detail::same_inputs(in[i], in[block.front()])) return false;
  return true;
}

// Color refinement: split every block by the per-block summed input weights
// until no block splits. The result is the coarsest balanced refinement of init.
inline Partition coarsest_equitable_partition(const CouplingGraph& g, const std::optional<Partition>& init = {}) {
  Partition current = init ? *init : Partition::one_block(g.n_nodes());
  if (current.n_nodes() != g.n_nodes()) throw InvalidInput("initial partition size does not match graph");
  while (true) {
    const auto in = detail::block_inputs(g, current.labels(), current.n_blocks());
    std::vector<std::size_t> next(g.n_nodes());
    std::size_t n_next = 0;
    for (const auto& block : current.blocks()) {
      std::vector<std::size_t> reps;  // one representative node per new color in this block
      std::vector<std::size_t> rep_color;
      for (std::size_t i : block) {
        std::size_t k = 0;
        while (k < reps.size() && !detail::same_inputs(in[i], in[reps[k]])) ++k;
        if (k == reps.size()) {
          reps.push_back(i);
          rep_color.push_back(n_next++);
        }
        next[i] = rep_color[k];
      }
    }
    Partition refined(next);
    if (refined.n_blocks() == current.n_blocks()) return refined;
    current = std::move(refined);
  }
}

// Orbits of the group generated by the given permutations (union-find).
inline Partition partition_from_group_orbits(std::size_t n, const std::vector<Permutation>& generators) {
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  const auto find = [&](std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  for (std::size_t k = 0; k < generators.size(); ++k) {
    const Permutation& g = generators[k];
    if (g.size() != n) throw InvalidInput("generator " + std::to_string(k) + " has the wrong length");
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = find(i), b = find(g(i));
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = find(i);
  return Partition(labels);
}

struct InvarianceReport {
  Partition partition;
  double horizon = 0.0;
  double max_defect = 0.0;
  std::vector<std::pair<double, double>> defect_series;  // (time, membership defect)
};

// Integrates from x0 (which must lie on X_P) and records the membership defect
// at n_samples equispaced times in [0, horizon].
inline InvarianceReport invariance_report(const LatticeSystem& sys, const Partition& p, const GlobalState& x0,
                                          double horizon, double dt, std::size_t n_samples) {
  if (n_samples < 2) throw InvalidInput("invariance report needs at least 2 samples");
  if (!(horizon > 0.0)) throw InvalidInput("horizon must be positive");
  if (!(dt > 0.0) || dt > sys.max_step()) throw InvalidInput("integration step out of range");
  const double initial = membership_defect(sys, x0, p);
  if (!(initial < 1e-9))
    throw PreconditionFailure("initial state is not on the polydiagonal (defect " + std::to_string(initial) + ")");
  InvarianceReport r{p, horizon, 0.0, {}};
  const double interval = horizon / static_cast<double>(n_samples - 1);
  detail::CoupledIntegrator integ(sys);
  auto y = integ.to_work(x0);
  r.defect_series.emplace_back(0.0, initial);
  r.max_defect = initial;
  for (std::size_t k = 1; k < n_samples; ++k) {
    integ.advance(y, interval, dt, interval * static_cast<double>(k - 1));
    const double d = membership_defect(sys, integ.from_work(y), p);
    r.defect_series.emplace_back(interval * static_cast<double>(k), d);
    r.max_defect = std::max(r.max_defect, d);
  }
  return r;
}

}  // namespace synclattice
