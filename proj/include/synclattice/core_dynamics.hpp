#pragma once

// Subsystem models, the coupled lattice, and its flows.
//
// A lattice node is either a phase oscillator (state: theta on the circle) or a
// planar limit cycle (state: (r, theta), r' = r(1 - r^2), theta' = omega). Each
// node runs on its own clock rate alpha_i, which rescales the intrinsic field
// only; coupling acts in global time:
//
//   x_i' = alpha_i f(x_i) + lambda * sum_j w_ij g(x_j, x_i)
//
// with g = sin(theta_j - theta_i) (SineDifference) or g = x_j - x_i (Diffusive).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "synclattice/error.hpp"
#include "synclattice/random.hpp"

namespace synclattice {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kDefaultStep = 1e-3;
inline constexpr std::size_t kMaxStateDim = 2;

// ---------------------------------------------------------------------------
// Circle helpers

inline double wrap_phase(double theta) {
  double w = std::fmod(theta, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  // fmod of a tiny negative number can round up to exactly 2*pi
  if (w >= kTwoPi) w = 0.0;
  return w;
}

// Signed difference a - b mapped into (-pi, pi].
inline double phase_difference(double a, double b) {
  double d = std::remainder(a - b, kTwoPi);
  if (d <= -std::numbers::pi) d += kTwoPi;
  return d;
}

// Geodesic distance on the unit-circumference-2pi circle.
inline double circle_distance(double a, double b) { return std::abs(phase_difference(a, b)); }

// ---------------------------------------------------------------------------
// Models

enum class ModelKind { PhaseOscillator, PlanarLimitCycle };
enum class MetricKind { CircleGeodesic, Euclidean };
enum class CouplingKind { SineDifference, Diffusive };

inline std::string_view to_string(ModelKind k) {
  return k == ModelKind::PhaseOscillator ? "phase" : "planar";
}
inline std::string_view to_string(CouplingKind k) {
  return k == CouplingKind::SineDifference ? "sine" : "diffusive";
}

struct SubsystemModel {
  ModelKind kind = ModelKind::PhaseOscillator;
  double omega = 0.0;

  static SubsystemModel phase_oscillator(double omega) { return {ModelKind::PhaseOscillator, omega}; }
  static SubsystemModel planar_limit_cycle(double omega) { return {ModelKind::PlanarLimitCycle, omega}; }

  std::size_t state_dim() const { return kind == ModelKind::PhaseOscillator ? 1 : 2; }
  MetricKind metric_kind() const {
    return kind == ModelKind::PhaseOscillator ? MetricKind::CircleGeodesic : MetricKind::Euclidean;
  }
  // Index of the phase coordinate within the node state.
  std::size_t phase_index() const { return kind == ModelKind::PhaseOscillator ? 0 : 1; }

  friend bool operator==(const SubsystemModel&, const SubsystemModel&) = default;
};

// State of one node. Phase oscillators use c[0] = theta; planar limit cycles
// use c[0] = r, c[1] = theta. Phases are kept in [0, 2pi).
struct NodeState {
  std::size_t dim = 1;
  std::array<double, kMaxStateDim> c{};

  static NodeState phase(double theta) { return {1, {wrap_phase(theta), 0.0}}; }
  static NodeState planar(double r, double theta) { return {2, {r, wrap_phase(theta)}}; }

  double operator[](std::size_t k) const { return c[k]; }
  double& operator[](std::size_t k) { return c[k]; }
  std::span<const double> view() const { return {c.data(), dim}; }

  friend bool operator==(const NodeState& a, const NodeState& b) {
    return a.dim == b.dim && std::equal(a.c.begin(), a.c.begin() + a.dim, b.c.begin());
  }
};

inline bool is_finite(const NodeState& s) {
  return std::all_of(s.c.begin(), s.c.begin() + s.dim, [](double v) { return std::isfinite(v); });
}

inline void check_node_state(const SubsystemModel& model, const NodeState& s) {
  if (s.dim != model.state_dim()) throw InvalidInput("node state dimension does not match model");
  if (!is_finite(s)) throw InvalidInput("node state is not finite");
}

// Distance d_i on a node's state space: circle geodesic for phases, Euclidean
// distance between the planar embeddings (r cos theta, r sin theta) otherwise.
inline double node_distance(const SubsystemModel& model, const NodeState& a, const NodeState& b) {
  if (model.kind == ModelKind::PhaseOscillator) return circle_distance(a[0], b[0]);
  const double dx = a[0] * std::cos(a[1]) - b[0] * std::cos(b[1]);
  const double dy = a[0] * std::sin(a[1]) - b[0] * std::sin(b[1]);
  return std::hypot(dx, dy);
}

// ---------------------------------------------------------------------------
// Graph

struct Edge {
  std::size_t from = 0;  // source of the coupling input
  std::size_t to = 0;    // node receiving the input
  double weight = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Directed weighted coupling graph. Undirected constructors store both directions.
class CouplingGraph {
 public:
  CouplingGraph() = default;

  static CouplingGraph directed(std::size_t n_nodes, std::vector<Edge> edges) {
    CouplingGraph g;
    g.n_ = n_nodes;
    g.edges_ = std::move(edges);
    g.validate();
    return g;
  }

  // Each (i, j, w) couples i and j both ways with weight w.
  static CouplingGraph undirected(std::size_t n_nodes, const std::vector<Edge>& edges) {
    std::vector<Edge> both;
    both.reserve(2 * edges.size());
    for (const Edge& e : edges) {
      both.push_back({e.from, e.to, e.weight});
      both.push_back({e.to, e.from, e.weight});
    }
    return directed(n_nodes, std::move(both));
  }

  static CouplingGraph ring(std::size_t n, double w = 1.0) {
    if (n < 3) throw InvalidInput("ring needs at least 3 nodes");
    std::vector<Edge> e;
    for (std::size_t i = 0; i < n; ++i) e.push_back({i, (i + 1) % n, w});
    return undirected(n, e);
  }
  static CouplingGraph complete(std::size_t n, double w = 1.0) {
    std::vector<Edge> e;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) e.push_back({i, j, w});
    return undirected(n, e);
  }
  // Node 0 is the hub.
  static CouplingGraph star(std::size_t n, double w = 1.0) {
    std::vector<Edge> e;
    for (std::size_t i = 1; i < n; ++i) e.push_back({0, i, w});
    return undirected(n, e);
  }
  static CouplingGraph path(std::size_t n, double w = 1.0) {
    std::vector<Edge> e;
    for (std::size_t i = 0; i + 1 < n; ++i) e.push_back({i, i + 1, w});
    return undirected(n, e);
  }

  std::size_t n_nodes() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }

  // Dense matrix W[to][from] of summed weights.
  std::vector<std::vector<double>> weight_matrix() const {
    std::vector<std::vector<double>> w(n_, std::vector<double>(n_, 0.0));
    for (const Edge& e : edges_) w[e.to][e.from] += e.weight;
    return w;
  }

 private:
  void validate() const {
    if (n_ == 0) throw InvalidInput("graph needs at least one node");
    for (const Edge& e : edges_) {
      if (e.from >= n_ || e.to >= n_)
        throw InvalidInput("edge index out of range: " + std::to_string(e.from) + "-" + std::to_string(e.to));
      if (e.from == e.to) throw InvalidInput("self-loop at node " + std::to_string(e.from));
      if (!std::isfinite(e.weight) || e.weight < 0.0) throw InvalidInput("edge weight must be finite and >= 0");
    }
  }

  std::size_t n_ = 1;
  std::vector<Edge> edges_;
};

// ---------------------------------------------------------------------------
// Lattice

class LatticeSystem {
 public:
  struct Params {
    std::vector<SubsystemModel> models;
    std::vector<double> rates;           // empty: all 1
    CouplingGraph graph;
    CouplingKind coupling = CouplingKind::SineDifference;
    double lambda = 0.0;
    std::vector<double> metric_weights;  // empty: all 1
    double max_step = 0.1;
  };

  explicit LatticeSystem(Params p) : p_(std::move(p)) {
    const std::size_t n = p_.models.size();
    if (n == 0) throw InvalidInput("lattice needs at least one node");
    if (p_.graph.n_nodes() != n) throw InvalidInput("graph node count does not match model count");
    if (p_.rates.empty()) p_.rates.assign(n, 1.0);
    if (p_.metric_weights.empty()) p_.metric_weights.assign(n, 1.0);
    if (p_.rates.size() != n) throw InvalidInput("rate count does not match node count");
    if (p_.metric_weights.size() != n) throw InvalidInput("metric weight count does not match node count");
    for (std::size_t i = 0; i < n; ++i) {
      if (p_.models[i].kind != p_.models[0].kind) throw InvalidInput("all nodes must share a model kind");
      if (!std::isfinite(p_.models[i].omega)) throw InvalidInput("omega must be finite");
      if (!(p_.rates[i] > 0.0) || !std::isfinite(p_.rates[i])) throw InvalidInput("rates must be positive");
      if (!(p_.metric_weights[i] > 0.0) || !std::isfinite(p_.metric_weights[i]))
        throw InvalidInput("metric weights must be positive");
    }
    if (!(p_.lambda >= 0.0) || !std::isfinite(p_.lambda)) throw InvalidInput("lambda must be finite and >= 0");
    if (p_.coupling == CouplingKind::SineDifference && kind() != ModelKind::PhaseOscillator)
      throw InvalidInput("sine coupling requires phase oscillators");
    if (!(p_.max_step > 0.0)) throw InvalidInput("max_step must be positive");
    build_incoming();
  }

  // N identical-kind phase oscillators with per-node omega.
  static LatticeSystem phase_lattice(const std::vector<double>& omegas, CouplingGraph graph, double lambda,
                                     CouplingKind coupling = CouplingKind::SineDifference) {
    Params p;
    for (double w : omegas) p.models.push_back(SubsystemModel::phase_oscillator(w));
    p.graph = std::move(graph);
    p.coupling = coupling;
    p.lambda = lambda;
    return LatticeSystem(std::move(p));
  }

  LatticeSystem with_lambda(double lambda) const {
    Params p = p_;
    p.lambda = lambda;
    return LatticeSystem(std::move(p));
  }

  std::size_t n_nodes() const { return p_.models.size(); }
  ModelKind kind() const { return p_.models[0].kind; }
  std::size_t state_dim() const { return p_.models[0].state_dim(); }
  const std::vector<SubsystemModel>& models() const { return p_.models; }
  const SubsystemModel& model(std::size_t i) const { return p_.models[i]; }
  const std::vector<double>& rates() const { return p_.rates; }
  double rate(std::size_t i) const { return p_.rates[i]; }
  const CouplingGraph& graph() const { return p_.graph; }
  CouplingKind coupling() const { return p_.coupling; }
  double lambda() const { return p_.lambda; }
  const std::vector<double>& metric_weights() const { return p_.metric_weights; }
  double max_step() const { return p_.max_step; }
  const Params& params() const { return p_; }

  // True when every node has the same model and rate (so the diagonal is invariant).
  bool identical_nodes() const {
    for (std::size_t i = 1; i < n_nodes(); ++i)
      if (!(p_.models[i] == p_.models[0]) || p_.rates[i] != p_.rates[0]) return false;
    return true;
  }

  struct InEdge {
    std::size_t from;
    double weight;
  };
  // Incoming edges of node i, in edge-list order.
  std::span<const InEdge> incoming(std::size_t i) const {
    return {in_edges_.data() + in_offset_[i], in_offset_[i + 1] - in_offset_[i]};
  }

 private:
  void build_incoming() {
    const std::size_t n = n_nodes();
    in_offset_.assign(n + 1, 0);
    for (const Edge& e : p_.graph.edges()) ++in_offset_[e.to + 1];
    for (std::size_t i = 0; i < n; ++i) in_offset_[i + 1] += in_offset_[i];
    in_edges_.resize(p_.graph.edges().size());
    std::vector<std::size_t> fill(in_offset_.begin(), in_offset_.end() - 1);
    for (const Edge& e : p_.graph.edges()) in_edges_[fill[e.to]++] = {e.from, e.weight};
  }

  Params p_;
  std::vector<std::size_t> in_offset_;
  std::vector<InEdge> in_edges_;
};

// ---------------------------------------------------------------------------
// Global state

class GlobalState {
 public:
  GlobalState() = default;
  GlobalState(std::size_t n_nodes, std::size_t dim) : dim_(dim), values_(n_nodes * dim, 0.0) {}

  static GlobalState phases(std::span<const double> thetas) {
    GlobalState x(thetas.size(), 1);
    for (std::size_t i = 0; i < thetas.size(); ++i) x.values_[i] = wrap_phase(thetas[i]);
    return x;
  }
  static GlobalState phases(std::initializer_list<double> thetas) {
    return phases(std::span<const double>(thetas.begin(), thetas.size()));
  }
  static GlobalState from_nodes(const std::vector<NodeState>& nodes) {
    if (nodes.empty()) return {};
    GlobalState x(nodes.size(), nodes[0].dim);
    for (std::size_t i = 0; i < nodes.size(); ++i) x.set_node(i, nodes[i]);
    return x;
  }
  // Every node set to the same state.
  static GlobalState diagonal(std::size_t n_nodes, const NodeState& s) {
    GlobalState x(n_nodes, s.dim);
    for (std::size_t i = 0; i < n_nodes; ++i) x.set_node(i, s);
    return x;
  }

  std::size_t n_nodes() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
  std::size_t dim() const { return dim_; }

  NodeState node(std::size_t i) const {
    NodeState s;
    s.dim = dim_;
    for (std::size_t k = 0; k < dim_; ++k) s.c[k] = values_[i * dim_ + k];
    return s;
  }
  void set_node(std::size_t i, const NodeState& s) {
    if (s.dim != dim_) throw InvalidInput("node state dimension mismatch");
    for (std::size_t k = 0; k < dim_; ++k) values_[i * dim_ + k] = s.c[k];
  }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  friend bool operator==(const GlobalState&, const GlobalState&) = default;

 private:
  std::size_t dim_ = 1;
  std::vector<double> values_;
};

inline void check_state(const LatticeSystem& sys, const GlobalState& x) {
  if (x.n_nodes() != sys.n_nodes() || x.dim() != sys.state_dim())
    throw InvalidInput("state shape does not match lattice (" + std::to_string(x.n_nodes()) + " nodes, dim " +
                       std::to_string(x.dim()) + ")");
  for (double v : x.values())
    if (!std::isfinite(v)) throw InvalidInput("state is not finite");
}

// Uniform random phases; planar radii drawn from [0.5, 1.5].
inline GlobalState random_state(const LatticeSystem& sys, Rng& rng) {
  GlobalState x(sys.n_nodes(), sys.state_dim());
  for (std::size_t i = 0; i < sys.n_nodes(); ++i) {
    if (sys.kind() == ModelKind::PhaseOscillator) {
      x.set_node(i, NodeState::phase(rng.uniform(0.0, kTwoPi)));
    } else {
      const double r = rng.uniform(0.5, 1.5);
      x.set_node(i, NodeState::planar(r, rng.uniform(0.0, kTwoPi)));
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// Permutations

class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<std::size_t> image) : image_(std::move(image)) {
    std::vector<bool> seen(image_.size(), false);
    for (std::size_t i = 0; i < image_.size(); ++i) {
      const std::size_t j = image_[i];
      if (j >= image_.size())
        throw InvalidInput("permutation image out of range at index " + std::to_string(i));
      if (seen[j]) throw InvalidInput("permutation repeats image at index " + std::to_string(i));
      seen[j] = true;
    }
  }

  static Permutation identity(std::size_t n) {
    std::vector<std::size_t> im(n);
    for (std::size_t i = 0; i < n; ++i) im[i] = i;
    return Permutation(std::move(im));
  }
  // i -> i + k (mod n)
  static Permutation rotation(std::size_t n, std::size_t k) {
    std::vector<std::size_t> im(n);
    for (std::size_t i = 0; i < n; ++i) im[i] = (i + k) % n;
    return Permutation(std::move(im));
  }

  std::size_t size() const { return image_.size(); }
  std::size_t operator()(std::size_t i) const { return image_[i]; }
  const std::vector<std::size_t>& image() const { return image_; }

  Permutation inverse() const {
    std::vector<std::size_t> inv(image_.size());
    for (std::size_t i = 0; i < image_.size(); ++i) inv[image_[i]] = i;
    return Permutation(std::move(inv));
  }

  friend bool operator==(const Permutation&, const Permutation&) = default;

 private:
  std::vector<std::size_t> image_;
};

// (P x)_{p(i)} = x_i, i.e. (P x)_i = x_{p^{-1}(i)}.
inline GlobalState apply_permutation(const GlobalState& x, const Permutation& p) {
  if (p.size() != x.n_nodes()) throw InvalidInput("permutation length does not match node count");
  GlobalState out(x.n_nodes(), x.dim());
  for (std::size_t i = 0; i < x.n_nodes(); ++i) out.set_node(p(i), x.node(i));
  return out;
}

// ---------------------------------------------------------------------------
// Uncoupled node flow

namespace detail {

inline std::size_t step_count(double t, double max_step) {
  return static_cast<std::size_t>(std::ceil(std::abs(t) / max_step - 1e-12));
}

}  // namespace detail

// phi_i^{rate * t}(x). Signed t is allowed. Both built-ins are solved in closed
// form: the phase rotates at omega, and the planar radius follows
// r(tau) = (1 + (r0^-2 - 1) e^{-2 tau})^{-1/2}, which escapes to infinity in
// finite backward time when r0 > 1.
inline NodeState node_flow(const SubsystemModel& model, double rate, const NodeState& x, double t) {
  check_node_state(model, x);
  if (!std::isfinite(t)) throw InvalidInput("flow time is not finite");
  if (t == 0.0) return x;
  const double tau = rate * t;
  NodeState out = x;
  const std::size_t ph = model.phase_index();
  out[ph] = wrap_phase(x[ph] + model.omega * tau);
  if (model.kind == ModelKind::PlanarLimitCycle && x[0] != 0.0) {
    const double r0 = std::abs(x[0]);
    const double denom = 1.0 + (1.0 / (r0 * r0) - 1.0) * std::exp(-2.0 * tau);
    if (!(denom > 0.0) || !std::isfinite(denom)) throw IntegrationFailure(0, t, "planar radius diverged");
    const double r = 1.0 / std::sqrt(denom);
    if (!std::isfinite(r)) throw IntegrationFailure(0, t, "planar radius diverged");
    out[0] = std::copysign(r, x[0]);
  }
  return out;
}

// T = R^N action: node i advanced along its own uncoupled flow by theta_i.
inline GlobalState apply_timeshifts(const LatticeSystem& sys, const GlobalState& x, std::span<const double> theta) {
  check_state(sys, x);
  if (theta.size() != sys.n_nodes()) throw InvalidInput("timeshift vector length does not match node count");
  GlobalState out = x;
  for (std::size_t i = 0; i < sys.n_nodes(); ++i)
    out.set_node(i, node_flow(sys.model(i), sys.rate(i), x.node(i), theta[i]));
  return out;
}

// D(x, y) = max_i m_i d_i(x_i, y_i)
inline double product_metric(const LatticeSystem& sys, const GlobalState& x, const GlobalState& y) {
  check_state(sys, x);
  check_state(sys, y);
  double d = 0.0;
  for (std::size_t i = 0; i < sys.n_nodes(); ++i)
    d = std::max(d, sys.metric_weights()[i] * node_distance(sys.model(i), x.node(i), y.node(i)));
  return d;
}

// ---------------------------------------------------------------------------
// Coupled flow

namespace detail {

// Integrates in working coordinates: theta for phase oscillators, Cartesian
// (u, v) for planar nodes (the polar field is singular at r = 0).
class CoupledIntegrator {
 public:
  explicit CoupledIntegrator(const LatticeSystem& sys) : sys_(sys), n_(sys.n_nodes()) {
    const std::size_t len = n_ * sys.state_dim();
    k1_.resize(len);
    k2_.resize(len);
    k3_.resize(len);
    k4_.resize(len);
    tmp_.resize(len);
  }

  std::vector<double> to_work(const GlobalState& x) const {
    std::vector<double> w(x.values().begin(), x.values().end());
    if (sys_.kind() == ModelKind::PlanarLimitCycle) {
      for (std::size_t i = 0; i < n_; ++i) {
        const double r = w[2 * i], th = w[2 * i + 1];
        w[2 * i] = r * std::cos(th);
        w[2 * i + 1] = r * std::sin(th);
      }
    }
    return w;
  }

  GlobalState from_work(const std::vector<double>& w) const {
    GlobalState x(n_, sys_.state_dim());
    auto v = x.values();
    if (sys_.kind() == ModelKind::PhaseOscillator) {
      for (std::size_t i = 0; i < n_; ++i) v[i] = wrap_phase(w[i]);
    } else {
      for (std::size_t i = 0; i < n_; ++i) {
        v[2 * i] = std::hypot(w[2 * i], w[2 * i + 1]);
        v[2 * i + 1] = wrap_phase(std::atan2(w[2 * i + 1], w[2 * i]));
      }
    }
    return x;
  }

  void field(const std::vector<double>& y, std::vector<double>& dy) const {
    const double lam = sys_.lambda();
    if (sys_.kind() == ModelKind::PhaseOscillator) {
      for (std::size_t i = 0; i < n_; ++i) {
        double c = 0.0;
        for (const auto& e : sys_.incoming(i)) {
          const double g = sys_.coupling() == CouplingKind::SineDifference ? std::sin(y[e.from] - y[i])
                                                                           : phase_difference(y[e.from], y[i]);
          c += e.weight * g;
        }
        dy[i] = sys_.rate(i) * sys_.model(i).omega + lam * c;
      }
    } else {
      for (std::size_t i = 0; i < n_; ++i) {
        const double u = y[2 * i], v = y[2 * i + 1];
        const double s = 1.0 - (u * u + v * v);
        const double om = sys_.model(i).omega;
        double cu = 0.0, cv = 0.0;
        for (const auto& e : sys_.incoming(i)) {
          cu += e.weight * (y[2 * e.from] - u);
          cv += e.weight * (y[2 * e.from + 1] - v);
        }
        dy[2 * i] = sys_.rate(i) * (u * s - om * v) + lam * cu;
        dy[2 * i + 1] = sys_.rate(i) * (v * s + om * u) + lam * cv;
      }
    }
  }

  // One RK4 step in place; re-wraps phases. t is only used for error reports.
  void step(std::vector<double>& y, double h, double t) {
    const std::size_t len = y.size();
    field(y, k1_);
    for (std::size_t k = 0; k < len; ++k) tmp_[k] = y[k] + 0.5 * h * k1_[k];
    field(tmp_, k2_);
    for (std::size_t k = 0; k < len; ++k) tmp_[k] = y[k] + 0.5 * h * k2_[k];
    field(tmp_, k3_);
    for (std::size_t k = 0; k < len; ++k) tmp_[k] = y[k] + h * k3_[k];
    field(tmp_, k4_);
    for (std::size_t k = 0; k < len; ++k) y[k] += h / 6.0 * (k1_[k] + 2.0 * k2_[k] + 2.0 * k3_[k] + k4_[k]);
    const std::size_t dim = sys_.state_dim();
    for (std::size_t k = 0; k < len; ++k)
      if (!std::isfinite(y[k])) throw IntegrationFailure(k / dim, t + h, "non-finite state during integration");
    if (sys_.kind() == ModelKind::PhaseOscillator)
      for (double& v : y) v = wrap_phase(v);
  }

  // Advances y by t >= 0 using ceil(t / dt) equal substeps.
  void advance(std::vector<double>& y, double t, double dt, double t_start = 0.0) {
    if (t == 0.0) return;
    const std::size_t n = std::max<std::size_t>(1, step_count(t, dt));
    const double h = t / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) step(y, h, t_start + static_cast<double>(k) * h);
  }

 private:
  const LatticeSystem& sys_;
  std::size_t n_;
  std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

}  // namespace detail

// One fourth-order Runge-Kutta step of the coupled law.
inline GlobalState global_step(const LatticeSystem& sys, const GlobalState& x, double dt) {
  check_state(sys, x);
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("step must be positive");
  if (dt > sys.max_step()) throw InvalidInput("step exceeds the configured maximum");
  detail::CoupledIntegrator integ(sys);
  auto y = integ.to_work(x);
  integ.step(y, dt, 0.0);
  return integ.from_work(y);
}

// Phi^t(x) for t >= 0; t is split into ceil(t / dt) equal RK4 steps.
inline GlobalState global_flow(const LatticeSystem& sys, const GlobalState& x, double t, double dt = kDefaultStep) {
  check_state(sys, x);
  if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidInput("coupled flow runs forward in time only");
  if (!(dt > 0.0) || dt > sys.max_step()) throw InvalidInput("integration step out of range");
  if (t == 0.0) return x;
  detail::CoupledIntegrator integ(sys);
  auto y = integ.to_work(x);
  integ.advance(y, t, dt);
  return integ.from_work(y);
}

// Samples Phi^t(x) at t = 0, interval, 2*interval, ..., horizon and calls
// visit(t, state) at each sample.
template <class Visitor>
void sample_flow(const LatticeSystem& sys, const GlobalState& x0, double horizon, double interval, double dt,
                 Visitor&& visit) {
  check_state(sys, x0);
  if (!(interval > 0.0) || !(horizon >= 0.0)) throw InvalidInput("sampling interval and horizon must be positive");
  detail::CoupledIntegrator integ(sys);
  auto y = integ.to_work(x0);
  const auto n = static_cast<std::size_t>(std::floor(horizon / interval + 1e-9));
  visit(0.0, x0);
  for (std::size_t k = 1; k <= n; ++k) {
    const double t_prev = static_cast<double>(k - 1) * interval;
    integ.advance(y, interval, dt, t_prev);
    visit(static_cast<double>(k) * interval, integ.from_work(y));
  }
}

// max_i d_i((Phi^t P x)_i, (P Phi^t x)_i)
inline double equivariance_defect(const LatticeSystem& sys, const Permutation& p, const GlobalState& x, double t,
                                  double dt = kDefaultStep) {
  const GlobalState a = global_flow(sys, apply_permutation(x, p), t, dt);
  const GlobalState b = apply_permutation(global_flow(sys, x, t, dt), p);
  double d = 0.0;
  for (std::size_t i = 0; i < sys.n_nodes(); ++i) d = std::max(d, node_distance(sys.model(i), a.node(i), b.node(i)));
  return d;
}

// ---------------------------------------------------------------------------
// Koopman evaluation (U^t f)(x) = f(Phi^t x)

inline double phase_of(const LatticeSystem& sys, const GlobalState& x, std::size_t i) {
  return x.node(i)[sys.model(i).phase_index()];
}

// |N^{-1} sum_k exp(i theta_k)|
inline double mean_phase_coherence(const LatticeSystem& sys, const GlobalState& x) {
  std::complex<double> z{0.0, 0.0};
  for (std::size_t i = 0; i < sys.n_nodes(); ++i) z += std::polar(1.0, phase_of(sys, x, i));
  return std::abs(z) / static_cast<double>(sys.n_nodes());
}

inline double evaluate_observable(const LatticeSystem& sys, std::string_view name, const GlobalState& x) {
  if (name == "first-node-cos") return std::cos(phase_of(sys, x, 0));
  if (name == "mean-phase-coherence") return mean_phase_coherence(sys, x);
  throw InvalidInput("unknown observable: " + std::string(name));
}

inline double koopman_eval(const LatticeSystem& sys, std::string_view observable, const GlobalState& x, double t,
                           double dt = kDefaultStep) {
  evaluate_observable(sys, observable, x);  // reject unknown names before integrating
  return evaluate_observable(sys, observable, global_flow(sys, x, t, dt));
}

}  // namespace synclattice
