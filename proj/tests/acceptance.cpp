// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "synclattice/synclattice.hpp"

using namespace synclattice;
using std::numbers::pi;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

ExperimentSpec benchmark_spec(double w0, double w1) {
  ExperimentSpec s(LatticeSystem::phase_lattice({w0, w1}, CouplingGraph::complete(2), 0.0));
  s.window = ShiftWindow{2.0};
  s.rng_seed = 7;
  return s;
}

LatticeSystem identical_pair(double lambda) {
  return LatticeSystem::phase_lattice({1.0, 1.0}, CouplingGraph::complete(2), lambda);
}

Outcome threshold_recovery() {
  const auto start = std::chrono::steady_clock::now();
  const ThresholdResult r = find_lambda_c(benchmark_spec(-0.5, 0.5), 0.05, 1.5, 0.01);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::abs(r.lambda_c - 0.5) <= 0.03 && secs < 60.0,
          "lambda_c=" + fmt("%.4f", r.lambda_c) + " in " + fmt("%.1f", secs) + " s"};
}

Outcome transverse_multiplier_check() {
  const double half = transverse_multiplier(identical_pair(0.5), 1.0).mu;
  const double zero = transverse_multiplier(identical_pair(0.0), 1.0).mu;
  bool below = true;
  for (double lambda : {1e-3, 1e-2, 0.1, 1.0}) below = below && transverse_multiplier(identical_pair(lambda), 1.0).mu < 1.0;
  return {std::abs(half - std::exp(-1.0)) < 1e-3 && std::abs(zero - 1.0) < 1e-6 && below,
          "mu(0.5)=" + fmt("%.6f", half) + " mu(0)=" + fmt("%.9f", zero) + (below ? " mu<1 for lambda>0" : " mu>=1 somewhere")};
}

Outcome polydiagonal_invariance() {
  const auto sys = LatticeSystem::phase_lattice(std::vector<double>(6, 1.0), CouplingGraph::ring(6), 0.7);
  Rng rng(3);
  const GlobalState x = random_state(sys, rng);
  const Partition anti = Partition::from_blocks(6, {{0, 3}, {1, 4}, {2, 5}});
  const double balanced = invariance_report(sys, anti, project_to_partition(sys, x, anti), 100.0, kDefaultStep, 201).max_defect;
  const Partition control = Partition::from_blocks(6, {{0, 1}, {2, 3, 4, 5}});
  const bool control_unbalanced = !is_balanced(sys.graph(), control);
  const double broken = invariance_report(sys, control, project_to_partition(sys, x, control), 10.0, kDefaultStep, 101).max_defect;
  return {is_balanced(sys.graph(), anti) && balanced < 1e-6 && control_unbalanced && broken > 1e-2,
          "balanced max defect=" + fmt("%.3g", balanced) + ", control max defect=" + fmt("%.3g", broken)};
}

Outcome equivariance() {
  const auto sys = LatticeSystem::phase_lattice({1.0, 1.0, 1.0, 1.0, 1.0, 1.0}, CouplingGraph::ring(6), 1.0);
  Rng rng(5);
  double worst = 0.0;
  for (int k = 0; k < 3; ++k)
    worst = std::max(worst, equivariance_defect(sys, Permutation::rotation(6, 1), random_state(sys, rng), 10.0, 1e-3));
  return {worst < 1e-8, "max defect=" + fmt("%.3g", worst)};
}

Outcome pseudo_metric() {
  const auto sys = LatticeSystem::phase_lattice({1.0, 1.0, 1.0}, CouplingGraph::path(3), 0.0);
  const ShiftWindow wide{2 * pi + 0.01};
  Rng rng(10);
  double sym = 0.0, tri = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const GlobalState x = random_state(sys, rng), y = random_state(sys, rng), z = random_state(sys, rng);
    const double xy = d_async(sys, x, y, wide);
    sym = std::max(sym, std::abs(xy - d_async(sys, y, x, wide)));
    tri = std::max(tri, d_async(sys, x, z, wide) - xy - d_async(sys, y, z, wide));
  }
  const auto hetero = LatticeSystem::phase_lattice({0.7, -1.2, 1.9}, CouplingGraph::path(3), 0.0);
  const ShiftWindow w{2.0};
  double absorb = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const GlobalState x = random_state(hetero, rng);
    std::vector<double> th(3);
    for (double& t : th) t = rng.uniform(-w.t_max, w.t_max);
    absorb = std::max(absorb, d_async(hetero, apply_timeshifts(hetero, x, th), x, w));
  }
  return {sym <= 1e-6 && tri <= 1e-6 && absorb < 10 * w.refine_tol,
          "symmetry gap=" + fmt("%.3g", sym) + " triangle excess=" + fmt("%.3g", tri) + " absorption=" +
              fmt("%.3g", absorb)};
}

Outcome flow_axioms() {
  const auto sys = LatticeSystem::phase_lattice({0.2, -0.4, 1.1, 0.5}, CouplingGraph::ring(4), 0.7);
  Rng rng(6);
  double worst = 0.0;
  bool identity = true;
  for (int k = 0; k < 100; ++k) {
    const GlobalState x = random_state(sys, rng);
    const double s = rng.uniform(0.0, 2.0), t = rng.uniform(0.0, 2.0);
    worst = std::max(worst, product_metric(sys, global_flow(sys, x, s + t, 1e-3),
                                           global_flow(sys, global_flow(sys, x, s, 1e-3), t, 1e-3)));
    identity = identity && global_flow(sys, x, 0.0) == x;
  }
  return {worst < 1e-6 && identity, "group-law residual=" + fmt("%.3g", worst) + (identity ? ", identity exact" : ", identity broken")};
}

Outcome contraction() {
  const ExperimentSpec s = benchmark_spec(1.0, 1.0);
  const ContractionEstimate half = contraction_factor(s, 0.5, 1.0, s.n_pairs);
  const ContractionEstimate zero = contraction_factor(s, 0.0, 1.0, s.n_pairs);
  return {half.conclusive() && zero.conclusive() && half.eta >= 0.35 && half.eta <= 0.40 &&
              std::abs(zero.eta - 1.0) <= 1e-3,
          "eta(0.5)=" + fmt("%.5f", half.eta) + " eta(0)=" + fmt("%.7f", zero.eta)};
}

Outcome order_parameter_signature() {
  const ExperimentSpec s = benchmark_spec(-0.5, 0.5);
  const std::vector<double> grid{0.1, 0.2, 0.3, 0.35, 0.4, 0.45, 0.48, 0.52, 0.55, 0.6, 0.7, 0.8, 0.9, 1.0, 1.2};
  const SweepResult r = sweep(s, grid);
  int flips = 0;
  double flip_lo = 0.0, flip_hi = 0.0, worst_rise = 0.0;
  for (std::size_t k = 1; k < r.rows.size(); ++k) {
    if (r.rows[k].classified_coherent != r.rows[k - 1].classified_coherent) {
      ++flips;
      flip_lo = r.rows[k - 1].lambda;
      flip_hi = r.rows[k].lambda;
    }
    worst_rise = std::max(worst_rise, r.rows[k].R - r.rows[k - 1].R);
  }
  const bool pass = flips == 1 && flip_lo >= 0.45 && flip_hi <= 0.55 && !r.rows.front().classified_coherent &&
                    worst_rise <= 2 * s.lock_threshold;
  return {pass, std::to_string(flips) + " flip(s), last between " + fmt("%.2f", flip_lo) + " and " + fmt("%.2f", flip_hi) +
                    ", largest R increase=" + fmt("%.3g", worst_rise)};
}

Outcome stroboscopic_coherence() {
  const auto sys = LatticeSystem::phase_lattice({1.0, 1.0, 1.0}, CouplingGraph::complete(3), 1.0);
  int ok = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const StrobeResult r = stroboscopic_fixed_point(sys, 1.0, random_state(sys, rng), 1000, 1e-10);
    worst = std::max(worst, r.strict_sync);
    ok += r.converged && r.strict_sync < 1e-5;
  }
  return {ok == 20, std::to_string(ok) + "/20 converged, worst strict_sync=" + fmt("%.3g", worst)};
}

Outcome structural_oracles() {
  bool hand = coarsest_equitable_partition(CouplingGraph::star(5)) == Partition::from_blocks(5, {{0}, {1, 2, 3, 4}}) &&
              coarsest_equitable_partition(CouplingGraph::path(3)) == Partition::from_blocks(3, {{0, 2}, {1}}) &&
              coarsest_equitable_partition(CouplingGraph::path(4)) == Partition::from_blocks(4, {{0, 3}, {1, 2}}) &&
              coarsest_equitable_partition(CouplingGraph::ring(6)) == Partition::one_block(6);

  std::size_t checked = 0, mismatched = 0;
  const std::vector<CouplingGraph> graphs{
      CouplingGraph::path(4), CouplingGraph::ring(5), CouplingGraph::star(6), CouplingGraph::ring(6),
      CouplingGraph::path(6), CouplingGraph::complete(5),
      CouplingGraph::directed(5, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {3, 4, 1.0}, {4, 0, 1.0}, {0, 2, 0.5}}),
      CouplingGraph::undirected(6, {{0, 1, 2.0}, {1, 2, 1.0}, {2, 3, 1.0}, {3, 4, 1.0}, {4, 5, 2.0}})};
  for (const auto& g : graphs) {
    const auto w = g.weight_matrix();
    for (const auto& l : oracle::all_partitions(g.n_nodes())) {
      ++checked;
      mismatched += is_balanced(g, Partition(l)) != oracle::balanced_brute_force(w, l);
    }
  }

  Rng rng(101);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double omega = rng.uniform(-2.0, 2.0), rate = rng.uniform(0.5, 2.0);
    const double x = rng.uniform(0.0, kTwoPi), y = rng.uniform(0.0, kTwoPi), t_max = rng.uniform(0.1, 3.0);
    const double got = phase_distance(SubsystemModel::phase_oscillator(omega), rate, NodeState::phase(x),
                                      NodeState::phase(y), ShiftWindow{t_max});
    worst = std::max(worst, std::abs(got - oracle::phase_distance_grid(omega, rate, x, y, t_max, 100000)));
  }
  return {hand && mismatched == 0 && worst < 1e-4,
          std::string(hand ? "hand cases match" : "hand case mismatch") + ", " + std::to_string(mismatched) + "/" +
              std::to_string(checked) + " balance mismatches, metric grid gap=" + fmt("%.3g", worst)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"threshold recovery", threshold_recovery},
      {"transverse multiplier", transverse_multiplier_check},
      {"polydiagonal invariance", polydiagonal_invariance},
      {"equivariance", equivariance},
      {"pseudo-metric suite", pseudo_metric},
      {"flow axioms", flow_axioms},
      {"contraction evidence", contraction},
      {"order-parameter signature", order_parameter_signature},
      {"stroboscopic coherence", stroboscopic_coherence},
      {"structural oracles", structural_oracles},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
