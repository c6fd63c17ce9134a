#pragma once

// Test-only reference computations. Nothing here calls into the library's
// integrator or metric search, so they can check those independently.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline double circ(double a, double b) {
  double d = std::fmod(std::abs(a - b), kTwoPi);
  return std::min(d, kTwoPi - d);
}

// Exact radius of r' = r(1 - r^2).
inline double limit_cycle_radius(double r0, double t) {
  return 1.0 / std::sqrt(1.0 + (1.0 / (r0 * r0) - 1.0) * std::exp(-2.0 * t));
}

// Two-node sine-coupled offset Delta = theta_1 - theta_0:
// Delta' = (w1 - w0) - 2 lambda sin(Delta), integrated by midpoint rule with a fine step.
inline double offset_ode(double delta0, double dw, double lambda, double t, double h = 1e-5) {
  const auto f = [&](double d) { return dw - 2.0 * lambda * std::sin(d); };
  const auto n = static_cast<std::size_t>(std::ceil(t / h));
  const double s = t / static_cast<double>(n);
  double d = delta0;
  for (std::size_t k = 0; k < n; ++k) d += s * f(d + 0.5 * s * f(d));
  return d;
}

// min over an n-point uniform grid of f on [lo, hi]
inline double grid_min(const std::function<double(double)>& f, double lo, double hi, std::size_t n) {
  double best = f(lo);
  for (std::size_t k = 1; k < n; ++k) best = std::min(best, f(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1)));
  return best;
}

// Phase oscillator phase distance by brute force over t in [-t_max, t_max].
inline double phase_distance_grid(double omega, double rate, double x, double y, double t_max, std::size_t n = 100001) {
  return grid_min([&](double t) { return circ(x + omega * rate * t, y); }, -t_max, t_max, n);
}

// Restricted-growth-string enumeration of every set partition of n elements.
inline std::vector<std::vector<std::size_t>> all_partitions(std::size_t n) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> a(n, 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t max_label) {
    if (i == n) {
      out.push_back(a);
      return;
    }
    for (std::size_t v = 0; v <= max_label + 1; ++v) {
      a[i] = v;
      rec(i + 1, std::max(max_label, v));
    }
  };
  if (n == 0) return {{}};
  a[0] = 0;
  rec(1, 0);
  return out;
}

// Direct definition: nodes sharing a label must receive equal total weight from
// every label class. w[to][from] is a dense weight matrix.
inline bool balanced_brute_force(const std::vector<std::vector<double>>& w, const std::vector<std::size_t>& label) {
  const std::size_t n = label.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (label[i] != label[j]) continue;
      for (std::size_t c = 0; c < n; ++c) {
        double si = 0.0, sj = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (label[k] != c) continue;
          si += w[i][k];
          sj += w[j][k];
        }
        if (std::abs(si - sj) > 1e-12) return false;
      }
    }
  return true;
}

}  // namespace oracle
