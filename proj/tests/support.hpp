#pragma once

// Exact self-similar histories used as oracles.

#include <cmath>
#include <vector>

#include "neckpinch/neckpinch.hpp"

namespace neckpinch::testing {

inline std::vector<double> uniform(double a, double b, std::size_t m) { return harness::uniform_nodes(a, b, m); }

/// Shrinking cylinder U(t)^2 = R0^2 - 2(n-1) t on [-L, L], one slice per time.
inline FlowHistory exact_cylinder(int n, double R0, double L, std::size_t nodes, const std::vector<double>& times) {
  FlowHistory h;
  for (double t : times) {
    const double U = std::sqrt(R0 * R0 - 2.0 * (n - 1) * t);
    auto g = ProfileGrid::neumann(n, uniform(-L, L, nodes), std::vector<double>(nodes, U), t);
    h.snapshots.push_back(g);
    h.stats.push_back({t, U, 0.0, (n - 1) / (U * U), 0.0, nodes});
  }
  h.reference_radius = R0;
  h.stop_reason = StopReason::neck_threshold;
  h.uniform = true;
  return h;
}

inline double cylinder_T(int n, double R0) { return R0 * R0 / (2.0 * (n - 1)); }

/// Shrinking sphere R(t)^2 = R0^2 - 2n t with cap tips, nodes strictly inside.
inline FlowHistory exact_sphere(int n, double R0, std::size_t nodes, const std::vector<double>& times) {
  FlowHistory h;
  for (double t : times) {
    const double R = std::sqrt(R0 * R0 - 2.0 * n * t);
    auto g = harness::sphere_profile(n, R, nodes);
    g.time = t;
    h.snapshots.push_back(g);
    h.stats.push_back({t, R, 0.0, n / (R * R), 0.0, nodes});
  }
  h.reference_radius = R0;
  h.stop_reason = StopReason::extinction;
  return h;
}

/// Times T - T q^k, k = 0..count-1: geometric approach to T.
inline std::vector<double> geometric_times(double T, double q, std::size_t count) {
  std::vector<double> t;
  double gap = T;
  for (std::size_t k = 0; k < count; ++k, gap *= q)
    t.push_back(T - gap);
  return t;
}

/// Parabolic dilation x -> l x, U -> l U, t -> l^2 t.
inline FlowHistory dilate(const FlowHistory& h, double l) {
  FlowHistory out = h;
  for (auto& g : out.snapshots) {
    for (auto& x : g.x)
      x *= l;
    for (auto& u : g.radius)
      u *= l;
    g.left_end *= l;
    g.right_end *= l;
    g.time *= l * l;
  }
  for (auto& s : out.stats) {
    s.t *= l * l;
    s.u_min *= l;
    s.x_argmin *= l;
    s.max_a2 /= l * l;
    s.dt *= l * l;
  }
  out.reference_radius *= l;
  out.last_neck_x *= l;
  out.last_neck_radius *= l;
  return out;
}

} // namespace neckpinch::testing
