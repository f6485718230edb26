#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "neckpinch/profile_grid.hpp"

namespace neckpinch {

enum class StopReason { neck_threshold, extinction, max_steps, blowup_detected };

inline std::string_view to_string(StopReason r) {
  switch (r) {
  case StopReason::neck_threshold:
    return "neck_threshold";
  case StopReason::extinction:
    return "extinction";
  case StopReason::max_steps:
    return "max_steps";
  case StopReason::blowup_detected:
    return "blowup_detected";
  }
  return "?";
}

/// One row of run.csv; recorded alongside every snapshot.
struct SnapshotStats {
  double t = 0.0;
  double u_min = 0.0;    // waist radius (see find_waist)
  double x_argmin = 0.0;
  double max_a2 = 0.0;   // max |A|^2 over the slice
  double dt = 0.0;       // step size that produced this slice
  std::size_t nodes = 0;
};

struct PinchEstimate {
  double T = 0.0;
  double x0 = 0.0;
  double slope = 0.0;      // d(U_min^2)/dt
  double T_stderr = 0.0;
  double slope_stderr = 0.0;
  double residual = 0.0;   // RMS of the linear fit, relative to the fitted U_min^2 range
  std::size_t samples = 0;
  bool residual_flag = false;  // fit poor: pinch possibly degenerate
  bool slope_flag = false;     // slope far from the cylinder value -2(n-1)
};

struct FlowHistory {
  std::vector<ProfileGrid> snapshots;
  std::vector<SnapshotStats> stats;
  StopReason stop_reason = StopReason::max_steps;
  std::optional<PinchEstimate> pinch_estimate;
  double reference_radius = 0.0;  // waist of the initial slice
  bool uniform = false;           // stopped on a spatially uniform slice (cylinder)
  bool lobe_absorbed = false;     // a capped lobe merged into its neck before pinching
  double last_neck_x = 0.0;       // where a neck was last seen (absorption point)
  double last_neck_radius = 0.0;
  std::size_t steps = 0;
  std::size_t rejected_steps = 0;
  std::size_t remeshes = 0;

  int n() const { return snapshots.empty() ? 2 : snapshots.front().n; }
  double first_time() const { return snapshots.front().time; }
  double last_time() const { return snapshots.back().time; }

  /// Index of the last snapshot with time <= t (clamped to 0).
  std::size_t index_at_or_before(double t) const {
    auto it = std::upper_bound(snapshots.begin(), snapshots.end(), t,
                               [](double v, const ProfileGrid& g) { return v < g.time; });
    if (it == snapshots.begin())
      return 0;
    return static_cast<std::size_t>(it - snapshots.begin()) - 1;
  }
};

/// Radius of the history at (x, t), linear in time between bracketing slices.
inline double sample_radius(const FlowHistory& h, double x, double t) {
  if (h.snapshots.empty())
    throw InsufficientData("empty history");
  if (t < h.first_time() || t > h.last_time())
    throw InsufficientData("time outside recorded history");
  const std::size_t i = h.index_at_or_before(t);
  const auto& a = h.snapshots[i];
  if (i + 1 >= h.snapshots.size() || a.time == t)
    return ProfileSampler(a).radius(x);
  const auto& b = h.snapshots[i + 1];
  const double th = (t - a.time) / (b.time - a.time);
  return (1.0 - th) * ProfileSampler(a).radius(x) + th * ProfileSampler(b).radius(x);
}

} // namespace neckpinch
