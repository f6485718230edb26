#pragma once

// Singularity classification and the quantitative checks around a pinch:
// Type I ratio |A|^2 (T-t), curvature lower bound constant, mean-convex
// neighbourhood constants and the final-time profile.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "neckpinch/flow_history.hpp"
#include "neckpinch/geometry.hpp"
#include "neckpinch/rescale.hpp"

namespace neckpinch {

enum class SingularityKind { neckpinch, extinction, unresolved };
enum class Degeneracy { nondegenerate, degenerate_candidate, undetermined };
enum class TypeClass { TypeI, TypeII_candidate, undetermined };

inline std::string_view to_string(SingularityKind k) {
  switch (k) {
  case SingularityKind::neckpinch:
    return "neckpinch";
  case SingularityKind::extinction:
    return "extinction";
  case SingularityKind::unresolved:
    return "unresolved";
  }
  return "?";
}

inline std::string_view to_string(Degeneracy d) {
  switch (d) {
  case Degeneracy::nondegenerate:
    return "nondegenerate";
  case Degeneracy::degenerate_candidate:
    return "degenerate_candidate";
  case Degeneracy::undetermined:
    return "undetermined";
  }
  return "?";
}

inline std::string_view to_string(TypeClass c) {
  switch (c) {
  case TypeClass::TypeI:
    return "TypeI";
  case TypeClass::TypeII_candidate:
    return "TypeII_candidate";
  case TypeClass::undetermined:
    return "undetermined";
  }
  return "?";
}

struct SingularityReport {
  SingularityKind kind = SingularityKind::unresolved;
  Degeneracy degeneracy = Degeneracy::undetermined;
  double T = 0.0;
  double x0 = 0.0;
  double type1_ratio_sup = 0.0;
  double slope = 0.0;
  double eta_H = 0.0;
  double eta_2cvx = 0.0;
  double alpha_min = 0.0;
  double eps0_emp = 0.0;
  bool disconnects = false;
  double left_survival_radius = 0.0;
  double right_survival_radius = 0.0;
  // Not part of the classification, kept for the report.
  bool uniform = false;
  TypeClass type_class = TypeClass::undetermined;
  double T_stderr = 0.0;
  std::vector<std::string> notes;
};

// ---------------------------------------------------------------------------

struct TypeISeries {
  double T = 0.0;
  double x0 = 0.0;
  double k = 10.0;
  double delta = infinity;
  std::vector<double> times;
  std::vector<double> ratios;
  std::vector<double> running_sup;
  std::size_t empty_windows = 0;
};

/// max |A|^2 (T - t) over |x - x0| <= min(k sqrt(T - t), delta), per snapshot
/// with T - delta^2 < t < T. delta = infinity keeps the whole history.
inline TypeISeries type_one_series(const FlowHistory& h, const std::vector<CurvatureField>& curv, double T,
                                   double x0, double k = 10.0, double delta = infinity) {
  if (!(k > 0.0) || !(delta > 0.0))
    throw PreconditionError("window factor k and radius delta must be positive");
  TypeISeries s;
  s.T = T;
  s.x0 = x0;
  s.k = k;
  s.delta = delta;
  double sup = 0.0;
  for (std::size_t j = 0; j < h.snapshots.size(); ++j) {
    const auto& g = h.snapshots[j];
    if (!(g.time < T))
      continue;
    const double dt = T - g.time;
    if (!(dt < delta * delta))
      continue;
    const double half = std::min(k * std::sqrt(dt), delta);
    auto lo = std::lower_bound(g.x.begin(), g.x.end(), x0 - half);
    auto hi = std::upper_bound(g.x.begin(), g.x.end(), x0 + half);
    if (lo == hi) {
      ++s.empty_windows;
      continue;
    }
    double best = 0.0;
    for (auto it = lo; it != hi; ++it)
      best = std::max(best, curv[j].A2[static_cast<std::size_t>(it - g.x.begin())]);
    const double r = best * dt;
    sup = std::max(sup, r);
    s.times.push_back(g.time);
    s.ratios.push_back(r);
    s.running_sup.push_back(sup);
  }
  if (s.times.empty())
    throw InsufficientData("Type I window empty at every snapshot");
  return s;
}

inline TypeISeries type_one_series(const FlowHistory& h, double T, double x0, double k = 10.0,
                                   double delta = infinity) {
  return type_one_series(h, curvature_history(h), T, x0, k, delta);
}

struct TypeClassification {
  TypeClass type = TypeClass::undetermined;
  double final_sup = 0.0;       // sup over the final decade of T - t
  double running_sup = 0.0;     // sup over the whole series, reached by the final decade
  double trend = 0.0;           // d(ratio)/d(tau) over the final decade, relative to the mean
  std::size_t samples = 0;
  std::string note;
};

/// TypeI if the running sup reached by the final decade of T - t is below
/// threshold and the ratio does not grow there (slope in tau relative to the
/// mean <= trend_tol).
inline TypeClassification classify_type(const TypeISeries& s, double threshold = 5.0, double trend_tol = 0.05) {
  TypeClassification out;
  if (s.times.empty()) {
    out.note = "empty series";
    return out;
  }
  const double first = s.times.front();
  const double last_gap = s.T - s.times.back();
  if (!(last_gap > 0.0) || last_gap > 1e-2 * (s.T - first)) {
    out.note = "series ends too far from T";
    return out;
  }
  std::vector<double> tau, r;
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    if (s.T - s.times[i] <= 10.0 * last_gap) {
      tau.push_back(-std::log(s.T - s.times[i]));
      r.push_back(s.ratios[i]);
      out.final_sup = std::max(out.final_sup, s.ratios[i]);
    }
  }
  out.samples = r.size();
  if (r.size() < 3) {
    out.note = "fewer than 3 samples in the final decade";
    return out;
  }
  double tm = 0.0, rm = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    tm += tau[i];
    rm += r[i];
  }
  tm /= r.size();
  rm /= r.size();
  double stt = 0.0, str = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    stt += (tau[i] - tm) * (tau[i] - tm);
    str += (tau[i] - tm) * (r[i] - rm);
  }
  out.trend = stt > 0.0 ? (str / stt) / rm : 0.0;
  out.running_sup = s.running_sup.back();
  out.type = (out.running_sup < threshold && out.trend <= trend_tol) ? TypeClass::TypeI : TypeClass::TypeII_candidate;
  return out;
}

// ---------------------------------------------------------------------------

struct Lemma26Result {
  double eps0 = infinity;
  std::size_t used = 0;
  std::size_t dropped = 0;
};

/// min over samples of (|t - T| + eta |X - (x0, 0)|^2) / R(X)^2.
inline Lemma26Result lemma26_check(const FlowHistory& h, const std::vector<CurvatureField>& curv, double T,
                                   double x0, double eta, const std::vector<SpacetimePoint>& samples) {
  for (const auto& X : samples)
    if (!(X.t < T))
      throw PreconditionError("lemma26 samples need t < T");
  Lemma26Result out;
  for (const auto& X : samples) {
    try {
      const auto R = regularity_scale(h, curv, X);
      if (!(R.value > 0.0)) {
        ++out.dropped;
        continue;
      }
      const double d2 = (X.x - x0) * (X.x - x0) + X.r * X.r;
      out.eps0 = std::min(out.eps0, (std::abs(X.t - T) + eta * d2) / (R.value * R.value));
      ++out.used;
    } catch (const Error&) {
      ++out.dropped;
    }
  }
  if (out.used == 0)
    throw InsufficientData("no usable lemma26 sample");
  return out;
}

/// Low-discrepancy pairs in [0,1)^2 (Halton, bases 2 and 3).
inline double halton(std::size_t i, unsigned base) {
  double f = 1.0, r = 0.0;
  for (std::size_t k = i; k > 0; k /= base) {
    f /= base;
    r += f * static_cast<double>(k % base);
  }
  return r;
}

/// Time of the recorded slice nearest to t, among slices strictly before T.
inline double nearest_slice_time(const FlowHistory& h, double t, double T) {
  if (h.snapshots.empty() || !(h.first_time() < T))
    throw InsufficientData("no slice before T");
  std::size_t i = h.index_at_or_before(t);
  if (i + 1 < h.snapshots.size() && h.snapshots[i + 1].time < T &&
      h.snapshots[i + 1].time - t < t - h.snapshots[i].time)
    ++i;
  while (i > 0 && !(h.snapshots[i].time < T))
    --i;
  return h.snapshots[i].time;
}

/// Surface points at rescaled times tau in [tau_lo, tau_hi] and rescaled
/// positions |y| <= y_max around (x0, T). Times snap to the nearest slice:
/// between slices the regularity scale would see the older, thicker surface.
inline std::vector<SpacetimePoint> lemma26_samples(const FlowHistory& h, double T, double x0, std::size_t count,
                                                   double tau_lo, double tau_hi, double y_max) {
  std::vector<SpacetimePoint> out;
  out.reserve(count);
  for (std::size_t i = 1; i <= count; ++i) {
    const double tau = tau_lo + (tau_hi - tau_lo) * halton(i, 2);
    const double y = -y_max + 2.0 * y_max * halton(i, 3);
    const double t = nearest_slice_time(h, T - std::exp(-tau), T);
    const double s = std::sqrt(T - t);
    const double x = x0 + y * s;
    out.push_back({x, sample_radius(h, x, t), t});
  }
  return out;
}

// ---------------------------------------------------------------------------

struct DisconnectionResult {
  bool applicable = true;
  bool disconnects = false;
  double left_radius = 0.0;
  double right_radius = 0.0;
  std::vector<double> distances;  // dyadic |x - x0|, decreasing
  std::vector<double> ratios;     // U(x, t_final)/|x - x0|, both sides averaged
  std::size_t decreasing_run = 0; // longest run of consecutive scales with decreasing ratio
  double decrement_ratio = 0.0;   // smallest (r[i] - r[i+1]) / (r[i-1] - r[i]) over the innermost scales
  bool trend_ok = false;
  std::string note;
};

/// Side survival at |x - x0| = r_diag and the trend of U/|x - x0| toward the
/// pinch on the final slice. The innermost `min_scales` + 1 dyadic ratios must
/// decrease, and the decrements must not halve from scale to scale: a profile
/// c|x| + O(|x|^p) approaches c with decrement ratio 2^(1-p), an o(|x|) profile
/// like |x|/sqrt(log(1/|x|)) with ratio close to 1.
inline DisconnectionResult disconnection_check(const ProfileGrid& final_slice, double x0, double r_diag,
                                               double survival_threshold, double d_min,
                                               std::size_t min_scales = 3) {
  DisconnectionResult out;
  const ProfileSampler sampler(final_slice);
  const double lo = sampler.lower(), hi = sampler.upper();
  auto at = [&](double x) { return (x < lo || x > hi) ? 0.0 : sampler.radius(x); };
  out.left_radius = at(x0 - r_diag);
  out.right_radius = at(x0 + r_diag);
  out.disconnects = out.left_radius >= survival_threshold && out.right_radius >= survival_threshold;
  for (double d = r_diag; d >= d_min; d *= 0.5) {
    const double l = at(x0 - d), r = at(x0 + d);
    if (l <= 0.0 || r <= 0.0)
      break;
    out.distances.push_back(d);
    out.ratios.push_back(0.5 * (l + r) / d);
  }
  std::size_t run = 1;
  out.decreasing_run = out.ratios.empty() ? 0 : 1;
  for (std::size_t i = 1; i < out.ratios.size(); ++i) {
    run = out.ratios[i] < out.ratios[i - 1] * (1.0 - 1e-9) ? run + 1 : 1;
    out.decreasing_run = std::max(out.decreasing_run, run);
  }
  const std::size_t m = out.ratios.size();
  if (min_scales < 2 || m < min_scales + 1) {
    out.note = "too few dyadic scales for the trend";
    return out;
  }
  bool tail_decreasing = true;
  out.decrement_ratio = infinity;
  for (std::size_t i = m - min_scales; i < m; ++i) {
    tail_decreasing = tail_decreasing && out.ratios[i] < out.ratios[i - 1] * (1.0 - 1e-9);
    if (i > m - min_scales)
      out.decrement_ratio = std::min(out.decrement_ratio, (out.ratios[i - 1] - out.ratios[i]) /
                                                              (out.ratios[i - 2] - out.ratios[i - 1]));
  }
  out.trend_ok = tail_decreasing && out.decrement_ratio >= 0.75;
  return out;
}

inline DisconnectionResult disconnection_check(const FlowHistory& h, const SingularityReport& rep, double r_diag,
                                               double survival_threshold, std::size_t min_scales = 3) {
  if (rep.kind != SingularityKind::neckpinch) {
    DisconnectionResult out;
    out.applicable = false;
    out.note = "not applicable: kind is " + std::string(to_string(rep.kind));
    return out;
  }
  const auto& g = h.snapshots.back();
  // inside y ~ sqrt(tau) the inner cylinder dominates and U/|x| grows again
  const double gap = std::max(rep.T - g.time, 0.0);
  const double tau = gap < 1.0 ? std::max(-std::log(gap), 1.0) : 1.0;
  const double d_min = 10.0 * std::sqrt(tau * gap);
  return disconnection_check(g, rep.x0, r_diag, survival_threshold, d_min, min_scales);
}

// ---------------------------------------------------------------------------

struct NeighborhoodWindow {
  double x0 = 0.0;
  double half_width = 0.3;
  double t_from = 0.0;
  double t_to = 0.0;
  std::size_t max_slices = 24;  // evenly strided subset of the slices in [t_from, t_to]
};

struct NeighborhoodConstants {
  double eta_H = infinity;
  double eta_2cvx = infinity;
  double alpha_min = infinity;
  bool mean_convex = true;
  std::size_t slices = 0;
};

inline NeighborhoodConstants neighborhood_constants(const FlowHistory& h, const std::vector<CurvatureField>& curv,
                                                    const NeighborhoodWindow& w) {
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < h.snapshots.size(); ++j)
    if (h.snapshots[j].time >= w.t_from && h.snapshots[j].time <= w.t_to)
      idx.push_back(j);
  if (idx.empty())
    throw InsufficientData("no snapshot inside the neighbourhood window");
  if (w.max_slices > 0 && idx.size() > w.max_slices) {
    std::vector<std::size_t> pick;
    for (std::size_t i = 0; i < w.max_slices; ++i)
      pick.push_back(idx[i * (idx.size() - 1) / (w.max_slices - 1)]);
    pick.erase(std::unique(pick.begin(), pick.end()), pick.end());
    idx = std::move(pick);
  }
  NeighborhoodConstants out;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t j : idx) {
    const auto& g = h.snapshots[j];
    const auto a = static_cast<std::size_t>(std::lower_bound(g.x.begin(), g.x.end(), w.x0 - w.half_width) - g.x.begin());
    const auto b = static_cast<std::size_t>(std::upper_bound(g.x.begin(), g.x.end(), w.x0 + w.half_width) - g.x.begin());
    ranges.emplace_back(a, b);
    for (std::size_t i = a; i < b; ++i)
      out.eta_H = std::min(out.eta_H, curv[j].H[i]);
  }
  out.slices = idx.size();
  if (!(out.eta_H > 0.0)) {
    out.mean_convex = false;
    out.eta_2cvx = std::numeric_limits<double>::quiet_NaN();
    out.alpha_min = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto [a, b] = ranges[k];
    if (a >= b)
      continue;
    out.eta_2cvx = std::min(out.eta_2cvx, two_convexity_ratio(curv[idx[k]], a, b));
    out.alpha_min = std::min(out.alpha_min, noncollapsedness(h.snapshots[idx[k]], a, b).min_alpha);
  }
  return out;
}

} // namespace neckpinch
