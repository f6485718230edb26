#pragma once

// Discrete differential geometry of hypersurfaces of revolution r = U(x):
// principal curvatures, 2-convexity, noncollapsedness, and the regularity
// and cylindrical scales of a discrete flow.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "neckpinch/flow_history.hpp"
#include "neckpinch/profile_grid.hpp"

namespace neckpinch {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

struct CurvatureField {
  int n = 2;
  std::vector<double> kappa1;  // profile (meridian) curvature
  std::vector<double> kappa2;  // rotational curvature, multiplicity n-1
  std::vector<double> H;
  std::vector<double> A2;
  std::vector<double> slope;   // U_x
  std::vector<double> second;  // U_xx

  std::size_t size() const { return H.size(); }
};

/// Curvatures at every node. Where the graph is shallow the classical
/// formulas in U are used; next to cap tips or where |U_x| > 1 the same
/// quantities are computed from v = U^2, which stays smooth up to the axis.
inline CurvatureField compute_curvatures(const ProfileGrid& g) {
  validate(g);
  const std::size_t m = g.size();
  std::vector<double> v(m);
  for (std::size_t i = 0; i < m; ++i)
    v[i] = g.radius[i] * g.radius[i];
  const auto ev = extend(g, v, 0.0);
  const auto eu = extend(g, g.radius, 0.0);
  const double nm1 = g.n - 1;

  CurvatureField c;
  c.n = g.n;
  c.kappa1.resize(m);
  c.kappa2.resize(m);
  c.H.resize(m);
  c.A2.resize(m);
  c.slope.resize(m);
  c.second.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double hm = ev.x[i + 1] - ev.x[i];
    const double hp = ev.x[i + 2] - ev.x[i + 1];
    const auto d1 = first_derivative_stencil(hm, hp);
    const auto d2 = second_derivative_stencil(hm, hp);
    const double U = g.radius[i];
    const double vi = v[i];
    const double p = d1.apply(ev.f[i], ev.f[i + 1], ev.f[i + 2]);
    const bool near_tip = (i == 0 && ev.left_tip) || (i + 1 == m && ev.right_tip);
    double k1, k2, ux, uxx;
    if (near_tip || std::abs(p / (2.0 * U)) > 1.0) {
      const double q = d2.apply(ev.f[i], ev.f[i + 1], ev.f[i + 2]);
      const double w = 4.0 * vi + p * p;
      k2 = 2.0 / std::sqrt(w);
      k1 = -2.0 * (2.0 * vi * q - p * p) / (w * std::sqrt(w));
      ux = p / (2.0 * U);
      uxx = q / (2.0 * U) - p * p / (4.0 * U * U * U);
    } else {
      ux = d1.apply(eu.f[i], eu.f[i + 1], eu.f[i + 2]);
      uxx = d2.apply(eu.f[i], eu.f[i + 1], eu.f[i + 2]);
      const double s = 1.0 + ux * ux;
      k1 = -uxx / (s * std::sqrt(s));
      k2 = 1.0 / (U * std::sqrt(s));
    }
    if (!std::isfinite(k1) || !std::isfinite(k2))
      throw NumericalError("non-finite curvature at node " + std::to_string(i));
    c.kappa1[i] = k1;
    c.kappa2[i] = k2;
    c.H[i] = k1 + nm1 * k2;
    c.A2[i] = k1 * k1 + nm1 * k2 * k2;
    c.slope[i] = ux;
    c.second[i] = uxx;
  }
  return c;
}

/// Sum of the two smallest principal curvatures at one node.
inline double two_smallest_sum(double k1, double k2, int n) {
  if (n == 2)
    return k1 + k2;
  return k1 <= k2 ? k1 + k2 : 2.0 * k2;
}

/// min over [first, last) of (lambda_1 + lambda_2) / H.
inline double two_convexity_ratio(const CurvatureField& f, std::size_t first, std::size_t last) {
  if (first >= last || last > f.size())
    throw PreconditionError("empty or out-of-range window for two-convexity");
  double best = infinity;
  for (std::size_t i = first; i < last; ++i) {
    if (!(f.H[i] > 0.0))
      throw PreconditionError("mean curvature not positive at node " + std::to_string(i) +
                              " (region is not mean convex)");
    best = std::min(best, two_smallest_sum(f.kappa1[i], f.kappa2[i], f.n) / f.H[i]);
  }
  return best;
}

inline double two_convexity_ratio(const CurvatureField& f) { return two_convexity_ratio(f, 0, f.size()); }

// ---------------------------------------------------------------------------

struct Noncollapsedness {
  std::vector<std::size_t> nodes;
  std::vector<double> alpha;
  std::vector<double> r_in;
  std::vector<double> r_ext;
  double min_alpha = infinity;
};

namespace detail {

struct Point2 {
  double x, r;
};

/// Meridian curve of the surface, densified with the cubic interpolant, with
/// neighbouring copies (mirror images at neumann ends, shifted copies for
/// periodic grids) and the reflection across the axis. A ball in R^{n+1}
/// tangent at a meridian point misses the surface iff the meridian disk misses
/// all of these points.
inline std::vector<Point2> meridian_cloud(const ProfileGrid& g, int subdivisions) {
  const ProfileSampler sampler(g);
  std::vector<Point2> base;
  std::vector<double> xs;
  xs.reserve(g.size() + 2);
  if (g.left == EndCondition::cap)
    xs.push_back(g.left_end);
  xs.insert(xs.end(), g.x.begin(), g.x.end());
  if (g.right == EndCondition::cap)
    xs.push_back(g.right_end);
  if (g.periodic())
    xs.push_back(g.right_end);
  base.reserve(xs.size() * subdivisions);
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    for (int k = 0; k < subdivisions; ++k) {
      const double xq = xs[i] + (xs[i + 1] - xs[i]) * k / subdivisions;
      base.push_back({xq, sampler.radius(xq)});
    }
  }
  base.push_back({xs.back(), sampler.radius(xs.back())});

  std::vector<Point2> cloud = base;
  if (g.periodic()) {
    for (const auto& p : base) {
      cloud.push_back({p.x - g.period(), p.r});
      cloud.push_back({p.x + g.period(), p.r});
    }
  } else {
    if (g.left == EndCondition::neumann)
      for (const auto& p : base)
        cloud.push_back({2.0 * g.left_end - p.x, p.r});
    if (g.right == EndCondition::neumann)
      for (const auto& p : base)
        cloud.push_back({2.0 * g.right_end - p.x, p.r});
  }
  const std::size_t half = cloud.size();
  cloud.reserve(2 * half);
  for (std::size_t i = 0; i < half; ++i)
    cloud.push_back({cloud[i].x, -cloud[i].r});
  return cloud;
}

/// Largest disk tangent at p with unit normal nrm (pointing into the disk)
/// containing none of the cloud points: the constraint from a point q is
/// rho <= |q-p|^2 / (2 nrm.(q-p)) whenever nrm.(q-p) > 0.
inline double tangent_disk_radius(const std::vector<Point2>& cloud, Point2 p, Point2 nrm, double scale) {
  double best = infinity;
  const double eps = 1e-12 * scale;
  for (const auto& q : cloud) {
    const double dx = q.x - p.x;
    const double dr = q.r - p.r;
    const double dd = dx * dx + dr * dr;
    if (dd <= eps * eps)
      continue;
    const double proj = nrm.x * dx + nrm.r * dr;
    if (proj <= 0.0)
      continue;
    best = std::min(best, dd / (2.0 * proj));
  }
  return best;
}

} // namespace detail

/// alpha(x) = H(x) * min(r_in, r_ext) at the nodes [first, last).
inline Noncollapsedness noncollapsedness(const ProfileGrid& g, std::size_t first, std::size_t last,
                                         int subdivisions = 4) {
  const auto curv = compute_curvatures(g);
  if (first >= last || last > g.size())
    throw PreconditionError("empty or out-of-range window for noncollapsedness");
  const auto cloud = detail::meridian_cloud(g, subdivisions);
  const ProfileSampler sampler(g);
  const double scale = (g.right_end - g.left_end) + *std::max_element(g.radius.begin(), g.radius.end());
  Noncollapsedness out;
  for (std::size_t i = first; i < last; ++i) {
    if (!(curv.H[i] > 0.0))
      throw PreconditionError("noncollapsedness needs H > 0; H = " + std::to_string(curv.H[i]) + " at node " +
                              std::to_string(i));
    // normal of the interpolated curve itself: the disk test is ill-conditioned
    // against a normal that disagrees with the cloud at O(h^2)
    const double ux = sampler.slope(g.x[i]);
    const double s = std::sqrt(1.0 + ux * ux);
    const detail::Point2 inward{ux / s, -1.0 / s};
    const detail::Point2 p{g.x[i], g.radius[i]};
    const double rin = detail::tangent_disk_radius(cloud, p, inward, scale);
    const double rext = detail::tangent_disk_radius(cloud, p, {-inward.x, -inward.r}, scale);
    const double a = curv.H[i] * std::min(rin, rext);
    out.nodes.push_back(i);
    out.r_in.push_back(rin);
    out.r_ext.push_back(rext);
    out.alpha.push_back(a);
    out.min_alpha = std::min(out.min_alpha, a);
  }
  return out;
}

inline Noncollapsedness noncollapsedness(const ProfileGrid& g) { return noncollapsedness(g, 0, g.size()); }

// ---------------------------------------------------------------------------

/// Spacetime point (x, t) at distance r from the axis (r = 0: on the axis).
struct SpacetimePoint {
  double x = 0.0;
  double r = 0.0;
  double t = 0.0;
};

struct ScaleResult {
  double value = 0.0;
  bool time_truncated = false;   // window (t - r^2, t] starts before the history
  bool space_truncated = false;  // ball crosses a non-cap end of the domain
};

inline std::vector<CurvatureField> curvature_history(const FlowHistory& h) {
  std::vector<CurvatureField> out;
  out.reserve(h.snapshots.size());
  for (const auto& g : h.snapshots)
    out.push_back(compute_curvatures(g));
  return out;
}

/// Regularity scale: sup r such that |A| <= 1/r on B(x, r) for every recorded
/// slice with time in (t - r^2, t] (the slice at or before t always counts).
/// `curv` must be curvature_history(h).
inline ScaleResult regularity_scale(const FlowHistory& h, const std::vector<CurvatureField>& curv,
                                    SpacetimePoint X) {
  if (h.snapshots.empty())
    throw InsufficientData("empty history");
  if (X.t < h.first_time())
    throw InsufficientData("regularity scale requested before the first snapshot");
  const std::size_t current = h.index_at_or_before(X.t);

  auto ok = [&](double r) {
    const double bound = 1.0 / (r * r);
    for (std::size_t j = current + 1; j-- > 0;) {
      const auto& g = h.snapshots[j];
      if (j != current && g.time <= X.t - r * r)
        break;
      const auto& c = curv[j];
      auto lo = std::lower_bound(g.x.begin(), g.x.end(), X.x - r);
      auto hi = std::upper_bound(g.x.begin(), g.x.end(), X.x + r);
      for (auto it = lo; it != hi; ++it) {
        const std::size_t k = static_cast<std::size_t>(it - g.x.begin());
        const double dx = g.x[k] - X.x;
        const double dr = g.radius[k] - X.r;
        if (dx * dx + dr * dr < r * r && c.A2[k] > bound)
          return false;
      }
    }
    return true;
  };

  const auto& now = h.snapshots[current];
  const double span = now.right_end - now.left_end;
  double lo = 0.0;
  double hi = span;
  if (!ok(hi)) {
    for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (ok(mid) ? lo : hi) = mid;
    }
  } else {
    lo = hi;
  }
  ScaleResult res;
  res.value = lo;
  res.time_truncated = X.t - lo * lo < h.first_time();
  res.space_truncated = (now.left != EndCondition::cap && X.x - lo < now.left_end) ||
                        (now.right != EndCondition::cap && X.x + lo > now.right_end);
  return res;
}

inline ScaleResult regularity_scale(const FlowHistory& h, SpacetimePoint X) {
  return regularity_scale(h, curvature_history(h), X);
}

// ---------------------------------------------------------------------------

namespace detail {

/// U, U_x, U_xx of a slice at arbitrary x (U from the cubic interpolant of
/// U^2, derivatives linear between nodes).
class SliceEvaluator {
public:
  SliceEvaluator(const ProfileGrid& g, const CurvatureField& c) : g_(&g), c_(&c), sampler_(g) {}

  bool covers(double x) const { return x >= g_->x.front() && x <= g_->x.back(); }
  std::size_t nodes_in(double a, double b) const {
    auto lo = std::lower_bound(g_->x.begin(), g_->x.end(), a);
    auto hi = std::upper_bound(g_->x.begin(), g_->x.end(), b);
    return static_cast<std::size_t>(hi - lo);
  }

  struct Values {
    double u, ux, uxx;
  };

  Values at(double x) const {
    const auto& xs = g_->x;
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t i = it == xs.begin() ? 0 : static_cast<std::size_t>(it - xs.begin()) - 1;
    i = std::min(i, xs.size() - 2);
    const double th = std::clamp((x - xs[i]) / (xs[i + 1] - xs[i]), 0.0, 1.0);
    return {sampler_.radius(x), (1 - th) * c_->slope[i] + th * c_->slope[i + 1],
            (1 - th) * c_->second[i] + th * c_->second[i + 1]};
  }

private:
  const ProfileGrid* g_;
  const CurvatureField* c_;
  ProfileSampler sampler_;
};

} // namespace detail

struct CylindricalScaleResult {
  double value = infinity;  // +inf: no representable dyadic scale is cylinder-close
  int exponent = 0;         // value == 2^exponent when finite
  int smallest_exponent = 0;
  int largest_exponent = 0;
};

/// Smallest dyadic r = 2^k such that the flow rescaled about X by 1/r is
/// eps-close to the unit shrinking cylinder on |y| <= 1 for rescaled times
/// -1 <= s <= -1/e, measured by max(|u-u_c|/u_c, |u_y|, u_c |u_yy|).
inline CylindricalScaleResult cylindrical_scale(const FlowHistory& h, const std::vector<CurvatureField>& curv,
                                                double x, double t, double eps) {
  if (h.snapshots.size() < 2)
    throw InsufficientData("cylindrical scale needs at least two snapshots");
  if (!(eps > 0.0))
    throw PreconditionError("eps must be positive");
  const int n = h.n();
  const double t0 = h.first_time();
  const double t1 = h.last_time();
  const double e = std::exp(1.0);

  double min_spacing = infinity;
  for (const auto& g : h.snapshots)
    for (std::size_t i = 1; i < g.size(); ++i)
      min_spacing = std::min(min_spacing, g.x[i] - g.x[i - 1]);
  const auto& first = h.snapshots.front();
  const double domain = first.x.back() - first.x.front();

  // Rescaled window times s = t - r^2 exp(-theta), theta in [0, 1].
  const double r_time_min = t > t1 ? std::sqrt(e * (t - t1)) : 0.0;
  const double r_time_max = t > t0 ? std::sqrt(t - t0) : 0.0;
  CylindricalScaleResult out;
  out.smallest_exponent = static_cast<int>(std::ceil(std::log2(std::max({r_time_min, 2.0 * min_spacing}))));
  out.largest_exponent = static_cast<int>(std::floor(std::log2(std::min(r_time_max, 0.5 * domain))));
  if (out.smallest_exponent > out.largest_exponent)
    throw InsufficientData("history too short to evaluate any dyadic cylindrical scale");

  constexpr int time_samples = 5;
  constexpr int space_samples = 21;
  for (int k = out.smallest_exponent; k <= out.largest_exponent; ++k) {
    const double r = std::ldexp(1.0, k);
    bool representable = true;
    double err = 0.0;
    for (int a = 0; a < time_samples && representable; ++a) {
      const double theta = static_cast<double>(a) / (time_samples - 1);
      const double s = t - r * r * std::exp(-theta);
      const double uc = std::sqrt(2.0 * (n - 1) * std::exp(-theta));
      const std::size_t j = h.index_at_or_before(s);
      const std::size_t j2 = std::min(j + 1, h.snapshots.size() - 1);
      const detail::SliceEvaluator A(h.snapshots[j], curv[j]);
      const detail::SliceEvaluator B(h.snapshots[j2], curv[j2]);
      const double ta = h.snapshots[j].time;
      const double tb = h.snapshots[j2].time;
      const double w = (j2 == j || tb == ta) ? 0.0 : std::clamp((s - ta) / (tb - ta), 0.0, 1.0);
      if (!A.covers(x - r) || !A.covers(x + r) || !B.covers(x - r) || !B.covers(x + r) ||
          A.nodes_in(x - r, x + r) < 5) {
        representable = false;
        break;
      }
      for (int b = 0; b < space_samples; ++b) {
        const double y = -1.0 + 2.0 * b / (space_samples - 1);
        const auto va = A.at(x + r * y);
        const auto vb = B.at(x + r * y);
        const double u = ((1 - w) * va.u + w * vb.u) / r;
        const double uy = (1 - w) * va.ux + w * vb.ux;
        const double uyy = r * ((1 - w) * va.uxx + w * vb.uxx);
        err = std::max({err, std::abs(u - uc) / uc, std::abs(uy), uc * std::abs(uyy)});
      }
    }
    if (representable && err <= eps) {
      out.value = r;
      out.exponent = k;
      return out;
    }
  }
  return out;
}

inline CylindricalScaleResult cylindrical_scale(const FlowHistory& h, double x, double t, double eps) {
  return cylindrical_scale(h, curvature_history(h), x, t, eps);
}

} // namespace neckpinch
