#pragma once

// Time slice of a rotationally symmetric hypersurface r = U(x) in R^{n+1},
// plus the small numerical toolkit shared by every module: nonuniform
// three-point stencils, ghost/tip extension of nodal data and a
// monotonicity-limited cubic interpolant.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neckpinch/errors.hpp"

namespace neckpinch {

enum class EndCondition {
  neumann,  // mirror plane: U_x = 0
  periodic, // necklace: data repeats with period right_end - left_end
  cap,      // surface closes on the axis at left_end / right_end (U = 0)
};

inline std::string_view to_string(EndCondition e) {
  switch (e) {
  case EndCondition::neumann:
    return "neumann";
  case EndCondition::periodic:
    return "periodic";
  case EndCondition::cap:
    return "cap";
  }
  return "?";
}

inline EndCondition parse_end_condition(std::string_view s) {
  if (s == "neumann")
    return EndCondition::neumann;
  if (s == "periodic")
    return EndCondition::periodic;
  if (s == "cap")
    return EndCondition::cap;
  throw PreconditionError("unknown boundary condition '" + std::string(s) + "'");
}

struct ProfileGrid {
  int n = 2;                 // hypersurface dimension (surface sits in R^{n+1})
  std::vector<double> x;     // strictly increasing axis nodes
  std::vector<double> radius;
  double time = 0.0;
  EndCondition left = EndCondition::neumann;
  EndCondition right = EndCondition::neumann;
  // neumann: the end node; cap: the tip where U = 0 (outside the nodes);
  // periodic: left_end = x.front(), right_end = x.front() + period.
  double left_end = 0.0;
  double right_end = 0.0;

  std::size_t size() const { return x.size(); }
  double period() const { return right_end - left_end; }
  bool periodic() const { return left == EndCondition::periodic; }
  bool has_cap() const { return left == EndCondition::cap || right == EndCondition::cap; }

  static ProfileGrid neumann(int n, std::vector<double> x, std::vector<double> u, double t = 0.0) {
    ProfileGrid g{n, std::move(x), std::move(u), t};
    if (!g.x.empty()) {
      g.left_end = g.x.front();
      g.right_end = g.x.back();
    }
    return g;
  }

  static ProfileGrid periodic_grid(int n, std::vector<double> x, std::vector<double> u, double period,
                                   double t = 0.0) {
    ProfileGrid g{n, std::move(x), std::move(u), t, EndCondition::periodic, EndCondition::periodic};
    if (!g.x.empty()) {
      g.left_end = g.x.front();
      g.right_end = g.x.front() + period;
    }
    return g;
  }
};

inline void validate(const ProfileGrid& g) {
  if (g.n < 2)
    throw InvalidGrid("dimension n must be >= 2, got " + std::to_string(g.n));
  if (g.x.size() != g.radius.size())
    throw InvalidGrid("nodes and radii differ in length");
  if (g.x.size() < 5)
    throw InvalidGrid("grid needs at least 5 nodes, got " + std::to_string(g.x.size()));
  if (!std::isfinite(g.time))
    throw InvalidGrid("non-finite time");
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    if (!std::isfinite(g.x[i]) || !std::isfinite(g.radius[i]))
      throw InvalidGrid("non-finite value at node " + std::to_string(i));
    if (g.radius[i] <= 0.0)
      throw InvalidGrid("radius must be positive at node " + std::to_string(i));
    if (i > 0 && !(g.x[i] > g.x[i - 1]))
      throw InvalidGrid("nodes must be strictly increasing at node " + std::to_string(i));
  }
  if ((g.left == EndCondition::periodic) != (g.right == EndCondition::periodic))
    throw InvalidGrid("periodic boundary must be applied at both ends");
  switch (g.left) {
  case EndCondition::neumann:
    if (g.left_end != g.x.front())
      throw InvalidGrid("neumann left end must coincide with the first node");
    break;
  case EndCondition::cap:
    if (!(g.left_end < g.x.front()))
      throw InvalidGrid("left cap tip must lie before the first node");
    break;
  case EndCondition::periodic:
    if (g.left_end != g.x.front() || !(g.right_end > g.x.back()))
      throw InvalidGrid("periodic ends must bracket the nodes");
    break;
  }
  switch (g.right) {
  case EndCondition::neumann:
    if (g.right_end != g.x.back())
      throw InvalidGrid("neumann right end must coincide with the last node");
    break;
  case EndCondition::cap:
    if (!(g.right_end > g.x.back()))
      throw InvalidGrid("right cap tip must lie after the last node");
    break;
  case EndCondition::periodic:
    break;
  }
}

// ---------------------------------------------------------------------------
// Nonuniform three-point stencils. hm = x_i - x_{i-1}, hp = x_{i+1} - x_i.

struct Stencil {
  double m, c, p;
  // differences against the centre: exact zero on constants
  double apply(double fm, double fc, double fp) const { return m * (fm - fc) + p * (fp - fc); }
};

inline Stencil first_derivative_stencil(double hm, double hp) {
  const double s = hm + hp;
  return {-hp / (hm * s), (hp - hm) / (hm * hp), hm / (hp * s)};
}

inline Stencil second_derivative_stencil(double hm, double hp) {
  const double s = hm + hp;
  return {2.0 / (hm * s), -2.0 / (hm * hp), 2.0 / (hp * s)};
}

/// Derivative at x0 of the parabola through (x0,f0), (x1,f1), (x2,f2);
/// used one-sided at tips and domain ends.
inline double one_sided_derivative(double x0, double f0, double x1, double f1, double x2, double f2) {
  const double h1 = x1 - x0;
  const double h2 = x2 - x0;
  return (f1 * h2 * h2 - f2 * h1 * h1 - f0 * (h2 * h2 - h1 * h1)) / (h1 * h2 * (h2 - h1));
}

/// Nodal data with one extra point on each side: the mirror ghost for a
/// neumann end, the wrapped neighbour for periodic ends, the tip for a cap.
struct ExtendedLine {
  std::vector<double> x;
  std::vector<double> f;
  bool left_tip = false;
  bool right_tip = false;
};

inline ExtendedLine extend(const ProfileGrid& g, std::span<const double> f, double tip_value) {
  const std::size_t m = g.x.size();
  ExtendedLine e;
  e.x.resize(m + 2);
  e.f.resize(m + 2);
  std::copy(g.x.begin(), g.x.end(), e.x.begin() + 1);
  std::copy(f.begin(), f.end(), e.f.begin() + 1);
  switch (g.left) {
  case EndCondition::neumann:
    e.x[0] = 2.0 * g.x[0] - g.x[1];
    e.f[0] = f[1];
    break;
  case EndCondition::periodic:
    e.x[0] = g.x[m - 1] - g.period();
    e.f[0] = f[m - 1];
    break;
  case EndCondition::cap:
    e.x[0] = g.left_end;
    e.f[0] = tip_value;
    e.left_tip = true;
    break;
  }
  switch (g.right) {
  case EndCondition::neumann:
    e.x[m + 1] = 2.0 * g.x[m - 1] - g.x[m - 2];
    e.f[m + 1] = f[m - 2];
    break;
  case EndCondition::periodic:
    e.x[m + 1] = g.x[0] + g.period();
    e.f[m + 1] = f[0];
    break;
  case EndCondition::cap:
    e.x[m + 1] = g.right_end;
    e.f[m + 1] = tip_value;
    e.right_tip = true;
    break;
  }
  return e;
}

// ---------------------------------------------------------------------------

/// Piecewise cubic Hermite interpolant. Node slopes come from the local
/// parabola (second order); where the data is locally monotone the slope is
/// clipped to 3x the smaller secant so no new extrema appear. Slopes at
/// genuine extrema are left alone, which keeps third-order accuracy there.
class MonotoneCubic {
public:
  MonotoneCubic() = default;

  MonotoneCubic(std::vector<double> x, std::vector<double> f) : x_(std::move(x)), f_(std::move(f)) {
    const std::size_t m = x_.size();
    if (m < 2 || f_.size() != m)
      throw PreconditionError("interpolant needs at least two matching samples");
    d_.resize(m);
    if (m == 2) {
      d_[0] = d_[1] = (f_[1] - f_[0]) / (x_[1] - x_[0]);
      return;
    }
    for (std::size_t i = 1; i + 1 < m; ++i) {
      const auto w = first_derivative_stencil(x_[i] - x_[i - 1], x_[i + 1] - x_[i]);
      d_[i] = w.apply(f_[i - 1], f_[i], f_[i + 1]);
    }
    d_[0] = one_sided_derivative(x_[0], f_[0], x_[1], f_[1], x_[2], f_[2]);
    d_[m - 1] = one_sided_derivative(x_[m - 1], f_[m - 1], x_[m - 2], f_[m - 2], x_[m - 3], f_[m - 3]);

    auto secant = [&](std::size_t i) { return (f_[i + 1] - f_[i]) / (x_[i + 1] - x_[i]); };
    auto clip = [](double d, double s) {
      if (s == 0.0 || d * s < 0.0)
        return 0.0;
      const double lim = 3.0 * std::abs(s);
      return std::abs(d) > lim ? std::copysign(lim, s) : d;
    };
    for (std::size_t i = 1; i + 1 < m; ++i) {
      const double sl = secant(i - 1);
      const double sr = secant(i);
      if (sl * sr > 0.0)
        d_[i] = clip(d_[i], std::abs(sl) < std::abs(sr) ? sl : sr);
    }
    d_[0] = clip(d_[0], secant(0));
    d_[m - 1] = clip(d_[m - 1], secant(m - 2));
  }

  double lower() const { return x_.front(); }
  double upper() const { return x_.back(); }

  double operator()(double xq) const {
    const std::size_t i = cell(xq);
    const double h = x_[i + 1] - x_[i];
    const double s = (xq - x_[i]) / h;
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    return h00 * f_[i] + h10 * h * d_[i] + h01 * f_[i + 1] + h11 * h * d_[i + 1];
  }

  double derivative(double xq) const {
    const std::size_t i = cell(xq);
    const double h = x_[i + 1] - x_[i];
    const double s = (xq - x_[i]) / h;
    const double s2 = s * s;
    return (6 * s2 - 6 * s) / h * (f_[i] - f_[i + 1]) + (3 * s2 - 4 * s + 1) * d_[i] + (3 * s2 - 2 * s) * d_[i + 1];
  }

private:
  std::size_t cell(double xq) const {
    const double tol = 1e-12 * (x_.back() - x_.front());
    if (xq < x_.front() - tol || xq > x_.back() + tol)
      throw PreconditionError("interpolation point " + std::to_string(xq) + " outside [" +
                              std::to_string(x_.front()) + ", " + std::to_string(x_.back()) + "]");
    auto it = std::upper_bound(x_.begin(), x_.end(), xq);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    return std::min(i, x_.size() - 2);
  }

  std::vector<double> x_, f_, d_;
};

/// Evaluates U at arbitrary axis positions of a grid. Interpolates U^2, which
/// stays smooth through cap tips, and extends over the ghost/tip points.
class ProfileSampler {
public:
  explicit ProfileSampler(const ProfileGrid& g) : periodic_(g.periodic()), lo_(g.left_end), period_(g.period()) {
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = g.radius[i] * g.radius[i];
    auto e = extend(g, v, 0.0);
    interp_ = MonotoneCubic(std::move(e.x), std::move(e.f));
  }

  double lower() const { return interp_.lower(); }
  double upper() const { return interp_.upper(); }

  double radius_squared(double xq) const {
    if (periodic_) {
      xq = lo_ + std::fmod(xq - lo_, period_);
      if (xq < lo_)
        xq += period_;
    }
    return interp_(xq);
  }

  double radius(double xq) const { return std::sqrt(std::max(radius_squared(xq), 0.0)); }

  /// dU/dx of the interpolant (infinite at a tip).
  double slope(double xq) const {
    if (periodic_) {
      xq = lo_ + std::fmod(xq - lo_, period_);
      if (xq < lo_)
        xq += period_;
    }
    return interp_.derivative(xq) / (2.0 * radius(xq));
  }

private:
  MonotoneCubic interp_;
  bool periodic_;
  double lo_, period_;
};

// ---------------------------------------------------------------------------

/// Where the profile is thinnest in the sense that matters for pinching.
struct Waist {
  double radius = 0.0;     // smallest neck radius, or max radius for a neckless capped body
  double x = 0.0;          // sub-node location (parabolic vertex)
  std::size_t index = 0;   // nearest node
  std::size_t necks = 0;   // number of local minima of U
  bool is_neck = false;    // waist sits at a local minimum
  bool uniform = false;    // U constant to round-off
};

inline Waist find_waist(const ProfileGrid& g) {
  const std::size_t m = g.size();
  const auto e = extend(g, g.radius, 0.0);
  Waist w;
  const auto [mn, mx] = std::minmax_element(g.radius.begin(), g.radius.end());
  w.uniform = (*mx - *mn) <= 1e-9 * *mx;

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    const double l = e.f[i];
    const double c = e.f[i + 1];
    const double r = e.f[i + 2];
    const bool tip_neighbour = (i == 0 && e.left_tip) || (i + 1 == m && e.right_tip);
    if (tip_neighbour)
      continue;
    if (c <= l && c <= r && (c < l || c < r)) {
      ++w.necks;
      if (c < best) {
        best = c;
        w.index = i;
      }
    }
  }
  if (w.necks > 0) {
    w.is_neck = true;
    w.radius = best;
  } else if (g.has_cap()) {
    w.index = static_cast<std::size_t>(mx - g.radius.begin());
    w.radius = *mx;
  } else {
    w.index = static_cast<std::size_t>(mn - g.radius.begin());
    w.radius = *mn;
  }
  // Vertex of the parabola through the node and its neighbours.
  const std::size_t i = w.index;
  const double xm = e.x[i], x0 = e.x[i + 1], xp = e.x[i + 2];
  const double fm = e.f[i], f0 = e.f[i + 1], fp = e.f[i + 2];
  const auto d1 = first_derivative_stencil(x0 - xm, xp - x0);
  const auto d2 = second_derivative_stencil(x0 - xm, xp - x0);
  const double slope = d1.apply(fm, f0, fp);
  const double curv = d2.apply(fm, f0, fp);
  w.x = x0;
  if (!w.uniform && curv != 0.0) {
    const double shift = -slope / curv;
    if (std::abs(shift) <= 0.5 * std::min(x0 - xm, xp - x0))
      w.x = x0 + shift;
  }
  if (g.periodic())
    w.x = g.left_end + std::fmod(w.x - g.left_end + g.period(), g.period());
  return w;
}

} // namespace neckpinch
