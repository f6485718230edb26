#pragma once

// Time integration of U_t = U_xx/(1+U_x^2) - (n-1)/U.
//
// The unknown is v = U^2, which obeys
//   v_t = 4v v_xx/(4v+v_x^2) - 2 v_x^2/(4v+v_x^2) - 2(n-1).
// The cylinder ODE becomes linear, a round sphere is a discrete fixed point
// of the spatial operator and the equation stays regular where the surface
// meets the axis (v_t = -2n there). Cap tips move with speed 2n/v_x(tip);
// the nodes between an end and a tip follow affinely and the extra
// transport term w v_x is carried implicitly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "neckpinch/flow_history.hpp"
#include "neckpinch/geometry.hpp"
#include "neckpinch/profile_grid.hpp"

namespace neckpinch {

enum class Scheme { semi_implicit, fully_implicit };

inline std::string_view to_string(Scheme s) {
  return s == Scheme::semi_implicit ? "semi_implicit" : "fully_implicit";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "semi_implicit")
    return Scheme::semi_implicit;
  if (s == "fully_implicit")
    return Scheme::fully_implicit;
  throw PreconditionError("unknown scheme '" + std::string(s) + "'");
}

struct SolverConfig {
  double dt_safety = 0.2;
  double u_stop = 1e-3;         // stop when the waist falls below u_stop * initial waist
  double remesh_ratio = 0.1;
  std::size_t max_steps = 5'000'000;
  double tol_newton = 1e-10;
  Scheme scheme = Scheme::semi_implicit;
  bool adaptive = true;         // remesh during evolve
  double max_spacing = 0.0;     // coarsest allowed cell; 0: initial max spacing
  std::size_t max_nodes = 40000;
  int max_halvings = 30;        // rejected-step cascade depth before giving up
  int remesh_interval = 8;      // steps between remesh checks
  double snapshot_dt = 1.0 / 200.0;  // in units of (initial waist)^2
  double snapshot_dlog = 0.05;       // drop of log(waist^2) between snapshots
  double t_end = std::numeric_limits<double>::infinity();
};

inline void validate(const SolverConfig& c) {
  auto pos = [](double v, const char* name) {
    if (!(v > 0.0))
      throw PreconditionError(std::string(name) + " must be positive");
  };
  pos(c.dt_safety, "dt_safety");
  pos(c.u_stop, "u_stop");
  pos(c.remesh_ratio, "remesh_ratio");
  pos(c.tol_newton, "tol_newton");
  pos(c.snapshot_dt, "snapshot_dt");
  pos(c.snapshot_dlog, "snapshot_dlog");
  if (!(c.u_stop < 1.0))
    throw PreconditionError("u_stop must be < 1");
  if (c.max_steps == 0)
    throw PreconditionError("max_steps must be positive");
  if (c.max_spacing < 0.0)
    throw PreconditionError("max_spacing must be >= 0");
  if (c.max_halvings < 0 || c.remesh_interval < 1)
    throw PreconditionError("max_halvings >= 0 and remesh_interval >= 1 required");
}

namespace detail {

/// Tridiagonal system with optional periodic corners:
/// lo[i] v[i-1] + di[i] v[i] + up[i] v[i+1] = rhs[i]; lo[0] couples to
/// v[m-1] and up[m-1] to v[0] when cyclic.
struct TriSystem {
  std::vector<double> lo, di, up, rhs;
  bool cyclic = false;
};

inline std::vector<double> thomas(std::vector<double> lo, std::vector<double> di, std::vector<double> up,
                                  std::vector<double> rhs) {
  const std::size_t m = di.size();
  for (std::size_t i = 1; i < m; ++i) {
    const double f = lo[i] / di[i - 1];
    di[i] -= f * up[i - 1];
    rhs[i] -= f * rhs[i - 1];
  }
  std::vector<double> x(m);
  x[m - 1] = rhs[m - 1] / di[m - 1];
  for (std::size_t i = m - 1; i-- > 0;)
    x[i] = (rhs[i] - up[i] * x[i + 1]) / di[i];
  return x;
}

inline std::vector<double> solve(const TriSystem& s) {
  const std::size_t m = s.di.size();
  if (!s.cyclic)
    return thomas(s.lo, s.di, s.up, s.rhs);
  // Sherman-Morrison on the corner entries.
  const double alpha = s.up[m - 1];
  const double beta = s.lo[0];
  const double gamma = -s.di[0];
  auto di = s.di;
  di[0] -= gamma;
  di[m - 1] -= alpha * beta / gamma;
  auto lo = s.lo;
  auto up = s.up;
  lo[0] = 0.0;
  up[m - 1] = 0.0;
  const auto y = thomas(lo, di, up, s.rhs);
  std::vector<double> u(m, 0.0);
  u[0] = gamma;
  u[m - 1] = alpha;
  const auto z = thomas(lo, di, up, u);
  const double fact = (y[0] + beta * y[m - 1] / gamma) / (1.0 + z[0] + beta * z[m - 1] / gamma);
  std::vector<double> x(m);
  for (std::size_t i = 0; i < m; ++i)
    x[i] = y[i] - fact * z[i];
  return x;
}

/// Folds row couplings to the extended neighbours (index -1 and m) into the
/// system: mirror ghosts add to the interior neighbour, periodic ghosts go to
/// the corners, tip values are zero and drop out.
inline void fold_ends(const ProfileGrid& geom, TriSystem& s) {
  const std::size_t m = s.di.size();
  switch (geom.left) {
  case EndCondition::neumann:
    s.up[0] += s.lo[0];
    s.lo[0] = 0.0;
    break;
  case EndCondition::cap:
    s.lo[0] = 0.0;
    break;
  case EndCondition::periodic:
    s.cyclic = true;
    break;
  }
  switch (geom.right) {
  case EndCondition::neumann:
    s.lo[m - 1] += s.up[m - 1];
    s.up[m - 1] = 0.0;
    break;
  case EndCondition::cap:
    s.up[m - 1] = 0.0;
    break;
  case EndCondition::periodic:
    s.cyclic = true;
    break;
  }
}

struct Coefficients {
  std::vector<double> a, b;
};

/// Diffusion coefficient 4v/(4v+v_x^2) and source -2v_x^2/(4v+v_x^2) - 2(n-1).
inline Coefficients coefficients(const ProfileGrid& geom, const std::vector<double>& v) {
  const std::size_t m = v.size();
  const auto e = extend(geom, v, 0.0);
  Coefficients c;
  c.a.resize(m);
  c.b.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto d1 = first_derivative_stencil(e.x[i + 1] - e.x[i], e.x[i + 2] - e.x[i + 1]);
    const double p = d1.m * e.f[i] + d1.c * e.f[i + 1] + d1.p * e.f[i + 2];
    const double w = 4.0 * v[i] + p * p;
    c.a[i] = 4.0 * v[i] / w;
    c.b[i] = -2.0 * p * p / w - 2.0 * (geom.n - 1);
  }
  return c;
}

struct EndVelocity {
  double left = 0.0, right = 0.0;
};

/// Tip speeds 2n / v_x(tip), v_x from the parabola through the tip and the
/// two nearest nodes. nullopt if the profile does not meet the axis
/// transversally.
inline std::optional<EndVelocity> end_velocity(const ProfileGrid& geom, const std::vector<double>& v) {
  const std::size_t m = v.size();
  const double two_n = 2.0 * geom.n;
  EndVelocity ev;
  if (geom.left == EndCondition::cap) {
    const double s = one_sided_derivative(geom.left_end, 0.0, geom.x[0], v[0], geom.x[1], v[1]);
    if (!(s > 0.0) || !std::isfinite(s))
      return std::nullopt;
    ev.left = two_n / s;
  }
  if (geom.right == EndCondition::cap) {
    const double s = one_sided_derivative(geom.right_end, 0.0, geom.x[m - 1], v[m - 1], geom.x[m - 2], v[m - 2]);
    if (!(s < 0.0) || !std::isfinite(s))
      return std::nullopt;
    ev.right = two_n / s;
  }
  return ev;
}

/// Node velocities interpolating the end velocities affinely.
inline std::vector<double> node_velocity(const ProfileGrid& geom, EndVelocity ev) {
  std::vector<double> w(geom.size(), 0.0);
  if (ev.left == 0.0 && ev.right == 0.0)
    return w;
  const double span = geom.right_end - geom.left_end;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double xi = (geom.x[i] - geom.left_end) / span;
    w[i] = (1.0 - xi) * ev.left + xi * ev.right;
  }
  return w;
}

inline std::optional<ProfileGrid> moved(const ProfileGrid& g, const std::vector<double>& w, EndVelocity ev,
                                        double dt) {
  ProfileGrid out = g;
  for (std::size_t i = 0; i < g.size(); ++i)
    out.x[i] = g.x[i] + dt * w[i];
  if (g.left == EndCondition::cap)
    out.left_end = g.left_end + dt * ev.left;
  if (g.right == EndCondition::cap)
    out.right_end = g.right_end + dt * ev.right;
  if (!(out.right_end > out.left_end))
    return std::nullopt;
  for (std::size_t i = 1; i < out.size(); ++i)
    if (!(out.x[i] > out.x[i - 1]))
      return std::nullopt;
  if (g.left == EndCondition::cap && !(out.left_end < out.x.front()))
    return std::nullopt;
  if (g.right == EndCondition::cap && !(out.right_end > out.x.back()))
    return std::nullopt;
  return out;
}

inline bool admissible(const std::vector<double>& v) {
  for (double s : v)
    if (!(s > 0.0) || !std::isfinite(s))
      return false;
  return true;
}

/// Backward Euler with frozen a, b on the geometry `geom` (the new node
/// positions): v - dt (a D2 v + w D1 v) = v_old + dt b.
inline std::vector<double> linear_solve(const ProfileGrid& geom, const std::vector<double>& v_old,
                                        const Coefficients& c, const std::vector<double>& w, double dt) {
  const std::size_t m = v_old.size();
  const auto e = extend(geom, v_old, 0.0);
  TriSystem s;
  s.lo.resize(m);
  s.di.resize(m);
  s.up.resize(m);
  s.rhs.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double hm = e.x[i + 1] - e.x[i];
    const double hp = e.x[i + 2] - e.x[i + 1];
    const auto d1 = first_derivative_stencil(hm, hp);
    const auto d2 = second_derivative_stencil(hm, hp);
    s.lo[i] = -dt * (c.a[i] * d2.m + w[i] * d1.m);
    s.di[i] = 1.0 - dt * (c.a[i] * d2.c + w[i] * d1.c);
    s.up[i] = -dt * (c.a[i] * d2.p + w[i] * d1.p);
    s.rhs[i] = v_old[i] + dt * c.b[i];
  }
  fold_ends(geom, s);
  return solve(s);
}

/// Fully implicit backward Euler on `geom` by damped Newton with the exact
/// tridiagonal Jacobian.
inline std::optional<std::vector<double>> newton_solve(const ProfileGrid& geom, const std::vector<double>& v_old,
                                                       std::vector<double> v, const std::vector<double>& w,
                                                       double dt, double tol) {
  const std::size_t m = v_old.size();
  const double nm1 = geom.n - 1;
  const double scale = std::max(1e-300, *std::max_element(v_old.begin(), v_old.end()));

  auto residual = [&](const std::vector<double>& u, TriSystem* jac) {
    const auto e = extend(geom, u, 0.0);
    std::vector<double> F(m);
    if (jac) {
      jac->lo.assign(m, 0.0);
      jac->di.assign(m, 0.0);
      jac->up.assign(m, 0.0);
      jac->rhs.assign(m, 0.0);
      jac->cyclic = false;
    }
    for (std::size_t i = 0; i < m; ++i) {
      const double hm = e.x[i + 1] - e.x[i];
      const double hp = e.x[i + 2] - e.x[i + 1];
      const auto d1 = first_derivative_stencil(hm, hp);
      const auto d2 = second_derivative_stencil(hm, hp);
      const double vi = u[i];
      const double p = d1.m * e.f[i] + d1.c * e.f[i + 1] + d1.p * e.f[i + 2];
      const double q = d2.m * e.f[i] + d2.c * e.f[i + 1] + d2.p * e.f[i + 2];
      const double den = 4.0 * vi + p * p;
      const double a = 4.0 * vi / den;
      const double b = -2.0 * p * p / den - 2.0 * nm1;
      F[i] = vi - v_old[i] - dt * (a * q + b + w[i] * p);
      if (jac) {
        const double den2 = den * den;
        const double a_v = 4.0 * p * p / den2;
        const double a_p = -8.0 * vi * p / den2;
        const double b_v = 8.0 * p * p / den2;
        const double b_p = -16.0 * vi * p / den2;
        const double g_p = a_p * q + b_p + w[i];  // d/dp of the bracket
        jac->lo[i] = -dt * (g_p * d1.m + a * d2.m);
        jac->di[i] = 1.0 - dt * (g_p * d1.c + a * d2.c + a_v * q + b_v);
        jac->up[i] = -dt * (g_p * d1.p + a * d2.p);
        jac->rhs[i] = -F[i];
      }
    }
    if (jac)
      fold_ends(geom, *jac);
    return F;
  };
  auto norm = [](const std::vector<double>& F) {
    double s = 0.0;
    for (double f : F)
      s = std::max(s, std::abs(f));
    return s;
  };

  TriSystem jac;
  auto F = residual(v, &jac);
  double r = norm(F);
  for (int it = 0; it < 50; ++it) {
    if (r <= tol * scale)
      return v;
    const auto dv = solve(jac);
    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
      std::vector<double> trial(m);
      for (std::size_t i = 0; i < m; ++i)
        trial[i] = v[i] + lambda * dv[i];
      if (!admissible(trial))
        continue;
      const auto Ft = residual(trial, nullptr);
      const double rt = norm(Ft);
      if (rt < (1.0 - 1e-4 * lambda) * r || rt <= tol * scale) {
        v = std::move(trial);
        accepted = true;
        break;
      }
    }
    if (!accepted)
      return std::nullopt;
    F = residual(v, &jac);
    r = norm(F);
  }
  if (r <= tol * scale)
    return v;
  return std::nullopt;
}

inline std::vector<double> squares(const std::vector<double>& u) {
  std::vector<double> v(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    v[i] = u[i] * u[i];
  return v;
}

/// One attempt of a step of size dt; nullopt if positivity or the mesh
/// geometry fails (the caller halves dt).
inline std::optional<ProfileGrid> attempt_step(const ProfileGrid& g, double dt, const SolverConfig& cfg) {
  const auto v_old = squares(g.radius);
  const auto ev0 = end_velocity(g, v_old);
  if (!ev0)
    return std::nullopt;
  const auto w0 = node_velocity(g, *ev0);
  const auto geom1 = moved(g, w0, *ev0, dt);
  if (!geom1)
    return std::nullopt;

  std::vector<double> v1;
  if (cfg.scheme == Scheme::semi_implicit) {
    v1 = linear_solve(*geom1, v_old, coefficients(g, v_old), w0, dt);
  } else {
    auto r = newton_solve(*geom1, v_old, v_old, w0, dt, cfg.tol_newton);
    if (!r)
      return std::nullopt;
    v1 = std::move(*r);
  }
  if (!admissible(v1))
    return std::nullopt;

  // Correction: tip speeds averaged over the step, coefficients (semi-implicit)
  // refreshed from the predicted state.
  EndVelocity ev = *ev0;
  if (g.has_cap()) {
    const auto ev1 = end_velocity(*geom1, v1);
    if (!ev1)
      return std::nullopt;
    ev.left = 0.5 * (ev0->left + ev1->left);
    ev.right = 0.5 * (ev0->right + ev1->right);
  }
  const auto w = node_velocity(g, ev);
  const auto geom2 = moved(g, w, ev, dt);
  if (!geom2)
    return std::nullopt;
  std::vector<double> v2;
  if (cfg.scheme == Scheme::semi_implicit) {
    v2 = linear_solve(*geom2, v_old, coefficients(*geom1, v1), w, dt);
  } else if (g.has_cap()) {
    auto r = newton_solve(*geom2, v_old, v1, w, dt, cfg.tol_newton);
    if (!r)
      return std::nullopt;
    v2 = std::move(*r);
  } else {
    v2 = std::move(v1);
  }
  if (!admissible(v2))
    return std::nullopt;

  ProfileGrid out = *geom2;
  out.time = g.time + dt;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.radius[i] = std::sqrt(v2[i]);
  return out;
}

inline ProfileGrid advance(const ProfileGrid& g, double dt, const SolverConfig& cfg, int depth,
                           std::size_t& rejected) {
  if (auto r = attempt_step(g, dt, cfg))
    return std::move(*r);
  if (depth >= cfg.max_halvings)
    throw StepRejected("step rejected " + std::to_string(depth) + " times; dt fell to " + std::to_string(dt) +
                       " at t = " + std::to_string(g.time));
  ++rejected;
  const auto half = advance(g, 0.5 * dt, cfg, depth + 1, rejected);
  return advance(half, 0.5 * dt, cfg, depth + 1, rejected);
}

} // namespace detail

/// Advances the grid by dt. A failed attempt is split into two half steps,
/// recursively; StepRejected when the cascade exceeds cfg.max_halvings.
inline ProfileGrid step(const ProfileGrid& g, double dt, const SolverConfig& cfg, std::size_t* rejected = nullptr) {
  validate(g);
  if (!(dt >= 0.0) || !std::isfinite(dt))
    throw PreconditionError("dt must be finite and >= 0");
  if (dt == 0.0)
    return g;
  std::size_t rej = 0;
  auto out = detail::advance(g, dt, cfg, 0, rej);
  if (rejected)
    *rejected += rej;
  return out;
}

/// Length scale resolved by the mesh: 1/kappa2 = U sqrt(1+U_x^2), the normal
/// distance to the axis. Equals U at a neck and the tip radius at a cap; it
/// ignores the kink a non-even profile has at a mirror plane.
inline std::vector<double> curvature_length(const CurvatureField& c) {
  std::vector<double> l(c.size());
  for (std::size_t i = 0; i < l.size(); ++i)
    l[i] = 1.0 / c.kappa2[i];
  return l;
}

inline double smallest_cell(const ProfileGrid& g) {
  double h = infinity;
  for (std::size_t i = 1; i < g.size(); ++i)
    h = std::min(h, g.x[i] - g.x[i - 1]);
  if (g.left == EndCondition::cap)
    h = std::min(h, g.x.front() - g.left_end);
  if (g.right == EndCondition::cap)
    h = std::min(h, g.right_end - g.x.back());
  if (g.periodic())
    h = std::min(h, g.right_end - g.x.back());
  return h;
}

/// dt_safety * min(dx_min^2, l_min^2/(n-1)); l reduces to U at a neck.
inline double stable_dt(const ProfileGrid& g, const CurvatureField& c, const SolverConfig& cfg) {
  const auto l = curvature_length(c);
  const double lmin = *std::min_element(l.begin(), l.end());
  const double h = smallest_cell(g);
  return cfg.dt_safety * std::min(h * h, lmin * lmin / (g.n - 1));
}

// ---------------------------------------------------------------------------

namespace detail {

/// One remesh pass; nullopt when nothing changes.
inline std::optional<ProfileGrid> remesh_pass(const ProfileGrid& g, const SolverConfig& cfg, double h_base) {
  const auto curv = compute_curvatures(g);
  const auto ell = curvature_length(curv);
  const double ratio = cfg.remesh_ratio;
  const std::size_t m = g.size();

  // Point list with the fixed ends (tips, periodic wrap) appended.
  struct Pt {
    double x, u, l, slope;
    bool fixed, tip;
  };
  std::vector<Pt> pts;
  pts.reserve(m + 2);
  if (g.left == EndCondition::cap)
    pts.push_back({g.left_end, 0.0, ell.front(), infinity, true, true});
  for (std::size_t i = 0; i < m; ++i) {
    const bool end_node = (i == 0 && g.left != EndCondition::cap) || (i + 1 == m && g.right == EndCondition::neumann);
    pts.push_back({g.x[i], g.radius[i], ell[i], curv.slope[i], end_node, false});
  }
  if (g.right == EndCondition::cap)
    pts.push_back({g.right_end, 0.0, ell.back(), infinity, true, true});
  if (g.periodic())
    pts.push_back({g.right_end, g.radius.front(), ell.front(), curv.slope.front(), true, false});

  // slack keeps cells sitting exactly at a threshold (uniform initial grids)
  // from being split on one side of a mirror plane only
  auto resolved = [&](const Pt& a, const Pt& b, double factor) {
    factor *= 1.0 + 1e-9;
    const double h = b.x - a.x;
    if (h > factor * std::min(h_base, ratio * std::min(a.l, b.l)))
      return false;
    if (!a.tip && !b.tip && std::abs(a.slope) <= 1.0 && std::abs(b.slope) <= 1.0 &&
        std::abs(b.u - a.u) > factor * ratio * std::min(a.u, b.u))
      return false;
    return true;
  };

  // Coarsen: drop a node if the merged cell would be resolved at half the
  // thresholds. Within a run of candidates every other node goes, counted
  // from the nearer end of the run so mirror-symmetric grids stay symmetric.
  std::vector<char> cand(pts.size(), 0);
  for (std::size_t i = 1; i + 1 < pts.size(); ++i)
    cand[i] = !pts[i].fixed && resolved(pts[i - 1], pts[i + 1], 0.5);
  std::vector<Pt> kept;
  kept.reserve(pts.size());
  bool changed = false;
  for (std::size_t i = 0; i < pts.size();) {
    if (!cand[i]) {
      kept.push_back(pts[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < pts.size() && cand[j])
      ++j;
    const std::size_t len = j - i;
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t d = std::min(k, len - 1 - k);
      const bool middle_pair = len % 2 == 0 && d == len / 2 - 1;
      if (d % 2 == 1 && !middle_pair)
        changed = true;
      else
        kept.push_back(pts[i + k]);
    }
    i = j;
  }

  // Refine unresolved cells by equal splitting.
  std::vector<double> xs;
  xs.reserve(kept.size() * 2);
  for (std::size_t i = 0; i + 1 < kept.size(); ++i) {
    const auto& a = kept[i];
    const auto& b = kept[i + 1];
    xs.push_back(a.x);
    if (resolved(a, b, 1.0))
      continue;
    const double h = b.x - a.x;
    double k = std::ceil(h / std::min(h_base, ratio * std::min(a.l, b.l)));
    if (!a.tip && !b.tip && std::abs(a.slope) <= 1.0 && std::abs(b.slope) <= 1.0)
      k = std::max(k, std::ceil(std::abs(b.u - a.u) / (ratio * std::min(a.u, b.u))));
    k = std::max(k, 2.0);
    if (k * 1.0 > static_cast<double>(cfg.max_nodes))
      throw NumericalError("remesh node budget exceeded");
    // measured from the nearer end so mirrored cells get mirrored nodes bitwise
    for (int j = 1; j < static_cast<int>(k); ++j)
      xs.push_back(2 * j <= k ? a.x + h * j / k : b.x - h * (k - j) / k);
    changed = true;
  }
  xs.push_back(kept.back().x);

  // Grade: neighbouring cells differ by at most a factor 2.
  for (int pass = 0; pass < 64; ++pass) {
    std::vector<double> next;
    next.reserve(xs.size() + 16);
    bool split = false;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      const double h = xs[i + 1] - xs[i];
      const double hl = i > 0 ? xs[i] - xs[i - 1] : infinity;
      const double hr = i + 2 < xs.size() ? xs[i + 2] - xs[i + 1] : infinity;
      next.push_back(xs[i]);
      if (h > 2.0 * hl || h > 2.0 * hr) {
        next.push_back(0.5 * (xs[i] + xs[i + 1]));
        split = true;
      }
    }
    next.push_back(xs.back());
    xs = std::move(next);
    if (!split)
      break;
    changed = true;
  }
  if (!changed)
    return std::nullopt;

  // Drop the appended fixed ends again.
  std::size_t first = g.left == EndCondition::cap ? 1 : 0;
  std::size_t last = xs.size() - ((g.right == EndCondition::cap || g.periodic()) ? 1 : 0);
  if (last - first > cfg.max_nodes)
    throw NumericalError("remesh node budget exceeded (" + std::to_string(last - first) + " > " +
                         std::to_string(cfg.max_nodes) + ")");
  const ProfileSampler sampler(g);
  ProfileGrid out = g;
  out.x.assign(xs.begin() + static_cast<std::ptrdiff_t>(first), xs.begin() + static_cast<std::ptrdiff_t>(last));
  out.radius.resize(out.x.size());
  for (std::size_t i = 0; i < out.x.size(); ++i) {
    // Old nodes keep their values exactly.
    auto it = std::lower_bound(g.x.begin(), g.x.end(), out.x[i]);
    if (it != g.x.end() && *it == out.x[i])
      out.radius[i] = g.radius[static_cast<std::size_t>(it - g.x.begin())];
    else
      out.radius[i] = sampler.radius(out.x[i]);
    if (!(out.radius[i] > 0.0))
      throw NumericalError("interpolated radius not positive during remesh");
  }
  if (out.size() < 5)
    return std::nullopt;
  return out;
}

} // namespace detail

/// Adapts the nodes to the local length l = 1/k2 (which is U at a neck): a cell is resolved when h <= min(max_spacing,
/// remesh_ratio * l) and, where the graph is shallow, |dU| <= remesh_ratio * U.
/// Nodes are removed where the merged cell is resolved at half the
/// thresholds. New values come from the limited cubic interpolant of U^2.
inline ProfileGrid remesh(const ProfileGrid& g, const SolverConfig& cfg) {
  validate(g);
  const auto [mn, mx] = std::minmax_element(g.radius.begin(), g.radius.end());
  if (!g.has_cap() && *mx - *mn <= 1e-9 * *mx)
    return g;
  const double h_base = cfg.max_spacing > 0.0 ? cfg.max_spacing : infinity;
  ProfileGrid cur = g;
  for (int pass = 0; pass < 8; ++pass) {
    auto next = detail::remesh_pass(cur, cfg, h_base);
    if (!next)
      break;
    cur = std::move(*next);
  }
  return cur;
}

// ---------------------------------------------------------------------------

/// Linear least squares of U_min^2 against t over the last decade of U_min.
inline PinchEstimate estimate_pinch(const FlowHistory& h) {
  if (h.stats.size() < 2)
    throw InsufficientData("pinch estimate needs recorded statistics");
  const double u0 = h.reference_radius > 0.0 ? h.reference_radius : h.stats.front().u_min;
  std::size_t low = 0;
  for (const auto& s : h.stats)
    if (s.u_min < 0.2 * u0)
      ++low;
  if (low < 10)
    throw InsufficientData("need >= 10 snapshots with U_min below 20% of the initial value, have " +
                           std::to_string(low));
  const double u_final = h.stats.back().u_min;
  std::vector<double> ts, ys;
  for (const auto& s : h.stats) {
    if (s.u_min <= 10.0 * u_final) {
      ts.push_back(s.t);
      ys.push_back(s.u_min * s.u_min);
    }
  }
  for (std::size_t i = 1; i < ys.size(); ++i)
    if (ys[i] > ys[i - 1] * (1.0 + 1e-9))
      throw InsufficientData("U_min not monotone over the fit window: no pinch forming");
  const std::size_t k = ts.size();
  if (k < 3)
    throw InsufficientData("fewer than 3 samples in the last decade of U_min");

  double tm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    tm += ts[i];
    ym += ys[i];
  }
  tm /= k;
  ym /= k;
  double stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    stt += (ts[i] - tm) * (ts[i] - tm);
    sty += (ts[i] - tm) * (ys[i] - ym);
  }
  if (!(stt > 0.0))
    throw InsufficientData("degenerate time samples");
  const double slope = sty / stt;
  if (!(slope < 0.0))
    throw InsufficientData("U_min^2 not decreasing: no pinch forming");
  double sse = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double r = ys[i] - (ym + slope * (ts[i] - tm));
    sse += r * r;
  }
  const double sigma2 = k > 2 ? sse / static_cast<double>(k - 2) : 0.0;
  PinchEstimate p;
  p.slope = slope;
  // Root of ym + slope (t - tm): T = tm - ym/slope.
  p.T = tm - ym / slope;
  p.slope_stderr = std::sqrt(sigma2 / stt);
  const double var_ym = sigma2 / k;
  const double dT_dym = -1.0 / slope;
  const double dT_dslope = ym / (slope * slope);
  p.T_stderr = std::sqrt(dT_dym * dT_dym * var_ym + dT_dslope * dT_dslope * p.slope_stderr * p.slope_stderr);
  const double range = *std::max_element(ys.begin(), ys.end()) - *std::min_element(ys.begin(), ys.end());
  p.residual = range > 0.0 ? std::sqrt(sse / k) / range : 0.0;
  p.samples = k;
  p.residual_flag = p.residual > 0.02;
  const double expected = -2.0 * (h.n() - 1);
  p.slope_flag = std::abs(slope / expected - 1.0) > 0.1;
  p.x0 = h.stats.back().x_argmin;
  return p;
}

// ---------------------------------------------------------------------------

namespace detail {

inline SnapshotStats slice_stats(const ProfileGrid& g, const CurvatureField& c, const Waist& w, double dt) {
  SnapshotStats s;
  s.t = g.time;
  s.u_min = w.radius;
  s.x_argmin = w.x;
  s.max_a2 = *std::max_element(c.A2.begin(), c.A2.end());
  s.dt = dt;
  s.nodes = g.size();
  return s;
}

} // namespace detail

/// Integrates until the waist falls below u_stop times its initial value.
inline FlowHistory evolve(const ProfileGrid& initial, SolverConfig cfg) {
  validate(initial);
  validate(cfg);
  if (cfg.max_spacing == 0.0) {
    double h = 0.0;
    for (std::size_t i = 1; i < initial.size(); ++i)
      h = std::max(h, initial.x[i] - initial.x[i - 1]);
    cfg.max_spacing = h;
  }
  FlowHistory hist;
  ProfileGrid g = cfg.adaptive ? remesh(initial, cfg) : initial;
  auto w = find_waist(g);
  hist.reference_radius = w.radius;
  const double threshold = cfg.u_stop * w.radius;
  const double snap_dt = cfg.snapshot_dt * w.radius * w.radius;
  bool had_neck = w.is_neck;
  if (w.is_neck) {
    hist.last_neck_x = w.x;
    hist.last_neck_radius = w.radius;
  }

  auto curv = compute_curvatures(g);
  hist.snapshots.push_back(g);
  hist.stats.push_back(detail::slice_stats(g, curv, w, 0.0));
  double last_snap_t = g.time;
  double last_snap_log = std::log(w.radius * w.radius);
  bool stopped = false;

  auto record = [&](double dt) {
    hist.snapshots.push_back(g);
    hist.stats.push_back(detail::slice_stats(g, curv, w, dt));
    last_snap_t = g.time;
    last_snap_log = std::log(w.radius * w.radius);
  };

  double dt = 0.0;
  while (!stopped) {
    if (hist.steps >= cfg.max_steps) {
      hist.stop_reason = StopReason::max_steps;
      break;
    }
    dt = stable_dt(g, curv, cfg);
    bool at_end = false;
    if (g.time + dt >= cfg.t_end) {
      dt = cfg.t_end - g.time;
      at_end = true;
    }
    try {
      g = step(g, dt, cfg, &hist.rejected_steps);
    } catch (const StepRejected&) {
      hist.stop_reason = StopReason::blowup_detected;
      break;
    }
    ++hist.steps;
    if (cfg.adaptive && hist.steps % static_cast<std::size_t>(cfg.remesh_interval) == 0) {
      auto r = remesh(g, cfg);
      if (r.x != g.x) {
        ++hist.remeshes;
        g = std::move(r);
      }
    }
    try {
      curv = compute_curvatures(g);
    } catch (const NumericalError&) {
      hist.stop_reason = StopReason::blowup_detected;
      record(dt);
      break;
    }
    w = find_waist(g);
    had_neck = had_neck || w.is_neck;
    if (w.is_neck) {
      hist.last_neck_x = w.x;
      hist.last_neck_radius = w.radius;
    }

    if (w.uniform && w.radius <= threshold) {
      hist.uniform = true;
      hist.stop_reason = StopReason::neck_threshold;
      stopped = true;
    } else if (g.has_cap() && had_neck && !w.is_neck) {
      hist.lobe_absorbed = true;
      hist.stop_reason = StopReason::extinction;
      stopped = true;
    } else if (w.radius <= threshold) {
      stopped = true;
      hist.stop_reason = StopReason::extinction;
      if (w.is_neck) {
        const auto mid = g.radius.begin() + static_cast<std::ptrdiff_t>(w.index);
        const double left = *std::max_element(g.radius.begin(), mid + 1);
        const double right = *std::max_element(mid, g.radius.end());
        if (left >= 10.0 * threshold && right >= 10.0 * threshold)
          hist.stop_reason = StopReason::neck_threshold;
      }
    }
    if (stopped || at_end || g.time - last_snap_t >= snap_dt ||
        last_snap_log - std::log(w.radius * w.radius) >= cfg.snapshot_dlog)
      record(dt);
    if (at_end) {
      hist.stop_reason = StopReason::max_steps;
      hist.uniform = w.uniform;
      break;
    }
  }
  if (hist.snapshots.back().time != g.time)
    record(dt);
  try {
    hist.pinch_estimate = estimate_pinch(hist);
  } catch (const InsufficientData&) {
    hist.pinch_estimate.reset();
  }
  return hist;
}

// ---------------------------------------------------------------------------

struct Barrier {
  enum class Kind { sphere, cylinder } kind = Kind::sphere;
  double radius = 1.0;
  double center = 0.0;      // axis position of a sphere centre
  double start_time = 0.0;
  bool encloses = false;    // true: barrier contains the surface; false: barrier inside
};

struct AvoidanceReport {
  bool ok = true;                 // never crossed
  bool precondition_violated = false;
  double min_separation = infinity;
  double time_of_min = 0.0;
  double initial_separation = 0.0;
  std::size_t slices = 0;
};

/// Radius of the exact shrinking barrier at time s (<= 0 after extinction).
inline double barrier_radius_squared(const Barrier& b, int n, double s) {
  const double rate = b.kind == Barrier::Kind::sphere ? 2.0 * n : 2.0 * (n - 1);
  return b.radius * b.radius - rate * (s - b.start_time);
}

/// Signed separation (positive: disjoint in the required arrangement) between
/// the exact barrier and every recorded slice until the barrier vanishes.
inline AvoidanceReport avoidance_check(const FlowHistory& h, const Barrier& b, double tol = 1e-9) {
  AvoidanceReport rep;
  bool first = true;
  for (const auto& g : h.snapshots) {
    if (g.time < b.start_time)
      continue;
    const double r2 = barrier_radius_squared(b, g.n, g.time);
    if (r2 <= 0.0)
      break;
    const double R = std::sqrt(r2);
    const auto cloud = detail::meridian_cloud(g, 4);
    double sep;
    if (b.kind == Barrier::Kind::sphere) {
      double dmin = infinity, dmax = 0.0;
      for (const auto& p : cloud) {
        const double d = std::hypot(p.x - b.center, p.r);
        dmin = std::min(dmin, d);
        dmax = std::max(dmax, d);
      }
      sep = b.encloses ? R - dmax : dmin - R;
    } else {
      double umin = infinity, umax = 0.0;
      for (const auto& p : cloud) {
        if (p.r < 0.0)
          continue;
        umin = std::min(umin, p.r);
        umax = std::max(umax, p.r);
      }
      sep = b.encloses ? R - umax : umin - R;
    }
    ++rep.slices;
    if (first) {
      rep.initial_separation = sep;
      if (sep <= tol * b.radius) {
        rep.precondition_violated = true;
        rep.ok = false;
      }
      first = false;
    }
    if (sep < rep.min_separation) {
      rep.min_separation = sep;
      rep.time_of_min = g.time;
    }
    if (sep <= 0.0)
      rep.ok = false;
  }
  return rep;
}

} // namespace neckpinch
