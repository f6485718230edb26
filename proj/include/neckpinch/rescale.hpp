#pragma once

// Parabolic blow-up about a singular point (x0, T):
//   y = (x - x0)/sqrt(T - t),  u = U/sqrt(T - t),  tau = -log(T - t),
// and the least-squares comparison with
//   u = sqrt(2(n-1)) + c (y^2 - 2),  c ~ sqrt(2(n-1))/(4 tau).

#include <cmath>
#include <cstddef>
#include <vector>

#include "neckpinch/flow_history.hpp"
#include "neckpinch/profile_grid.hpp"

namespace neckpinch {

struct RescaledProfile {
  double tau = 0.0;
  double L = 0.0;
  int n = 2;
  std::vector<double> ys;
  std::vector<double> us;
};

struct ProfileFit {
  double c = 0.0;
  double resid = 0.0;
  double tau = 0.0;
  double c_scaled = 0.0;
};

/// Diagnostic two-parameter fit u = a + c (y^2 - 2).
struct FreeProfileFit {
  double a = 0.0;
  double c = 0.0;
  double resid = 0.0;
  double tau = 0.0;
};

inline double cylinder_value(int n) { return std::sqrt(2.0 * (n - 1)); }

namespace detail {

inline bool window_inside(const ProfileGrid& g, double lo, double hi) {
  if (g.periodic())
    return hi - lo <= g.period();
  return lo >= g.left_end && hi <= g.right_end;
}

} // namespace detail

/// Samples u on a uniform y-grid over [-L, L] (samples_per_unit per unit of
/// y, odd count so y = 0 is a sample). Each bracketing snapshot is rescaled
/// with its own time and the two are blended linearly in tau.
inline RescaledProfile rescale_at(const FlowHistory& h, double T, double x0, double t, double L,
                                  int samples_per_unit = 40) {
  if (h.snapshots.empty())
    throw InsufficientData("empty history");
  if (!(t < T))
    throw PreconditionError("rescaling needs t < T");
  if (!(L > 0.0) || samples_per_unit < 20)
    throw PreconditionError("need L > 0 and >= 20 samples per unit");
  if (t < h.first_time() || t > h.last_time())
    throw InsufficientData("t = " + std::to_string(t) + " outside the recorded history [" +
                           std::to_string(h.first_time()) + ", " + std::to_string(h.last_time()) + "]");
  const std::size_t i = h.index_at_or_before(t);
  const std::size_t j = std::min(i + 1, h.snapshots.size() - 1);
  const auto& A = h.snapshots[i];
  const auto& B = h.snapshots[j];
  if (!(B.time < T))
    throw PreconditionError("snapshot at or beyond T inside the rescaling bracket");

  RescaledProfile p;
  p.n = h.n();
  p.tau = -std::log(T - t);
  p.L = L;
  const std::size_t half = static_cast<std::size_t>(std::ceil(L * samples_per_unit));
  const std::size_t count = 2 * half + 1;
  p.ys.resize(count);
  p.us.resize(count);

  const double sa = std::sqrt(T - A.time);
  const double sb = std::sqrt(T - B.time);
  const double ta = -std::log(T - A.time);
  const double tb = -std::log(T - B.time);
  const double w = (j == i || tb == ta) ? 0.0 : (p.tau - ta) / (tb - ta);
  for (const auto* g : {&A, &B}) {
    const double s = g == &A ? sa : sb;
    if (!detail::window_inside(*g, x0 - L * s, x0 + L * s))
      throw PreconditionError("rescaling window x0 +- L sqrt(T-t) leaves the domain");
  }
  const ProfileSampler pa(A);
  const ProfileSampler pb(B);
  for (std::size_t k = 0; k < count; ++k) {
    const double y = L * (static_cast<double>(k) - static_cast<double>(half)) / static_cast<double>(half);
    const double ua = pa.radius(x0 + y * sa) / sa;
    const double ub = pb.radius(x0 + y * sb) / sb;
    p.ys[k] = y;
    p.us[k] = (1.0 - w) * ua + w * ub;
  }
  return p;
}

/// c = sum (u - sqrt(2(n-1)))(y^2-2) / sum (y^2-2)^2 with the constant pinned.
inline ProfileFit fit_inner_profile(const RescaledProfile& p) {
  const std::size_t k = p.ys.size();
  if (k < 5 || p.us.size() != k)
    throw PreconditionError("degenerate fit: fewer than 5 samples");
  const double u0 = cylinder_value(p.n);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double b = p.ys[i] * p.ys[i] - 2.0;
    num += (p.us[i] - u0) * b;
    den += b * b;
  }
  if (!(den > 1e-12 * static_cast<double>(k)))
    throw PreconditionError("degenerate fit: window too small");
  ProfileFit f;
  f.c = num / den;
  double ss = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double r = p.us[i] - u0 - f.c * (p.ys[i] * p.ys[i] - 2.0);
    ss += r * r;
  }
  f.resid = std::sqrt(ss / k);
  f.tau = p.tau;
  f.c_scaled = p.tau * f.c;
  return f;
}

inline FreeProfileFit fit_inner_profile_free(const RescaledProfile& p) {
  const std::size_t k = p.ys.size();
  if (k < 5 || p.us.size() != k)
    throw PreconditionError("degenerate fit: fewer than 5 samples");
  double sb = 0.0, sbb = 0.0, su = 0.0, sub = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double b = p.ys[i] * p.ys[i] - 2.0;
    sb += b;
    sbb += b * b;
    su += p.us[i];
    sub += p.us[i] * b;
  }
  const double det = k * sbb - sb * sb;
  if (!(det > 1e-12 * k * k))
    throw PreconditionError("degenerate fit: window too small");
  FreeProfileFit f;
  f.c = (k * sub - sb * su) / det;
  f.a = (su - f.c * sb) / k;
  double ss = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double r = p.us[i] - f.a - f.c * (p.ys[i] * p.ys[i] - 2.0);
    ss += r * r;
  }
  f.resid = std::sqrt(ss / k);
  f.tau = p.tau;
  return f;
}

/// tau (sqrt(2(n-1)) - u(0, tau)); tends to sqrt(2(n-1))/2 on the profile above.
inline double center_value(const RescaledProfile& p) {
  return p.tau * (cylinder_value(p.n) - p.us[p.us.size() / 2]);
}

struct ConvergenceSeries {
  std::vector<ProfileFit> fits;
  std::vector<double> center;
};

inline ConvergenceSeries convergence_series(const FlowHistory& h, double T, double x0, double L,
                                            const std::vector<double>& tau_grid, int samples_per_unit = 40) {
  ConvergenceSeries s;
  s.fits.reserve(tau_grid.size());
  s.center.reserve(tau_grid.size());
  for (double tau : tau_grid) {
    const auto p = rescale_at(h, T, x0, T - std::exp(-tau), L, samples_per_unit);
    s.fits.push_back(fit_inner_profile(p));
    s.center.push_back(center_value(p));
  }
  return s;
}

} // namespace neckpinch
