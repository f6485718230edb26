#pragma once

// Initial profiles and seeded perturbations.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "neckpinch/harness/config.hpp"
#include "neckpinch/profile_grid.hpp"

namespace neckpinch::harness {

inline std::vector<double> uniform_nodes(double a, double b, std::size_t count) {
  std::vector<double> x(count);
  const double last = static_cast<double>(count - 1);
  // from the nearer end: symmetric intervals give bitwise mirrored nodes
  for (std::size_t i = 0; i < count; ++i) {
    const double k = static_cast<double>(i);
    x[i] = 2 * k <= last ? a + (b - a) * k / last : b - (b - a) * (last - k) / last;
  }
  return x;
}

inline ProfileGrid cylinder_profile(int n, double radius, double half_length, std::size_t nodes) {
  auto x = uniform_nodes(-half_length, half_length, nodes);
  return ProfileGrid::neumann(n, std::move(x), std::vector<double>(nodes, radius));
}

/// Round sphere of radius R centred at the origin; nodes strictly inside the
/// two cap tips at -R and R.
inline ProfileGrid sphere_profile(int n, double R, std::size_t nodes) {
  ProfileGrid g;
  g.n = n;
  g.left = g.right = EndCondition::cap;
  g.left_end = -R;
  g.right_end = R;
  g.x.resize(nodes);
  g.radius.resize(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    const double x = -R + 2.0 * R * static_cast<double>(i + 1) / static_cast<double>(nodes + 1);
    g.x[i] = x;
    g.radius[i] = std::sqrt(R * R - x * x);
  }
  return g;
}

/// U = w + (1 - w) x^2 on [-1, 1], mirror planes at both ends.
inline ProfileGrid dumbbell_profile(int n, double w, std::size_t nodes) {
  auto x = uniform_nodes(-1.0, 1.0, nodes);
  std::vector<double> u(nodes);
  for (std::size_t i = 0; i < nodes; ++i)
    u[i] = w + (1.0 - w) * x[i] * x[i];
  return ProfileGrid::neumann(n, std::move(x), std::move(u));
}

struct AsymmetricLayout {
  double x_m;   // blend centre
  double x_c;   // cap centre
  double tip;   // right cap tip
  double blend; // blend half width
};

/// Geometry of the asymmetric dumbbell with cap radius rho: the left half of
/// the dumbbell (mirror plane at x = -1) joined at x_m, where
/// w + (1-w) x_m^2 = 0.8 rho, to a round cap of radius rho centred at
/// x_m + 0.6 rho.
inline AsymmetricLayout asymmetric_layout(double w, double rho) {
  if (!(0.8 * rho > w))
    throw PreconditionError("asymmetric dumbbell needs 0.8 * cap_radius > width");
  AsymmetricLayout a;
  a.x_m = std::sqrt((0.8 * rho - w) / (1.0 - w));
  a.x_c = a.x_m + 0.6 * rho;
  a.tip = a.x_c + rho;
  a.blend = 0.25 * rho;
  return a;
}

inline double asymmetric_radius_squared(double x, double w, double rho) {
  const auto a = asymmetric_layout(w, rho);
  const double ud = w + (1.0 - w) * x * x;
  const double vd = ud * ud;
  const double vc = rho * rho - (x - a.x_c) * (x - a.x_c);
  const double s = std::clamp((x - (a.x_m - a.blend)) / (2.0 * a.blend), 0.0, 1.0);
  const double S = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);  // C2 smoothstep
  return (1.0 - S) * vd + S * vc;
}

inline ProfileGrid asymmetric_dumbbell_profile(int n, double w, double rho, std::size_t nodes) {
  const auto a = asymmetric_layout(w, rho);
  ProfileGrid g;
  g.n = n;
  g.left = EndCondition::neumann;
  g.right = EndCondition::cap;
  g.left_end = -1.0;
  g.right_end = a.tip;
  g.x.resize(nodes);
  g.radius.resize(nodes);
  const double h = (a.tip + 1.0) / static_cast<double>(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    g.x[i] = -1.0 + h * static_cast<double>(i);
    g.radius[i] = std::sqrt(asymmetric_radius_squared(g.x[i], w, rho));
  }
  return g;
}

/// Two-column text file "x U" or "x,U"; '#' comments.
inline ProfileGrid profile_from_file(const std::string& path, int n, const std::string& boundary) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open profile file '" + path + "'");
  std::vector<double> x, u;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos)
      line.erase(hash);
    for (auto& ch : line)
      if (ch == ',')
        ch = ' ';
    std::istringstream ss(line);
    double a, b;
    if (!(ss >> a))
      continue;
    if (!(ss >> b))
      throw IoError(path + ":" + std::to_string(lineno) + ": expected two numbers");
    x.push_back(a);
    u.push_back(b);
  }
  ProfileGrid g;
  if (boundary == "periodic") {
    if (x.size() < 2)
      throw InvalidGrid("periodic profile needs at least two nodes");
    const double period = (x.back() - x.front()) * static_cast<double>(x.size()) / static_cast<double>(x.size() - 1);
    g = ProfileGrid::periodic_grid(n, std::move(x), std::move(u), period);
  } else {
    g = ProfileGrid::neumann(n, std::move(x), std::move(u));
  }
  validate(g);
  return g;
}

inline ProfileGrid initial_profile(const ExperimentConfig& c) {
  ProfileGrid g;
  switch (c.family) {
  case Family::cylinder:
    g = cylinder_profile(c.n, c.radius, c.half_length, c.resolution);
    if (c.boundary == "periodic") {
      const double h = 2.0 * c.half_length / static_cast<double>(c.resolution);
      g = ProfileGrid::periodic_grid(c.n, uniform_nodes(-c.half_length, c.half_length - h, c.resolution),
                                     std::vector<double>(c.resolution, c.radius), 2.0 * c.half_length);
    }
    break;
  case Family::sphere:
    g = sphere_profile(c.n, c.radius, c.resolution);
    break;
  case Family::dumbbell:
    g = dumbbell_profile(c.n, c.width, c.resolution);
    break;
  case Family::asymmetric_dumbbell:
    g = asymmetric_dumbbell_profile(c.n, c.width, c.cap_radius, c.resolution);
    break;
  case Family::custom_profile_file:
    g = profile_from_file(c.profile_file, c.n, c.boundary);
    break;
  }
  validate(g);
  return g;
}

// ---------------------------------------------------------------------------

struct PerturbationSet {
  std::vector<ProfileGrid> profiles;
  std::vector<double> c2_distance;  // discrete C2 distance to the base
  std::size_t resampled = 0;
};

/// Discrete C2 norm max(|f|, |f'|, |f''|) over the nodes.
inline double discrete_c2_norm(const std::vector<double>& f, const std::vector<double>& df,
                               const std::vector<double>& d2f) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    m = std::max({m, std::abs(f[i]), std::abs(df[i]), std::abs(d2f[i])});
  return m;
}

/// U0 + delta * U_ref * phi with phi = sum_{m <= M} a_m cos(m pi (x - c)/h)
/// normalised to discrete C2 norm 1 (h: domain half width, c: centre;
/// cosines in 2 pi (x - x_0)/P for periodic grids). U_ref is the initial
/// waist. Coefficients are standard normal draws from mt19937_64(seed).
inline PerturbationSet generate_perturbations(const PerturbationSpec& spec, const ProfileGrid& base,
                                              std::uint64_t seed, std::size_t resample_budget = 100) {
  if (spec.delta < 0.0 || spec.count < 1 || spec.modes < 0)
    throw PreconditionError("perturbation needs delta >= 0, count >= 1, modes >= 0");
  if (base.has_cap())
    throw PreconditionError("perturbations are defined for neumann or periodic grids only");
  validate(base);
  const double u_ref = find_waist(base).radius;
  const std::size_t m = base.size();
  double k0, c;
  if (base.periodic()) {
    k0 = 2.0 * std::numbers::pi / base.period();
    c = base.left_end;
  } else {
    const double hw = 0.5 * (base.right_end - base.left_end);
    k0 = std::numbers::pi / hw;
    c = 0.5 * (base.left_end + base.right_end);
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  PerturbationSet out;
  while (out.profiles.size() < spec.count) {
    std::vector<double> a(static_cast<std::size_t>(spec.modes) + 1);
    for (auto& v : a)
      v = normal(rng);
    std::vector<double> f(m, 0.0), df(m, 0.0), d2f(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < a.size(); ++k) {
        const double w = k0 * static_cast<double>(k);
        const double arg = w * (base.x[i] - c);
        f[i] += a[k] * std::cos(arg);
        df[i] -= a[k] * w * std::sin(arg);
        d2f[i] -= a[k] * w * w * std::cos(arg);
      }
    }
    const double norm = discrete_c2_norm(f, df, d2f);
    ProfileGrid g = base;
    bool positive = true;
    for (std::size_t i = 0; i < m; ++i) {
      const double phi = norm > 0.0 ? f[i] / norm : 0.0;
      g.radius[i] = base.radius[i] + spec.delta * u_ref * phi;
      positive = positive && g.radius[i] > 0.0;
    }
    if (!positive) {
      if (++out.resampled > resample_budget)
        throw PreconditionError("cannot keep perturbed profiles positive within the resample budget");
      continue;
    }
    out.profiles.push_back(std::move(g));
    out.c2_distance.push_back(norm > 0.0 ? spec.delta * u_ref : 0.0);
  }
  return out;
}

} // namespace neckpinch::harness
