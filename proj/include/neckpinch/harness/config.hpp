#pragma once

// Flat key = value experiment configuration. '#' starts a comment. Unknown
// keys are errors; every key has a default and the effective configuration is
// echoed into every report.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "neckpinch/errors.hpp"
#include "neckpinch/solver.hpp"

namespace neckpinch::harness {

enum class Family { cylinder, sphere, dumbbell, asymmetric_dumbbell, custom_profile_file };

inline std::string_view to_string(Family f) {
  switch (f) {
  case Family::cylinder:
    return "cylinder";
  case Family::sphere:
    return "sphere";
  case Family::dumbbell:
    return "dumbbell";
  case Family::asymmetric_dumbbell:
    return "asymmetric_dumbbell";
  case Family::custom_profile_file:
    return "custom_profile_file";
  }
  return "?";
}

inline Family parse_family(std::string_view s) {
  for (auto f : {Family::cylinder, Family::sphere, Family::dumbbell, Family::asymmetric_dumbbell,
                 Family::custom_profile_file})
    if (to_string(f) == s)
      return f;
  throw PreconditionError("unknown family '" + std::string(s) + "'");
}

struct PerturbationSpec {
  double delta = 0.0;
  std::size_t count = 20;
  int modes = 6;
};

struct SweepSpec {
  double lo = 0.6;        // cap radius giving lobe-first extinction
  double hi = 1.0;        // cap radius giving neck-first pinch
  double width = 1e-3;    // stop bisecting below this bracket width
  std::size_t max_iterations = 40;
};

struct DiagnosticsSpec {
  double k = 10.0;          // Type I window, parabolic widths
  double k_profile = 3.0;   // narrower window reported alongside
  double r_diag = 0.3;
  double eta = 1.0;
  double eps_cyl = 0.05;
  double L = 2.0;
  std::vector<double> tau_grid{4, 5, 6, 7, 8};
  double type1_threshold = 5.0;
  double slope_tolerance = 0.1;
  std::size_t lemma26_samples = 200;
  double lemma26_tau_lo = 4.0;
  double lemma26_tau_hi = 10.0;
  double lemma26_y = 3.0;
};

struct ExperimentConfig {
  int n = 2;
  Family family = Family::dumbbell;
  double width = 0.4;        // dumbbell neck radius w
  double radius = 1.0;       // cylinder / sphere radius
  double half_length = 1.0;  // cylinder half length
  double cap_radius = 0.8;   // asymmetric dumbbell: sweep parameter s
  std::string profile_file;
  std::string boundary = "neumann";
  std::size_t resolution = 201;
  SolverConfig solver;
  DiagnosticsSpec diag;
  PerturbationSpec perturbation;
  SweepSpec sweep;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  std::size_t threads = 0;   // 0: hardware concurrency
};

namespace detail {

inline std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos)
    return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size())
    throw PreconditionError("config key '" + key + "': not a number: '" + v + "'");
  return d;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long u = 0;
  try {
    if (!v.empty() && v[0] == '-')
      throw std::invalid_argument("negative");
    u = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty())
    throw PreconditionError("config key '" + key + "': not a non-negative integer: '" + v + "'");
  return u;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes")
    return true;
  if (v == "false" || v == "0" || v == "no")
    return false;
  throw PreconditionError("config key '" + key + "': not a boolean: '" + v + "'");
}

inline std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(to_double(key, trim(item)));
  return out;
}

/// Shortest form that reads back to the same double.
inline std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

} // namespace detail

/// Applies one key = value pair.
inline void set_key(ExperimentConfig& c, const std::string& key, const std::string& v) {
  using namespace detail;
  auto& s = c.solver;
  auto& d = c.diag;
  if (key == "n")
    c.n = static_cast<int>(to_uint(key, v));
  else if (key == "family")
    c.family = parse_family(v);
  else if (key == "width")
    c.width = to_double(key, v);
  else if (key == "radius")
    c.radius = to_double(key, v);
  else if (key == "half_length")
    c.half_length = to_double(key, v);
  else if (key == "cap_radius")
    c.cap_radius = to_double(key, v);
  else if (key == "profile_file")
    c.profile_file = v;
  else if (key == "boundary")
    c.boundary = v;
  else if (key == "resolution")
    c.resolution = to_uint(key, v);
  else if (key == "dt_safety")
    s.dt_safety = to_double(key, v);
  else if (key == "u_stop")
    s.u_stop = to_double(key, v);
  else if (key == "remesh_ratio")
    s.remesh_ratio = to_double(key, v);
  else if (key == "max_steps")
    s.max_steps = to_uint(key, v);
  else if (key == "tol_newton")
    s.tol_newton = to_double(key, v);
  else if (key == "scheme")
    s.scheme = parse_scheme(v);
  else if (key == "adaptive")
    s.adaptive = to_bool(key, v);
  else if (key == "max_nodes")
    s.max_nodes = to_uint(key, v);
  else if (key == "k")
    d.k = to_double(key, v);
  else if (key == "k_profile")
    d.k_profile = to_double(key, v);
  else if (key == "r_diag")
    d.r_diag = to_double(key, v);
  else if (key == "eta")
    d.eta = to_double(key, v);
  else if (key == "eps_cyl")
    d.eps_cyl = to_double(key, v);
  else if (key == "L")
    d.L = to_double(key, v);
  else if (key == "tau_grid")
    d.tau_grid = to_list(key, v);
  else if (key == "type1_threshold")
    d.type1_threshold = to_double(key, v);
  else if (key == "slope_tolerance")
    d.slope_tolerance = to_double(key, v);
  else if (key == "lemma26_samples")
    d.lemma26_samples = to_uint(key, v);
  else if (key == "lemma26_tau_lo")
    d.lemma26_tau_lo = to_double(key, v);
  else if (key == "lemma26_tau_hi")
    d.lemma26_tau_hi = to_double(key, v);
  else if (key == "lemma26_y")
    d.lemma26_y = to_double(key, v);
  else if (key == "delta")
    c.perturbation.delta = to_double(key, v);
  else if (key == "count")
    c.perturbation.count = to_uint(key, v);
  else if (key == "modes")
    c.perturbation.modes = static_cast<int>(to_uint(key, v));
  else if (key == "sweep_lo")
    c.sweep.lo = to_double(key, v);
  else if (key == "sweep_hi")
    c.sweep.hi = to_double(key, v);
  else if (key == "sweep_width")
    c.sweep.width = to_double(key, v);
  else if (key == "sweep_max_iterations")
    c.sweep.max_iterations = to_uint(key, v);
  else if (key == "seed")
    c.seed = to_uint(key, v);
  else if (key == "output_dir")
    c.output_dir = v;
  else if (key == "threads")
    c.threads = to_uint(key, v);
  else
    throw PreconditionError("unknown config key '" + key + "'");
}

inline void validate(const ExperimentConfig& c) {
  if (c.n < 2)
    throw PreconditionError("n must be >= 2");
  if (c.resolution < 5)
    throw PreconditionError("resolution must be >= 5");
  if (!(c.width > 0.0 && c.width < 1.0))
    throw PreconditionError("width must lie in (0, 1)");
  if (!(c.radius > 0.0) || !(c.half_length > 0.0) || !(c.cap_radius > 0.0))
    throw PreconditionError("radius, half_length and cap_radius must be positive");
  if (c.boundary != "neumann" && c.boundary != "periodic")
    throw PreconditionError("boundary must be neumann or periodic");
  validate(c.solver);
  const auto& d = c.diag;
  if (!(d.k > 0 && d.k_profile > 0 && d.r_diag > 0 && d.eta >= 0 && d.eps_cyl > 0 && d.L > 0 &&
        d.type1_threshold > 0 && d.slope_tolerance > 0))
    throw PreconditionError("diagnostic parameters must be positive");
  if (d.tau_grid.empty())
    throw PreconditionError("tau_grid must not be empty");
  if (!(d.lemma26_tau_hi > d.lemma26_tau_lo) || !(d.lemma26_y > 0))
    throw PreconditionError("lemma26 window must be non-empty");
  if (c.perturbation.delta < 0.0 || c.perturbation.count < 1 || c.perturbation.modes < 0)
    throw PreconditionError("perturbation needs delta >= 0, count >= 1, modes >= 0");
  if (!(c.sweep.width > 0.0) || !(c.sweep.lo > 0.0) || !(c.sweep.hi > 0.0))
    throw PreconditionError("sweep endpoints and width must be positive");
}

inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig c = {}) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos)
      line.erase(hash);
    line = detail::trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw PreconditionError("config line " + std::to_string(lineno) + ": expected key = value");
    set_key(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig c = {}) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open config file '" + path + "'");
  return parse_config(in, std::move(c));
}

/// Effective configuration as key = value lines (parseable by parse_config).
inline std::vector<std::pair<std::string, std::string>> echo(const ExperimentConfig& c) {
  using detail::fmt;
  std::string taus;
  for (std::size_t i = 0; i < c.diag.tau_grid.size(); ++i)
    taus += (i ? "," : "") + fmt(c.diag.tau_grid[i]);
  const auto& s = c.solver;
  const auto& d = c.diag;
  return {
      {"n", std::to_string(c.n)},
      {"family", std::string(to_string(c.family))},
      {"width", fmt(c.width)},
      {"radius", fmt(c.radius)},
      {"half_length", fmt(c.half_length)},
      {"cap_radius", fmt(c.cap_radius)},
      {"profile_file", c.profile_file},
      {"boundary", c.boundary},
      {"resolution", std::to_string(c.resolution)},
      {"dt_safety", fmt(s.dt_safety)},
      {"u_stop", fmt(s.u_stop)},
      {"remesh_ratio", fmt(s.remesh_ratio)},
      {"max_steps", std::to_string(s.max_steps)},
      {"tol_newton", fmt(s.tol_newton)},
      {"scheme", std::string(to_string(s.scheme))},
      {"adaptive", s.adaptive ? "true" : "false"},
      {"max_nodes", std::to_string(s.max_nodes)},
      {"k", fmt(d.k)},
      {"k_profile", fmt(d.k_profile)},
      {"r_diag", fmt(d.r_diag)},
      {"eta", fmt(d.eta)},
      {"eps_cyl", fmt(d.eps_cyl)},
      {"L", fmt(d.L)},
      {"tau_grid", taus},
      {"type1_threshold", fmt(d.type1_threshold)},
      {"slope_tolerance", fmt(d.slope_tolerance)},
      {"lemma26_samples", std::to_string(d.lemma26_samples)},
      {"lemma26_tau_lo", fmt(d.lemma26_tau_lo)},
      {"lemma26_tau_hi", fmt(d.lemma26_tau_hi)},
      {"lemma26_y", fmt(d.lemma26_y)},
      {"delta", fmt(c.perturbation.delta)},
      {"count", std::to_string(c.perturbation.count)},
      {"modes", std::to_string(c.perturbation.modes)},
      {"sweep_lo", fmt(c.sweep.lo)},
      {"sweep_hi", fmt(c.sweep.hi)},
      {"sweep_width", fmt(c.sweep.width)},
      {"sweep_max_iterations", std::to_string(c.sweep.max_iterations)},
      {"seed", std::to_string(c.seed)},
      {"output_dir", c.output_dir},
      {"threads", std::to_string(c.threads)},
  };
}

} // namespace neckpinch::harness
