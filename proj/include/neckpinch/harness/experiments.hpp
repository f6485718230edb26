#pragma once

// Runs, perturbation suites and the asymmetric sweep. Everything here is a
// deterministic function of the configuration (and seed).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "neckpinch/diagnostics.hpp"
#include "neckpinch/harness/config.hpp"
#include "neckpinch/harness/families.hpp"
#include "neckpinch/rescale.hpp"
#include "neckpinch/solver.hpp"

namespace neckpinch::harness {

struct Analysis {
  SingularityReport report;
  std::optional<TypeISeries> type_one;
  TypeClassification type_class;
  std::optional<ConvergenceSeries> profile;
  std::vector<double> profile_taus;
  bool residual_decreasing = false;
  bool slope_ok = false;
  DisconnectionResult disconnection;
  std::optional<Lemma26Result> lemma26;
  std::optional<NeighborhoodConstants> neighborhood;
};

namespace detail {

/// Medians of consecutive triples must not increase and the last must be
/// below the first.
inline bool residual_trend_decreasing(const std::vector<ProfileFit>& fits) {
  if (fits.size() < 2)
    return false;
  std::vector<double> r;
  for (const auto& f : fits)
    r.push_back(f.resid);
  if (r.size() < 3)
    return r.back() < r.front();
  std::vector<double> med;
  for (std::size_t i = 0; i + 2 < r.size(); ++i) {
    double a[3] = {r[i], r[i + 1], r[i + 2]};
    std::sort(a, a + 3);
    med.push_back(a[1]);
  }
  for (std::size_t i = 1; i < med.size(); ++i)
    if (med[i] > med[i - 1])
      return false;
  return r.back() < r.front();
}

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

} // namespace detail

/// Classification and every diagnostic the configuration asks for. Failures
/// of individual diagnostics are recorded as notes; they do not throw.
inline Analysis analyze(const FlowHistory& h, const ExperimentConfig& cfg) {
  Analysis a;
  auto& rep = a.report;
  const auto& d = cfg.diag;
  rep.uniform = h.uniform;
  rep.eta_H = rep.eta_2cvx = rep.alpha_min = rep.eps0_emp = detail::nan();
  if (h.snapshots.empty()) {
    rep.notes.push_back("empty history");
    return a;
  }
  const auto& last = h.snapshots.back();
  const auto& est = h.pinch_estimate;

  switch (h.stop_reason) {
  case StopReason::neck_threshold:
    if (!est) {
      rep.kind = SingularityKind::unresolved;
      rep.notes.push_back("neck reached the threshold but the pinch fit failed");
      break;
    }
    rep.kind = SingularityKind::neckpinch;
    rep.T = est->T;
    rep.x0 = h.uniform ? 0.5 * (last.left_end + last.right_end) : est->x0;
    if (h.uniform && last.periodic())
      rep.x0 = last.left_end + 0.5 * last.period();
    rep.slope = est->slope;
    rep.T_stderr = est->T_stderr;
    if (h.uniform)
      rep.notes.push_back("uniform: the whole slice reached the threshold together; x0 is the domain centre");
    break;
  case StopReason::extinction:
    rep.kind = SingularityKind::extinction;
    if (h.lobe_absorbed) {
      rep.T = last.time;
      rep.x0 = h.last_neck_x;
      rep.notes.push_back("capped lobe absorbed into the neck; T is the absorption time");
    } else if (est) {
      rep.T = est->T;
      rep.x0 = est->x0;
      rep.slope = est->slope;
      rep.T_stderr = est->T_stderr;
    } else {
      rep.T = last.time;
      rep.x0 = h.stats.back().x_argmin;
      rep.notes.push_back("no extrapolated extinction time; T is the stop time");
    }
    break;
  case StopReason::max_steps:
  case StopReason::blowup_detected:
    rep.kind = SingularityKind::unresolved;
    rep.notes.push_back("stopped by " + std::string(to_string(h.stop_reason)));
    return a;
  }
  if (rep.kind == SingularityKind::unresolved)
    return a;
  if (!(rep.T > last.time)) {
    // The history must end strictly before T for every rescaled quantity.
    rep.T = std::nextafter(last.time, infinity);
    rep.notes.push_back("T clamped just above the last snapshot time");
  }

  std::vector<CurvatureField> curv;
  try {
    curv = curvature_history(h);
  } catch (const Error& e) {
    rep.notes.push_back(std::string("curvatures: ") + e.what());
    return a;
  }

  try {
    a.type_one = type_one_series(h, curv, rep.T, rep.x0, d.k, d.r_diag);
    rep.type1_ratio_sup = a.type_one->running_sup.back();
    a.type_class = classify_type(*a.type_one, d.type1_threshold);
    rep.type_class = a.type_class.type;
    if (!a.type_class.note.empty())
      rep.notes.push_back("type one: " + a.type_class.note);
  } catch (const Error& e) {
    rep.notes.push_back(std::string("type one: ") + e.what());
  }

  const bool neck = rep.kind == SingularityKind::neckpinch && !h.uniform;
  if (neck) {
    a.profile_taus = d.tau_grid;
    try {
      a.profile = convergence_series(h, rep.T, rep.x0, d.L, d.tau_grid);
      a.residual_decreasing = detail::residual_trend_decreasing(a.profile->fits);
    } catch (const Error& e) {
      rep.notes.push_back(std::string("profile: ") + e.what());
    }
  }
  const double expected = -2.0 * (h.n() - 1);
  a.slope_ok = est && std::abs(rep.slope / expected - 1.0) <= d.slope_tolerance;

  if (h.uniform) {
    rep.degeneracy = Degeneracy::undetermined;
  } else if (rep.type_class == TypeClass::TypeII_candidate) {
    rep.degeneracy = Degeneracy::degenerate_candidate;
  } else if (neck && rep.type_class == TypeClass::TypeI && a.residual_decreasing && a.slope_ok) {
    rep.degeneracy = Degeneracy::nondegenerate;
  } else {
    rep.degeneracy = Degeneracy::undetermined;
  }

  const double survival = 10.0 * cfg.solver.u_stop * h.reference_radius;
  if (neck) {
    a.disconnection = disconnection_check(h, rep, d.r_diag, survival);
    rep.disconnects = a.disconnection.disconnects && a.disconnection.trend_ok;
    rep.left_survival_radius = a.disconnection.left_radius;
    rep.right_survival_radius = a.disconnection.right_radius;
  } else {
    a.disconnection.applicable = false;
    a.disconnection.note = h.uniform ? "not applicable: uniform slice" : "not applicable: no neckpinch";
  }

  if (rep.kind == SingularityKind::neckpinch && d.lemma26_samples > 0) {
    try {
      const double tau_end = -std::log(rep.T - last.time);
      const double tau_hi = std::min(d.lemma26_tau_hi, tau_end);
      if (!(tau_hi > d.lemma26_tau_lo))
        throw InsufficientData("history ends before the lemma26 window");
      std::vector<SpacetimePoint> pts;
      if (h.uniform) {
        // axis points above the domain centre
        for (std::size_t i = 1; i <= d.lemma26_samples; ++i) {
          const double tau = d.lemma26_tau_lo + (tau_hi - d.lemma26_tau_lo) * halton(i, 2);
          pts.push_back({rep.x0, 0.0, nearest_slice_time(h, rep.T - std::exp(-tau), rep.T)});
        }
      } else {
        pts = lemma26_samples(h, rep.T, rep.x0, d.lemma26_samples, d.lemma26_tau_lo, tau_hi, d.lemma26_y);
      }
      a.lemma26 = lemma26_check(h, curv, rep.T, rep.x0, d.eta, pts);
      rep.eps0_emp = a.lemma26->eps0;
    } catch (const Error& e) {
      rep.notes.push_back(std::string("lemma26: ") + e.what());
    }
  }

  try {
    NeighborhoodWindow w;
    w.x0 = rep.x0;
    w.half_width = d.r_diag;
    w.t_from = std::max(h.first_time(), rep.T - d.r_diag * d.r_diag);
    w.t_to = last.time;
    a.neighborhood = neighborhood_constants(h, curv, w);
    rep.eta_H = a.neighborhood->eta_H;
    rep.eta_2cvx = a.neighborhood->eta_2cvx;
    rep.alpha_min = a.neighborhood->alpha_min;
  } catch (const Error& e) {
    rep.notes.push_back(std::string("neighbourhood: ") + e.what());
  }
  return a;
}

// ---------------------------------------------------------------------------

struct RunResult {
  ExperimentConfig config;
  FlowHistory history;
  Analysis analysis;
};

inline RunResult run(const ExperimentConfig& cfg) {
  validate(cfg);
  RunResult r;
  r.config = cfg;
  r.history = evolve(initial_profile(cfg), cfg.solver);
  r.analysis = analyze(r.history, cfg);
  return r;
}

inline RunResult run_profile(const ExperimentConfig& cfg, const ProfileGrid& initial) {
  RunResult r;
  r.config = cfg;
  r.history = evolve(initial, cfg.solver);
  r.analysis = analyze(r.history, cfg);
  return r;
}

namespace detail {

inline std::size_t worker_count(const ExperimentConfig& cfg) {
  if (cfg.threads > 0)
    return cfg.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// f(i) for i < count on up to `workers` threads; results in index order.
template <class F>
auto parallel_map(std::size_t count, std::size_t workers, F f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<R> out(count);
  for (std::size_t start = 0; start < count; start += workers) {
    std::vector<std::future<R>> batch;
    const std::size_t end = std::min(count, start + workers);
    for (std::size_t i = start; i < end; ++i)
      batch.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, f, i));
    for (std::size_t i = start; i < end; ++i)
      out[i] = batch[i - start].get();
  }
  return out;
}

} // namespace detail

enum class Verdict { PASS, FAIL, INCONCLUSIVE };

inline std::string_view to_string(Verdict v) {
  switch (v) {
  case Verdict::PASS:
    return "PASS";
  case Verdict::FAIL:
    return "FAIL";
  case Verdict::INCONCLUSIVE:
    return "INCONCLUSIVE";
  }
  return "?";
}

struct StabilityRow {
  std::size_t index = 0;
  double c2_distance = 0.0;
  SingularityReport report;
  std::string error;   // non-empty if the run threw
};

struct StabilityResult {
  Verdict verdict = Verdict::INCONCLUSIVE;
  SingularityReport base;
  std::vector<StabilityRow> rows;
  std::uint64_t seed = 0;
  std::size_t resampled = 0;
  double T_spread = 0.0;   // max |T_j - T|
  double x_spread = 0.0;   // max |x0_j - x0|
  double C_T = 0.0;        // T_spread / (delta T)
  double C_x = 0.0;        // x_spread / delta
  std::vector<std::size_t> offending;
  std::vector<std::string> notes;
};

/// Perturbed copies of the configured profile; verdict PASS iff every copy
/// is a nondegenerate neckpinch and the pinch times stay within
/// time_tolerance * T of the base.
inline StabilityResult stability_suite(const ExperimentConfig& cfg, double time_tolerance = 0.05) {
  validate(cfg);
  StabilityResult out;
  out.seed = cfg.seed;
  const auto base_profile = initial_profile(cfg);
  const auto base = run_profile(cfg, base_profile);
  out.base = base.analysis.report;
  if (out.base.kind != SingularityKind::neckpinch || out.base.degeneracy != Degeneracy::nondegenerate)
    throw PreconditionError("stability suite needs a nondegenerate neckpinch base run, got " +
                            std::string(to_string(out.base.kind)) + "/" +
                            std::string(to_string(out.base.degeneracy)));
  const auto set = generate_perturbations(cfg.perturbation, base_profile, cfg.seed);
  out.resampled = set.resampled;
  out.rows = detail::parallel_map(set.profiles.size(), detail::worker_count(cfg), [&](std::size_t i) {
    StabilityRow row;
    row.index = i;
    row.c2_distance = set.c2_distance[i];
    try {
      row.report = run_profile(cfg, set.profiles[i]).analysis.report;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    return row;
  });

  bool unresolved = false, failed = false;
  for (const auto& r : out.rows) {
    if (!r.error.empty() || r.report.kind == SingularityKind::unresolved) {
      unresolved = true;
      out.offending.push_back(r.index);
      continue;
    }
    if (r.report.kind != SingularityKind::neckpinch || r.report.degeneracy != Degeneracy::nondegenerate) {
      failed = true;
      out.offending.push_back(r.index);
      continue;
    }
    out.T_spread = std::max(out.T_spread, std::abs(r.report.T - out.base.T));
    out.x_spread = std::max(out.x_spread, std::abs(r.report.x0 - out.base.x0));
  }
  const double delta = cfg.perturbation.delta;
  if (delta > 0.0) {
    out.C_T = out.T_spread / (delta * out.base.T);
    out.C_x = out.x_spread / delta;
  }
  if (out.T_spread > time_tolerance * out.base.T) {
    failed = true;
    out.notes.push_back("pinch times spread beyond " + harness::detail::fmt(time_tolerance) + " T");
  }
  out.verdict = unresolved ? Verdict::INCONCLUSIVE : failed ? Verdict::FAIL : Verdict::PASS;
  return out;
}

// ---------------------------------------------------------------------------

struct SweepPoint {
  double s = 0.0;
  std::size_t iteration = 0;   // 0 for the two endpoints
  bool neck_first = false;
  SingularityReport report;
};

struct SweepResult {
  std::vector<SweepPoint> points;   // endpoints first, then bisection order
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  bool lo_neck_first = false;
  /// type1_ratio_sup along the bisection iterates, in order.
  std::vector<double> sup_trend;
  bool last4_nondecreasing = false;
  double innermost_sup = 0.0;
  std::vector<std::string> notes;
};

/// Neck first: the neck reached the threshold with both sides still thick.
inline bool neck_first(const FlowHistory& h) {
  return h.stop_reason == StopReason::neck_threshold && !h.uniform;
}

/// Bisection in the cap radius of the asymmetric dumbbell between a
/// lobe-first and a neck-first endpoint.
inline SweepResult degenerate_sweep(const ExperimentConfig& cfg) {
  validate(cfg);
  if (cfg.family != Family::asymmetric_dumbbell)
    throw PreconditionError("sweep needs family = asymmetric_dumbbell");
  if (!(cfg.sweep.lo < cfg.sweep.hi))
    throw PreconditionError("sweep needs sweep_lo < sweep_hi");
  auto probe = [&](double s, std::size_t it) {
    ExperimentConfig c = cfg;
    c.cap_radius = s;
    const auto r = run(c);
    SweepPoint p;
    p.s = s;
    p.iteration = it;
    p.neck_first = neck_first(r.history);
    p.report = r.analysis.report;
    return p;
  };
  SweepResult out;
  auto lo = probe(cfg.sweep.lo, 0);
  auto hi = probe(cfg.sweep.hi, 0);
  out.points = {lo, hi};
  if (lo.neck_first == hi.neck_first)
    throw PreconditionError("sweep endpoints classify identically (both " +
                            std::string(lo.neck_first ? "neck-first" : "lobe-first") + ")");
  out.lo_neck_first = lo.neck_first;
  double a = cfg.sweep.lo, b = cfg.sweep.hi;
  for (std::size_t it = 1; it <= cfg.sweep.max_iterations && b - a > cfg.sweep.width; ++it) {
    const double m = 0.5 * (a + b);
    auto p = probe(m, it);
    (p.neck_first == out.lo_neck_first ? a : b) = m;
    out.sup_trend.push_back(p.report.type1_ratio_sup);
    out.points.push_back(std::move(p));
  }
  if (b - a > cfg.sweep.width)
    out.notes.push_back("iteration limit reached before the requested width");
  out.bracket_lo = a;
  out.bracket_hi = b;
  const auto& t = out.sup_trend;
  if (!t.empty())
    out.innermost_sup = t.back();
  if (t.size() >= 4) {
    out.last4_nondecreasing = true;
    for (std::size_t i = t.size() - 3; i < t.size(); ++i)
      out.last4_nondecreasing = out.last4_nondecreasing && t[i] >= t[i - 1];
  }
  return out;
}

} // namespace neckpinch::harness
