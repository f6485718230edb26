#pragma once

// CSV tables and the key: value report. Numbers are printed in shortest
// round-trip form so identical runs give identical bytes.

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "neckpinch/harness/experiments.hpp"

namespace neckpinch::harness {

struct Results {
  ExperimentConfig config;
  std::optional<RunResult> run;
  std::optional<StabilityResult> stability;
  std::optional<SweepResult> sweep;
  std::string error;   // non-empty: the command failed, outputs are partial
};

using FileSet = std::vector<std::pair<std::string, std::string>>;  // name, content

namespace detail {

inline std::string seed_line(const ExperimentConfig& c) { return "# seed = " + std::to_string(c.seed) + "\n"; }

inline std::string b(bool v) { return v ? "true" : "false"; }

inline void report_fields(std::ostringstream& o, const SingularityReport& r, const std::string& prefix = "") {
  o << prefix << "kind: " << to_string(r.kind) << "\n";
  o << prefix << "degeneracy: " << to_string(r.degeneracy) << "\n";
  o << prefix << "T: " << fmt(r.T) << "\n";
  o << prefix << "x0: " << fmt(r.x0) << "\n";
  o << prefix << "type1_ratio_sup: " << fmt(r.type1_ratio_sup) << "\n";
  o << prefix << "slope: " << fmt(r.slope) << "\n";
  o << prefix << "eta_H: " << fmt(r.eta_H) << "\n";
  o << prefix << "eta_2cvx: " << fmt(r.eta_2cvx) << "\n";
  o << prefix << "alpha_min: " << fmt(r.alpha_min) << "\n";
  o << prefix << "eps0_emp: " << fmt(r.eps0_emp) << "\n";
  o << prefix << "disconnects: " << b(r.disconnects) << "\n";
  o << prefix << "left_survival_radius: " << fmt(r.left_survival_radius) << "\n";
  o << prefix << "right_survival_radius: " << fmt(r.right_survival_radius) << "\n";
  o << prefix << "uniform: " << b(r.uniform) << "\n";
  o << prefix << "type_class: " << to_string(r.type_class) << "\n";
  o << prefix << "T_stderr: " << fmt(r.T_stderr) << "\n";
  for (const auto& n : r.notes)
    o << prefix << "note: " << n << "\n";
}

} // namespace detail

inline std::string run_csv(const Results& r) {
  std::ostringstream o;
  o << detail::seed_line(r.config) << "t,U_min,x_argmin,maxA2,dt,nodes\n";
  if (r.run)
    for (const auto& s : r.run->history.stats)
      o << detail::fmt(s.t) << "," << detail::fmt(s.u_min) << "," << detail::fmt(s.x_argmin) << ","
        << detail::fmt(s.max_a2) << "," << detail::fmt(s.dt) << "," << s.nodes << "\n";
  return o.str();
}

inline std::string rescale_csv(const Results& r) {
  std::ostringstream o;
  o << detail::seed_line(r.config) << "tau,c,c_scaled,resid,center\n";
  if (r.run && r.run->analysis.profile) {
    const auto& p = *r.run->analysis.profile;
    for (std::size_t i = 0; i < p.fits.size(); ++i)
      o << detail::fmt(p.fits[i].tau) << "," << detail::fmt(p.fits[i].c) << "," << detail::fmt(p.fits[i].c_scaled)
        << "," << detail::fmt(p.fits[i].resid) << "," << detail::fmt(p.center[i]) << "\n";
  }
  return o.str();
}

inline std::string typeone_csv(const Results& r) {
  std::ostringstream o;
  o << detail::seed_line(r.config) << "t,ratio\n";
  if (r.run && r.run->analysis.type_one) {
    const auto& s = *r.run->analysis.type_one;
    for (std::size_t i = 0; i < s.times.size(); ++i)
      o << detail::fmt(s.times[i]) << "," << detail::fmt(s.ratios[i]) << "\n";
  }
  return o.str();
}

inline std::string sweep_csv(const Results& r) {
  std::ostringstream o;
  o << detail::seed_line(r.config) << "s,kind,type1_ratio_sup,T\n";
  if (r.sweep)
    for (const auto& p : r.sweep->points)
      o << detail::fmt(p.s) << "," << to_string(p.report.kind) << "," << detail::fmt(p.report.type1_ratio_sup) << ","
        << detail::fmt(p.report.T) << "\n";
  return o.str();
}

inline std::string stability_csv(const Results& r) {
  std::ostringstream o;
  o << detail::seed_line(r.config) << "index,c2_distance,kind,degeneracy,T,x0,type1_ratio_sup,slope,error\n";
  if (r.stability)
    for (const auto& row : r.stability->rows) {
      std::string err = row.error;
      for (auto& ch : err)
        if (ch == ',' || ch == '\n')
          ch = ';';
      o << row.index << "," << detail::fmt(row.c2_distance) << "," << to_string(row.report.kind) << ","
        << to_string(row.report.degeneracy) << "," << detail::fmt(row.report.T) << "," << detail::fmt(row.report.x0)
        << "," << detail::fmt(row.report.type1_ratio_sup) << "," << detail::fmt(row.report.slope) << "," << err
        << "\n";
    }
  return o.str();
}

inline std::string report_text(const Results& r) {
  using detail::fmt;
  std::ostringstream o;
  o << "status: " << (r.error.empty() ? "ok" : "failed") << "\n";
  if (!r.error.empty())
    o << "error: " << r.error << "\n";
  o << "seed: " << r.config.seed << "\n";
  for (const auto& [k, v] : echo(r.config))
    o << "config." << k << ": " << v << "\n";
  if (r.run) {
    const auto& h = r.run->history;
    const auto& a = r.run->analysis;
    o << "stop_reason: " << to_string(h.stop_reason) << "\n";
    o << "steps: " << h.steps << "\n";
    o << "rejected_steps: " << h.rejected_steps << "\n";
    o << "snapshots: " << h.snapshots.size() << "\n";
    std::size_t peak = 0;
    for (const auto& s : h.stats)
      peak = std::max(peak, s.nodes);
    o << "max_nodes_used: " << peak << "\n";
    detail::report_fields(o, a.report);
    o << "type1_final_decade_sup: " << fmt(a.type_class.final_sup) << "\n";
    o << "type1_trend: " << fmt(a.type_class.trend) << "\n";
    o << "residual_decreasing: " << detail::b(a.residual_decreasing) << "\n";
    o << "slope_ok: " << detail::b(a.slope_ok) << "\n";
    if (a.disconnection.applicable) {
      o << "disconnection_decreasing_scales: " << a.disconnection.decreasing_run << "\n";
      o << "disconnection_decrement_ratio: " << fmt(a.disconnection.decrement_ratio) << "\n";
      for (std::size_t i = 0; i < a.disconnection.ratios.size(); ++i)
        o << "disconnection_ratio: " << fmt(a.disconnection.distances[i]) << " " << fmt(a.disconnection.ratios[i])
          << "\n";
    }
    if (a.lemma26)
      o << "lemma26_samples_used: " << a.lemma26->used << "\n"
        << "lemma26_samples_dropped: " << a.lemma26->dropped << "\n";
  }
  if (r.stability) {
    const auto& s = *r.stability;
    o << "verdict: " << to_string(s.verdict) << "\n";
    o << "perturbations: " << s.rows.size() << "\n";
    o << "resampled: " << s.resampled << "\n";
    o << "T_spread: " << fmt(s.T_spread) << "\n";
    o << "x_spread: " << fmt(s.x_spread) << "\n";
    o << "C_T: " << fmt(s.C_T) << "\n";
    o << "C_x: " << fmt(s.C_x) << "\n";
    o << "offending:";
    for (auto i : s.offending)
      o << " " << i;
    o << "\n";
    for (const auto& n : s.notes)
      o << "note: " << n << "\n";
    detail::report_fields(o, s.base, "base.");
  }
  if (r.sweep) {
    const auto& s = *r.sweep;
    o << "bracket_lo: " << fmt(s.bracket_lo) << "\n";
    o << "bracket_hi: " << fmt(s.bracket_hi) << "\n";
    o << "lo_neck_first: " << detail::b(s.lo_neck_first) << "\n";
    o << "iterations: " << s.sup_trend.size() << "\n";
    o << "innermost_sup: " << fmt(s.innermost_sup) << "\n";
    o << "last4_nondecreasing: " << detail::b(s.last4_nondecreasing) << "\n";
    o << "sup_trend:";
    for (double v : s.sup_trend)
      o << " " << fmt(v);
    o << "\n";
    for (const auto& n : s.notes)
      o << "note: " << n << "\n";
  }
  return o.str();
}

inline FileSet render(const Results& r) {
  FileSet f{{"run.csv", run_csv(r)},
            {"rescale.csv", rescale_csv(r)},
            {"typeone.csv", typeone_csv(r)},
            {"sweep.csv", sweep_csv(r)},
            {"report", report_text(r)}};
  if (r.stability)
    f.emplace_back("stability.csv", stability_csv(r));
  return f;
}

/// Writes every file of render(r) under dir. Existing files are an error
/// unless force is set; nothing is written in that case.
inline std::vector<std::filesystem::path> emit_reports(const Results& r, const std::filesystem::path& dir,
                                                       bool force = false) {
  const auto files = render(r);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  if (!force)
    for (const auto& [name, _] : files)
      if (std::filesystem::exists(dir / name))
        throw IoError("refusing to overwrite '" + (dir / name).string() + "' (use --force)");
  std::vector<std::filesystem::path> written;
  for (const auto& [name, content] : files) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out)
      throw IoError("cannot write '" + path.string() + "'");
    written.push_back(path);
  }
  return written;
}

} // namespace neckpinch::harness
