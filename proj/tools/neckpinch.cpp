// Command line front end: run, rescale, classify, stability, sweep.
//
//   neckpinch run --config tools/configs/dumbbell.cfg --out out/dumbbell
//   neckpinch stability --config tools/configs/stability.cfg --out out/stab --force

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "neckpinch/neckpinch.hpp"

namespace nh = neckpinch::harness;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> resolution;
  std::optional<int> n;
  bool force = false;
};

nh::ExperimentConfig effective_config(const Options& o) {
  nh::ExperimentConfig c;
  if (!o.config.empty())
    c = nh::load_config(o.config);
  if (o.seed)
    c.seed = *o.seed;
  if (o.resolution)
    c.resolution = *o.resolution;
  if (o.n)
    c.n = *o.n;
  if (!o.out.empty())
    c.output_dir = o.out;
  nh::validate(c);
  return c;
}

void print_report(const neckpinch::SingularityReport& r) {
  std::printf("kind %s  degeneracy %s  type %s\n", std::string(to_string(r.kind)).c_str(),
              std::string(to_string(r.degeneracy)).c_str(), std::string(to_string(r.type_class)).c_str());
  std::printf("T %.10g  x0 %.6g  slope %.6g  type1_ratio_sup %.6g\n", r.T, r.x0, r.slope, r.type1_ratio_sup);
  std::printf("eta_H %.6g  eta_2cvx %.6g  alpha_min %.6g  eps0_emp %.6g  disconnects %s\n", r.eta_H, r.eta_2cvx,
              r.alpha_min, r.eps0_emp, r.disconnects ? "true" : "false");
  for (const auto& n : r.notes)
    std::printf("  note: %s\n", n.c_str());
}

bool emitting = false;

int finish(const nh::Results& res, const Options& o) {
  emitting = true;
  const auto files = nh::emit_reports(res, res.config.output_dir, o.force);
  std::printf("wrote %zu files to %s\n", files.size(), res.config.output_dir.c_str());
  return 0;
}

int command(const std::string& name, const Options& o) {
  nh::Results res;
  res.config = effective_config(o);
  try {
    if (name == "run" || name == "rescale" || name == "classify") {
      res.run = nh::run(res.config);
      const auto& a = res.run->analysis;
      if (name == "rescale") {
        std::printf("%8s %12s %12s %12s %12s\n", "tau", "c", "c_scaled", "resid", "center");
        if (a.profile)
          for (std::size_t i = 0; i < a.profile->fits.size(); ++i) {
            const auto& f = a.profile->fits[i];
            std::printf("%8.3f %12.6g %12.6g %12.6g %12.6g\n", f.tau, f.c, f.c_scaled, f.resid, a.profile->center[i]);
          }
        else
          std::printf("no rescaled profile (kind %s)\n", std::string(to_string(a.report.kind)).c_str());
      } else if (name == "classify") {
        std::printf("%s %s %s\n", std::string(to_string(a.report.kind)).c_str(),
                    std::string(to_string(a.report.degeneracy)).c_str(),
                    std::string(to_string(a.report.type_class)).c_str());
      } else {
        print_report(a.report);
      }
      return finish(res, o);
    }
    if (name == "stability") {
      res.stability = nh::stability_suite(res.config);
      const auto& s = *res.stability;
      for (const auto& row : s.rows)
        std::printf("%3zu %-11s %-21s T %.10g x0 %.6g %s\n", row.index, std::string(to_string(row.report.kind)).c_str(),
                    std::string(to_string(row.report.degeneracy)).c_str(), row.report.T, row.report.x0,
                    row.error.c_str());
      std::printf("verdict %s  C_T %.4g  C_x %.4g\n", std::string(to_string(s.verdict)).c_str(), s.C_T, s.C_x);
      finish(res, o);
      if (s.verdict == nh::Verdict::INCONCLUSIVE) {
        std::printf("offending:");
        for (auto i : s.offending)
          std::printf(" %zu", i);
        std::printf(" (seed %llu)\n", static_cast<unsigned long long>(s.seed));
        return 2;
      }
      return s.verdict == nh::Verdict::PASS ? 0 : 1;
    }
    if (name == "sweep") {
      res.sweep = nh::degenerate_sweep(res.config);
      const auto& s = *res.sweep;
      for (const auto& p : s.points)
        std::printf("s %.10f  %-10s %-11s sup %.4g  T %.10g\n", p.s, p.neck_first ? "neck-first" : "lobe-first",
                    std::string(to_string(p.report.kind)).c_str(), p.report.type1_ratio_sup, p.report.T);
      std::printf("bracket [%.10f, %.10f]  innermost sup %.4g  last 4 nondecreasing %s\n", s.bracket_lo, s.bracket_hi,
                  s.innermost_sup, s.last4_nondecreasing ? "yes" : "no");
      return finish(res, o);
    }
  } catch (const std::exception& e) {
    res.error = e.what();
    std::fprintf(stderr, "error: %s\n", e.what());
    if (emitting)
      return 1;
    // partial outputs, status failed
    try {
      nh::emit_reports(res, res.config.output_dir, o.force);
    } catch (const std::exception& e2) {
      std::fprintf(stderr, "error: %s\n", e2.what());
    }
    return 1;
  }
  return 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rotationally symmetric mean curvature flow: neckpinch experiments"};
  app.require_subcommand(1);
  Options o;
  for (const char* name : {"run", "rescale", "classify", "stability", "sweep"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", o.config, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--resolution", o.resolution, "initial nodes");
    sub->add_option("--n", o.n, "hypersurface dimension n (cross sections S^{n-1})");
    sub->add_flag("--force", o.force, "overwrite existing outputs");
  }
  app.get_subcommand("run")->description("evolve, classify and write all outputs");
  app.get_subcommand("rescale")->description("as run, printing the rescaled profile fits");
  app.get_subcommand("classify")->description("as run, printing kind / degeneracy / type");
  app.get_subcommand("stability")->description("seeded perturbations of the configured profile");
  app.get_subcommand("sweep")->description("bisection in the asymmetric dumbbell cap radius");
  CLI11_PARSE(app, argc, argv);
  try {
    return command(app.get_subcommands().front()->get_name(), o);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
