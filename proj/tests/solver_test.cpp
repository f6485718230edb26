#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace neckpinch;
using neckpinch::testing::uniform;

namespace {

ProfileGrid cylinder(int n, double R, std::size_t m = 41) {
  return ProfileGrid::neumann(n, uniform(-1, 1, m), std::vector<double>(m, R));
}

ProfileGrid dumbbell(std::size_t m, double w = 0.4) { return harness::dumbbell_profile(2, w, m); }

SolverConfig scheme(Scheme s) {
  SolverConfig c;
  c.scheme = s;
  return c;
}

} // namespace

TEST(Step, CylinderFollowsTheOde) {
  for (auto s : {Scheme::semi_implicit, Scheme::fully_implicit}) {
    const auto g = step(cylinder(2, 1.0), 1e-4, scheme(s));
    for (double u : g.radius)
      EXPECT_NEAR(u, std::sqrt(1 - 2e-4), 1e-8) << to_string(s);
    EXPECT_DOUBLE_EQ(g.time, 1e-4);
  }
}

TEST(Step, ZeroStepIsIdentity) {
  const auto g = dumbbell(51);
  for (auto s : {Scheme::semi_implicit, Scheme::fully_implicit}) {
    const auto h = step(g, 0.0, scheme(s));
    EXPECT_EQ(h.x, g.x);
    EXPECT_EQ(h.radius, g.radius);
    EXPECT_EQ(h.time, g.time);
  }
}

TEST(Step, SphereCentreLocalError) {
  // One step of the R = 0.5 sphere against R(t)^2 = R^2 - 2 n t at x = 0.
  const double R = 0.5;
  for (auto s : {Scheme::semi_implicit, Scheme::fully_implicit}) {
    double prev = 0.0;
    for (double dt : {4e-4, 2e-4, 1e-4}) {
      const auto g = step(harness::sphere_profile(2, R, 801), dt, scheme(s));
      const std::size_t mid = g.size() / 2;
      ASSERT_NEAR(g.x[mid], 0.0, 1e-12);
      const double err = std::abs(g.radius[mid] - std::sqrt(R * R - 4.0 * dt));
      EXPECT_LT(err, 20.0 * dt * dt) << to_string(s) << " dt " << dt;
      if (prev > 0.0) {
        EXPECT_GT(prev / err, 3.0) << to_string(s) << " dt " << dt;
      }
      prev = err;
    }
  }
}

TEST(Step, SchemesAgreeOnCylinder) {
  auto a = cylinder(2, 1.0);
  auto b = a;
  for (int k = 0; k < 100; ++k) {
    a = step(a, 1e-4, scheme(Scheme::semi_implicit));
    b = step(b, 1e-4, scheme(Scheme::fully_implicit));
  }
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_NEAR(a.radius[i], b.radius[i], 1e-6);
}

TEST(Step, SchemesAgreeOnDumbbell) {
  auto a = dumbbell(81);
  auto b = a;
  for (int k = 0; k < 50; ++k) {
    a = step(a, 2e-5, scheme(Scheme::semi_implicit));
    b = step(b, 2e-5, scheme(Scheme::fully_implicit));
  }
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_NEAR(a.radius[i], b.radius[i], 1e-6);
}

TEST(Step, PositivityOrRejection) {
  // a step far beyond the remaining life time of the cylinder
  SolverConfig c;
  c.max_halvings = 3;
  const auto g = cylinder(2, 0.1);
  try {
    const auto h = step(g, 0.01, c);
    for (double u : h.radius)
      EXPECT_GT(u, 0.0);
  } catch (const StepRejected&) {
    SUCCEED();
  }
}

TEST(Step, RejectsNegativeStep) { EXPECT_THROW(step(cylinder(2, 1.0), -1e-3, SolverConfig{}), PreconditionError); }

// ---------------------------------------------------------------------------

TEST(Evolve, CylinderRadiusLaw) {
  SolverConfig c;
  c.u_stop = 0.05;
  const auto h = evolve(cylinder(2, 1.0, 21), c);
  EXPECT_TRUE(h.uniform);
  EXPECT_EQ(h.stop_reason, StopReason::neck_threshold);
  for (const auto& s : h.stats)
    if (s.u_min >= 0.1) {
      EXPECT_NEAR(s.u_min * s.u_min, 1 - 2 * s.t, 1e-4 * (1 - 2 * s.t));
    }
  ASSERT_TRUE(h.pinch_estimate);
  EXPECT_NEAR(h.pinch_estimate->T, 0.5, 1e-3);
  EXPECT_NEAR(h.pinch_estimate->slope, -2.0, 0.02);
}

TEST(Evolve, SphereExtinction) {
  SolverConfig c;
  c.u_stop = 0.01;
  const auto h = evolve(harness::sphere_profile(2, 1.0, 101), c);
  EXPECT_EQ(h.stop_reason, StopReason::extinction);
  EXPECT_NEAR(h.last_time(), 0.25, 1e-3);
  ASSERT_TRUE(h.pinch_estimate);
  EXPECT_NEAR(h.pinch_estimate->T, 0.25, 1e-3);
}

TEST(Evolve, SphereExtinctionConverges) {
  // error in the extrapolated extinction time under grid refinement
  std::vector<double> err;
  for (std::size_t m : {25u, 50u, 100u}) {
    SolverConfig c;
    c.u_stop = 0.01;
    c.adaptive = false;
    const auto h = evolve(harness::sphere_profile(2, 1.0, m), c);
    ASSERT_TRUE(h.pinch_estimate);
    err.push_back(std::abs(h.pinch_estimate->T - 0.25));
  }
  EXPECT_GE(std::log2(err[0] / err[1]), 1.5);
  EXPECT_GE(std::log2(err[1] / err[2]), 1.5);
}

TEST(Evolve, SymmetricDumbbellPinchesAtTheCentre) {
  SolverConfig c;
  c.u_stop = 1e-2;
  const auto h = evolve(dumbbell(101), c);
  EXPECT_EQ(h.stop_reason, StopReason::neck_threshold);
  ASSERT_TRUE(h.pinch_estimate);
  EXPECT_NEAR(h.pinch_estimate->x0, 0.0, 1e-9);
  const auto& g = h.snapshots.back();
  // even to round-off
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(g.x[i], -g.x[g.size() - 1 - i], 1e-12);
    EXPECT_NEAR(g.radius[i], g.radius[g.size() - 1 - i], 1e-12 * g.radius[i] + 1e-15);
  }
  EXPECT_GT(g.radius.front(), 0.3);
  EXPECT_GT(g.radius.back(), 0.3);
}

TEST(Evolve, SnapshotsOrdered) {
  SolverConfig c;
  c.u_stop = 0.05;
  const auto h = evolve(dumbbell(61), c);
  for (std::size_t i = 1; i < h.snapshots.size(); ++i)
    EXPECT_GT(h.snapshots[i].time, h.snapshots[i - 1].time);
  for (const auto& g : h.snapshots)
    EXPECT_NO_THROW(validate(g));
}

TEST(Evolve, MaxStepsIsReported) {
  SolverConfig c;
  c.max_steps = 10;
  const auto h = evolve(dumbbell(61), c);
  EXPECT_EQ(h.stop_reason, StopReason::max_steps);
}

// ---------------------------------------------------------------------------

TEST(Remesh, UniformCylinderUnchanged) {
  const auto g = cylinder(2, 1.0);
  const auto r = remesh(g, SolverConfig{});
  EXPECT_EQ(r.x, g.x);
  EXPECT_EQ(r.radius, g.radius);
}

TEST(Remesh, NeckResolvedAtRelativeScale) {
  // a neck of radius 1e-2 in an otherwise coarse grid
  const double w = 1e-2;
  const auto x = uniform(-1, 1, 41);
  std::vector<double> u;
  for (double v : x)
    u.push_back(std::sqrt(w * w + v * v));
  SolverConfig c;
  const auto r = remesh(ProfileGrid::neumann(2, x, u), c);
  for (std::size_t i = 1; i < r.size(); ++i) {
    const double mid = 0.5 * (r.x[i] + r.x[i - 1]);
    if (std::abs(mid) < 2 * w) {
      EXPECT_LE(r.x[i] - r.x[i - 1], c.remesh_ratio * w * (1 + 1e-9));
    }
  }
  // old nodes keep their values exactly
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto it = std::find(r.x.begin(), r.x.end(), x[i]);
    if (it != r.x.end()) {
      EXPECT_EQ(r.radius[static_cast<std::size_t>(it - r.x.begin())], u[i]);
    }
  }
}

TEST(Remesh, RefineThenCoarsenIsThirdOrder) {
  // compatible with the mirror planes at the ends
  auto exact = [](double x) { return 1.0 + 0.3 * std::cos(M_PI * x) + 0.2 * x * std::pow(std::sin(M_PI * x), 2); };
  // coarser grids are still in the limiter's pre-asymptotic range
  std::vector<double> err, back;
  for (std::size_t m : {81u, 161u, 321u}) {
    const auto x = uniform(-1, 1, m);
    std::vector<double> u;
    for (double v : x)
      u.push_back(exact(v));
    const double h = x[1] - x[0];
    SolverConfig fine;
    fine.max_spacing = 0.25 * h;
    const auto r = remesh(ProfileGrid::neumann(2, x, u), fine);
    ASSERT_GT(r.size(), 3 * m);
    double e = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i)
      e = std::max(e, std::abs(r.radius[i] - exact(r.x[i])));
    err.push_back(e);
    SolverConfig coarse;
    coarse.max_spacing = h;
    const auto c = remesh(r, coarse);
    ASSERT_LT(c.size(), r.size());
    double b = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
      b = std::max(b, std::abs(c.radius[i] - exact(c.x[i])));
    back.push_back(b);
  }
  for (std::size_t k = 0; k + 1 < err.size(); ++k) {
    EXPECT_GE(std::log2(err[k] / err[k + 1]), 2.5);
    EXPECT_LE(back[k], 2.0 * err[k]);
    EXPECT_LT(err[k], 50.0 * std::pow(2.0 / (k == 0 ? 80.0 : 160.0), 3));
  }
}

TEST(Remesh, CoarsensOverResolvedGrid) {
  const auto g = cylinder(2, 1.0, 41);
  auto fine = ProfileGrid::neumann(2, uniform(-1, 1, 401), std::vector<double>(401, 1.0));
  SolverConfig c;
  c.max_spacing = 0.05;
  // uniform profiles are left alone; a gentle bump is coarsened
  for (std::size_t i = 0; i < fine.size(); ++i)
    fine.radius[i] = 1.0 + 0.01 * std::cos(M_PI * fine.x[i]);
  const auto r = remesh(fine, c);
  EXPECT_LT(r.size(), fine.size());
  EXPECT_EQ(r.x.front(), -1.0);
  EXPECT_EQ(r.x.back(), 1.0);
  (void)g;
}

// ---------------------------------------------------------------------------

namespace {

FlowHistory synthetic(const std::vector<double>& t, const std::vector<double>& u2, int n = 2) {
  FlowHistory h;
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto g = ProfileGrid::neumann(n, uniform(-1, 1, 5), std::vector<double>(5, std::sqrt(u2[i])), t[i]);
    h.snapshots.push_back(g);
    h.stats.push_back({t[i], std::sqrt(u2[i]), 0.25, 0.0, 0.0, 5});
  }
  h.reference_radius = std::sqrt(u2.front());
  return h;
}

} // namespace

TEST(EstimatePinch, ExactCylinderData) {
  std::vector<double> t, u2;
  for (double q = 1.0; q > 1e-7; q *= 0.8) {
    t.push_back(0.5 * (1 - q));
    u2.push_back(q);
  }
  const auto p = estimate_pinch(synthetic(t, u2));
  EXPECT_NEAR(p.T, 0.5, 1e-12);
  EXPECT_NEAR(p.slope, -2.0, 1e-9);
  EXPECT_FALSE(p.slope_flag);
  EXPECT_FALSE(p.residual_flag);
  EXPECT_DOUBLE_EQ(p.x0, 0.25);
}

TEST(EstimatePinch, SphereSlopeIsFlagged) {
  std::vector<double> t, u2;
  for (double q = 1.0; q > 1e-6; q *= 0.8) {
    t.push_back(0.25 * (1 - q));
    u2.push_back(q);
  }
  const auto p = estimate_pinch(synthetic(t, u2));
  EXPECT_NEAR(p.slope, -4.0, 1e-9);
  EXPECT_NEAR(p.T, 0.25, 1e-12);
  EXPECT_TRUE(p.slope_flag);
}

TEST(EstimatePinch, Errors) {
  std::vector<double> t, u2;
  for (int i = 0; i < 5; ++i) {
    t.push_back(0.1 * i);
    u2.push_back(1.0 - 0.2 * i);
  }
  EXPECT_THROW(estimate_pinch(synthetic(t, u2)), InsufficientData);  // too few low samples
  t.clear();
  u2.clear();
  for (int i = 0; i < 30; ++i) {
    t.push_back(0.01 * i);
    u2.push_back(i < 15 ? 1.0 - 0.066 * i : 0.001 + 0.0001 * (i % 2));
  }
  EXPECT_THROW(estimate_pinch(synthetic(t, u2)), InsufficientData);  // not monotone
}

// ---------------------------------------------------------------------------

TEST(Avoidance, EnclosingCylinder) {
  const auto h = neckpinch::testing::exact_cylinder(2, 1.0, 1.0, 41, neckpinch::testing::geometric_times(0.5, 0.8, 30));
  Barrier b;
  b.kind = Barrier::Kind::cylinder;
  b.radius = 1.5;
  b.encloses = true;
  const auto r = avoidance_check(h, b);
  EXPECT_TRUE(r.ok);
  EXPECT_FALSE(r.precondition_violated);
  // radii squared both fall at slope -2: the squared gap stays 1.25
  for (const auto& g : h.snapshots) {
    const double gap2 = barrier_radius_squared(b, 2, g.time) - g.radius[0] * g.radius[0];
    EXPECT_NEAR(gap2, 1.25, 1e-12);
  }
}

TEST(Avoidance, TangentStartIsFlagged) {
  const auto h = neckpinch::testing::exact_cylinder(2, 1.0, 1.0, 41, {0.0, 0.1});
  Barrier b;
  b.kind = Barrier::Kind::cylinder;
  b.radius = 1.0;
  b.encloses = true;
  const auto r = avoidance_check(h, b);
  EXPECT_TRUE(r.precondition_violated);
  EXPECT_FALSE(r.ok);
}

TEST(Avoidance, SphereInsideDumbbellLobe) {
  SolverConfig c;
  c.u_stop = 0.05;
  const auto h = evolve(dumbbell(81), c);
  Barrier b;
  b.kind = Barrier::Kind::sphere;
  b.radius = 0.2;
  b.center = 0.8;
  const auto r = avoidance_check(h, b);
  EXPECT_FALSE(r.precondition_violated);
  EXPECT_TRUE(r.ok);
  EXPECT_GT(r.slices, 3u);
}
