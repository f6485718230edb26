#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "support.hpp"

using namespace neckpinch;
using neckpinch::testing::cylinder_T;
using neckpinch::testing::exact_cylinder;
using neckpinch::testing::exact_sphere;
using neckpinch::testing::geometric_times;
using neckpinch::testing::uniform;

namespace {

TypeISeries synthetic_series(double T, const std::vector<double>& times, double (*ratio)(double)) {
  TypeISeries s;
  s.T = T;
  double sup = 0.0;
  for (double t : times) {
    s.times.push_back(t);
    s.ratios.push_back(ratio(T - t));
    sup = std::max(sup, s.ratios.back());
    s.running_sup.push_back(sup);
  }
  return s;
}

double log_growth(double gap) { return 0.5 * std::log(1.0 / gap); }
double half(double) { return 0.5; }

const FlowHistory& coarse_dumbbell() {
  static const FlowHistory h = [] {
    SolverConfig c;
    c.u_stop = 0.02;
    return evolve(harness::dumbbell_profile(2, 0.4, 81), c);
  }();
  return h;
}

} // namespace

TEST(TypeOneSeries, CylinderIsOneHalf) {
  for (int n : {2, 3, 4}) {
    const double T = cylinder_T(n, 1.0);
    const auto h = exact_cylinder(n, 1.0, 1.0, 41, geometric_times(T, 0.8, 60));
    for (double delta : {infinity, 0.3}) {
      const auto s = type_one_series(h, T, 0.0, 10.0, delta);
      ASSERT_FALSE(s.ratios.empty());
      for (std::size_t i = 0; i < s.ratios.size(); ++i) {
        // T - t loses digits as t -> T
        const double tol = 1e-12 + 1e-15 * T / (T - s.times[i]);
        EXPECT_NEAR(s.ratios[i], 0.5, tol) << "n " << n;
        EXPECT_NEAR(s.running_sup[i], 0.5, tol);
        EXPECT_LT(T - s.times[i], delta * delta);
      }
    }
  }
}

TEST(TypeOneSeries, SphereIsOneHalf) {
  for (int n : {2, 3}) {
    const double T = 1.0 / (2.0 * n);
    const auto h = exact_sphere(n, 1.0, 401, geometric_times(T, 0.8, 40));
    const auto s = type_one_series(h, T, 0.0);
    for (double r : s.ratios)
      EXPECT_NEAR(r, 0.5, 0.01) << "n " << n;
  }
}

TEST(TypeOneSeries, Errors) {
  const auto h = exact_cylinder(2, 1.0, 1.0, 41, {0.1, 0.2});
  EXPECT_THROW(type_one_series(h, 0.05, 0.0), InsufficientData);  // every slice at or after T
  EXPECT_THROW(type_one_series(h, 0.5, 0.0, 0.0), PreconditionError);
  EXPECT_THROW(type_one_series(h, 0.5, 0.0, 10.0, 0.0), PreconditionError);
  // window away from every node
  EXPECT_THROW(type_one_series(h, 0.5, 50.0), InsufficientData);
}

// ---------------------------------------------------------------------------

TEST(ClassifyType, CylinderAndSphereAreTypeOne) {
  const auto cyl = exact_cylinder(2, 1.0, 1.0, 41, geometric_times(0.5, 0.8, 60));
  const auto sph = exact_sphere(2, 1.0, 401, geometric_times(0.25, 0.8, 40));
  for (double threshold : {4.5, 5.0, 5.5}) {
    const auto a = classify_type(type_one_series(cyl, 0.5, 0.0), threshold);
    EXPECT_EQ(a.type, TypeClass::TypeI) << a.note;
    EXPECT_NEAR(a.final_sup, 0.5, 1e-12);
    EXPECT_NEAR(a.trend, 0.0, 1e-9);
    const auto b = classify_type(type_one_series(sph, 0.25, 0.0), threshold);
    EXPECT_EQ(b.type, TypeClass::TypeI) << b.note;
  }
}

TEST(ClassifyType, LogarithmicGrowthIsTypeTwoCandidate) {
  const auto s = synthetic_series(1.0, geometric_times(1.0, 0.7, 60), log_growth);
  for (double threshold : {4.5, 5.0, 5.5}) {
    const auto c = classify_type(s, threshold);
    EXPECT_EQ(c.type, TypeClass::TypeII_candidate);
    EXPECT_GT(c.running_sup, threshold);
    EXPECT_GT(c.trend, 0.0);
  }
  // below threshold the growth alone decides
  const auto early = synthetic_series(1.0, geometric_times(1.0, 0.7, 20), log_growth);
  EXPECT_LT(early.running_sup.back(), 5.0);
  EXPECT_EQ(classify_type(early).type, TypeClass::TypeII_candidate);
}

TEST(ClassifyType, UndeterminedWhenTheSeriesStopsEarly) {
  const auto s = synthetic_series(1.0, {0.0, 0.5, 0.9}, half);
  const auto c = classify_type(s);
  EXPECT_EQ(c.type, TypeClass::undetermined);
  EXPECT_FALSE(c.note.empty());
  const auto few = synthetic_series(1.0, {0.0, 0.5, 0.9, 0.995}, half);
  EXPECT_EQ(classify_type(few).type, TypeClass::undetermined);
  EXPECT_EQ(classify_type(TypeISeries{}).type, TypeClass::undetermined);
}

// ---------------------------------------------------------------------------

TEST(CurvatureLowerBound, CylinderAxis) {
  // R on the axis is the radius U: (T - t)/U^2 = 1/(2(n-1))
  for (int n : {2, 3}) {
    const double T = cylinder_T(n, 1.0);
    const auto h = exact_cylinder(n, 1.0, 2.0, 201, geometric_times(T, 0.85, 50));
    std::vector<SpacetimePoint> xs;
    for (std::size_t j = 5; j < h.snapshots.size(); j += 4)
      xs.push_back({0.0, 0.0, h.snapshots[j].time});
    for (double eta : {0.0, 1.0, 10.0}) {
      const auto r = lemma26_check(h, curvature_history(h), T, 0.0, eta, xs);
      EXPECT_NEAR(r.eps0, 1.0 / (2.0 * (n - 1)), 0.05 / (2.0 * (n - 1))) << "n " << n;
      EXPECT_EQ(r.used, xs.size());
      EXPECT_EQ(r.dropped, 0u);
    }
  }
}

TEST(CurvatureLowerBound, OffCentreSamplesOnlyIncreaseTheProduct) {
  const double T = 0.5;
  const auto h = exact_cylinder(2, 1.0, 2.0, 201, geometric_times(T, 0.85, 50));
  const double t = h.snapshots[20].time;
  const auto centre = lemma26_check(h, curvature_history(h), T, 0.0, 1.0, {{0.0, 0.0, t}});
  const auto off = lemma26_check(h, curvature_history(h), T, 0.0, 1.0, {{0.3, 0.0, t}});
  EXPECT_GT(off.eps0, centre.eps0);
}

TEST(CurvatureLowerBound, RejectsTheSingularPoint) {
  const double T = 0.5;
  const auto h = exact_cylinder(2, 1.0, 2.0, 201, geometric_times(T, 0.85, 50));
  EXPECT_THROW(lemma26_check(h, curvature_history(h), T, 0.0, 1.0, {{0.0, 0.0, T}}), PreconditionError);
  // a sample before the history is dropped, not fatal
  const auto r = lemma26_check(h, curvature_history(h), T, 0.0, 1.0, {{0.0, 0.0, -1.0}, {0.0, 0.0, 0.3}});
  EXPECT_EQ(r.dropped, 1u);
  EXPECT_EQ(r.used, 1u);
  EXPECT_THROW(lemma26_check(h, curvature_history(h), T, 0.0, 1.0, {{0.0, 0.0, -1.0}}), InsufficientData);
}

TEST(CurvatureLowerBound, SamplesStayInTheParabolicWindow) {
  const double T = 0.5;
  const auto times = geometric_times(T, 0.85, 50);
  const auto h = exact_cylinder(2, 1.0, 2.0, 201, times);
  const auto xs = lemma26_samples(h, T, 0.1, 200, 2.0, 6.0, 2.0);
  ASSERT_EQ(xs.size(), 200u);
  const double half_step = -0.5 * std::log(0.85) + 1e-9;  // snapping moves tau by at most this
  for (const auto& X : xs) {
    const double s = std::sqrt(T - X.t);
    EXPECT_LT(X.t, T);
    EXPECT_NE(std::find(times.begin(), times.end(), X.t), times.end());
    EXPECT_GE(-std::log(T - X.t), 2.0 - half_step);
    EXPECT_LE(-std::log(T - X.t), 6.0 + half_step);
    EXPECT_LE(std::abs(X.x - 0.1), 2.0 * s + 1e-12);
    EXPECT_NEAR(X.r, std::sqrt(1.0 - 2.0 * X.t), 1e-12);
  }
}

TEST(CurvatureLowerBound, NearestSlice) {
  const auto h = exact_cylinder(2, 1.0, 1.0, 11, {0.0, 0.1, 0.2, 0.4});
  EXPECT_EQ(nearest_slice_time(h, 0.04, 0.5), 0.0);
  EXPECT_EQ(nearest_slice_time(h, 0.06, 0.5), 0.1);
  EXPECT_EQ(nearest_slice_time(h, -1.0, 0.5), 0.0);
  EXPECT_EQ(nearest_slice_time(h, 0.35, 0.5), 0.4);
  EXPECT_EQ(nearest_slice_time(h, 0.9, 0.5), 0.4);
  // slices at or after T never qualify
  EXPECT_EQ(nearest_slice_time(h, 0.35, 0.4), 0.2);
  EXPECT_THROW(nearest_slice_time(h, 0.0, 0.0), InsufficientData);
}

// ---------------------------------------------------------------------------

TEST(Disconnection, ConeFailsTheTrend) {
  // U = 0.3|x|; U^2 is a parabola, so the interpolant is exact and U/|x| = 0.3 at every scale
  const auto x = uniform(-1, 1, 200);
  std::vector<double> u;
  for (double v : x)
    u.push_back(0.3 * std::abs(v));
  const auto r = disconnection_check(ProfileGrid::neumann(2, x, u), 0.0, 0.5, 1e-3, 0.03);
  ASSERT_GE(r.ratios.size(), 4u);
  for (double q : r.ratios)
    EXPECT_NEAR(q, 0.3, 1e-12);
  EXPECT_FALSE(r.trend_ok);
  EXPECT_TRUE(r.disconnects);
}

TEST(Disconnection, LinearlyBoundedProfilesFailTheTrend) {
  // U >= c|x| with U/|x| still decreasing toward c: not o(|x|)
  const auto x = uniform(-1, 1, 4000);
  for (double p : {1.5, 2.0, 3.0}) {
    for (double c : {0.05, 0.3}) {
      std::vector<double> u;
      for (double v : x)
        u.push_back(c * std::abs(v) + 0.5 * std::pow(std::abs(v), p));
      const auto r = disconnection_check(ProfileGrid::neumann(2, x, u), 0.0, 0.5, 1e-3, 4e-3);
      EXPECT_FALSE(r.trend_ok) << "p " << p << " c " << c << " decrement ratio " << r.decrement_ratio;
    }
  }
}

TEST(Disconnection, SublinearProfilePasses) {
  // U = |x| / sqrt(log(1/|x|)) on |x| <= 0.5
  const auto x = uniform(-0.5, 0.5, 4000);
  std::vector<double> u;
  for (double v : x)
    u.push_back(std::abs(v) / std::sqrt(std::log(1.0 / std::abs(v))));
  const auto r = disconnection_check(ProfileGrid::neumann(2, x, u), 0.0, 0.3, 1e-3, 2e-3);
  EXPECT_TRUE(r.trend_ok) << r.decrement_ratio;
  EXPECT_TRUE(r.disconnects);
  EXPECT_GE(r.decreasing_run, 3u);
}

TEST(Disconnection, SideLoss) {
  // right side thinner than the survival threshold at r_diag
  const auto x = uniform(-1, 1, 201);
  std::vector<double> u;
  for (double v : x)
    u.push_back(v < 0 ? 0.3 * std::abs(v) + 1e-4 : 1e-4 + 1e-3 * v);
  const auto r = disconnection_check(ProfileGrid::neumann(2, x, u), 0.0, 0.5, 0.01, 0.01);
  EXPECT_FALSE(r.disconnects);
  EXPECT_GT(r.left_radius, 0.1);
  EXPECT_LT(r.right_radius, 0.01);
}

TEST(Disconnection, NotApplicableToExtinction) {
  const auto h = exact_sphere(2, 1.0, 101, geometric_times(0.25, 0.8, 10));
  SingularityReport rep;
  rep.kind = SingularityKind::extinction;
  const auto r = disconnection_check(h, rep, 0.3, 1e-3);
  EXPECT_FALSE(r.applicable);
  EXPECT_FALSE(r.disconnects);
  EXPECT_NE(r.note.find("not applicable"), std::string::npos);
}

TEST(Disconnection, SymmetricDumbbell) {
  const auto& h = coarse_dumbbell();
  ASSERT_TRUE(h.pinch_estimate);
  SingularityReport rep;
  rep.kind = SingularityKind::neckpinch;
  rep.T = h.pinch_estimate->T;
  rep.x0 = h.pinch_estimate->x0;
  const auto r = disconnection_check(h, rep, 0.3, 10 * 0.02 * h.reference_radius);
  EXPECT_TRUE(r.disconnects);
  EXPECT_GT(r.left_radius, 0.1);
  EXPECT_NEAR(r.left_radius, r.right_radius, 1e-9);
}

// ---------------------------------------------------------------------------

TEST(NeighborhoodConstants, CylinderNThree) {
  const double T = cylinder_T(3, 1.0);
  const auto h = exact_cylinder(3, 1.0, 1.0, 81, geometric_times(T, 0.8, 30));
  NeighborhoodWindow w;
  w.t_from = 0.0;
  w.t_to = T;
  const auto c = neighborhood_constants(h, curvature_history(h), w);
  EXPECT_TRUE(c.mean_convex);
  EXPECT_NEAR(c.eta_2cvx, 0.5, 0.01);
  EXPECT_NEAR(c.alpha_min, 2.0, 0.04);
  EXPECT_NEAR(c.eta_H, 2.0, 1e-9);  // H = 2/U, smallest on the first slice
  EXPECT_EQ(c.slices, w.max_slices);
}

TEST(NeighborhoodConstants, SphereNTwo) {
  const auto h = exact_sphere(2, 1.0, 401, geometric_times(0.25, 0.8, 20));
  NeighborhoodWindow w;
  w.t_from = 0.0;
  w.t_to = 0.25;
  const auto c = neighborhood_constants(h, curvature_history(h), w);
  EXPECT_NEAR(c.eta_2cvx, 1.0, 0.02);
  EXPECT_NEAR(c.alpha_min, 2.0, 0.04);
}

TEST(NeighborhoodConstants, NegativeMeanCurvatureSkipsTheRest) {
  const auto x = uniform(-1, 1, 81);
  std::vector<double> u;
  for (double v : x)
    u.push_back(1.0 + 5.0 * v * v);
  FlowHistory h;
  h.snapshots.push_back(ProfileGrid::neumann(2, x, u));
  NeighborhoodWindow w;
  const auto c = neighborhood_constants(h, curvature_history(h), w);
  EXPECT_FALSE(c.mean_convex);
  EXPECT_LE(c.eta_H, 0.0);
  EXPECT_TRUE(std::isnan(c.eta_2cvx));
  EXPECT_TRUE(std::isnan(c.alpha_min));
  w.t_from = 1.0;
  w.t_to = 2.0;
  EXPECT_THROW(neighborhood_constants(h, curvature_history(h), w), InsufficientData);
}

// ---------------------------------------------------------------------------

TEST(ScaleInvariance, DimensionlessOutputs) {
  const auto& h = coarse_dumbbell();
  ASSERT_TRUE(h.pinch_estimate);
  const double T = h.pinch_estimate->T;
  const double x0 = h.pinch_estimate->x0;
  ASSERT_GT(T, h.last_time());
  const auto xs = lemma26_samples(h, T, x0, 40, 1.0 - std::log(T - h.first_time()), -std::log(T - h.last_time()), 2.0);
  for (double l : {0.25, 4.0}) {
    const auto hd = neckpinch::testing::dilate(h, l);
    const auto a = type_one_series(h, T, x0);
    const auto b = type_one_series(hd, l * l * T, l * x0);
    ASSERT_EQ(a.ratios.size(), b.ratios.size());
    for (std::size_t i = 0; i < a.ratios.size(); ++i)
      EXPECT_NEAR(a.ratios[i], b.ratios[i], 1e-10 * a.ratios[i]);

    NeighborhoodWindow w;
    w.x0 = x0;
    w.t_from = h.first_time();
    w.t_to = h.last_time();
    NeighborhoodWindow wd = w;
    wd.x0 *= l;
    wd.half_width *= l;
    wd.t_from *= l * l;
    wd.t_to *= l * l;
    const auto c = neighborhood_constants(h, curvature_history(h), w);
    const auto cd = neighborhood_constants(hd, curvature_history(hd), wd);
    EXPECT_NEAR(c.eta_2cvx, cd.eta_2cvx, 1e-10);
    EXPECT_NEAR(c.alpha_min, cd.alpha_min, 1e-9);
    EXPECT_NEAR(c.eta_H, l * cd.eta_H, 1e-9 * c.eta_H);

    std::vector<SpacetimePoint> xd;
    for (const auto& X : xs)
      xd.push_back({l * X.x, l * X.r, l * l * X.t});
    const auto e = lemma26_check(h, curvature_history(h), T, x0, 1.0, xs);
    const auto ed = lemma26_check(hd, curvature_history(hd), l * l * T, l * x0, 1.0, xd);
    EXPECT_EQ(e.used, ed.used);
    EXPECT_NEAR(e.eps0, ed.eps0, 1e-8 * e.eps0);
  }
}
