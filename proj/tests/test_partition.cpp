#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "patchy/atlas.hpp"
#include "support/problems.hpp"

using namespace patchy;

namespace {

Vec point(double a, double b) { return (Vec(2) << a, b).finished(); }

/// 1/2 x^T M x as a CoeffSet centered at 0.
CoeffSet quadratic(double m11, double m12, double m22) {
  CoeffSet c(2, 2, Vec::Zero(2));
  c[2].at({0, 0}) = m11;
  c[2].at({0, 1}) = m12;
  c[2].at({1, 1}) = m22;
  return c;
}

Mat lqr_riccati() {
  Mat p(2, 2);
  p << std::sqrt(3.0), 1.0, 1.0, std::sqrt(3.0);
  return p;
}

AtlasOptions reproduction_options() {
  AtlasOptions o;
  o.degree = 3;
  o.h = 0.54;
  o.rings = 4;
  o.growth = "list";
  o.ring_points = {8, 16, 16, 32};
  return o;
}

const Atlas& reproduction_atlas() {
  static const HuntKrenerProblem hk;
  static const Atlas atlas = build_atlas(hk, reproduction_options());
  return atlas;
}

}  // namespace

// ---------------------------------------------------------------------------
// level curves
// ---------------------------------------------------------------------------

TEST(LevelCurve, LqrEllipse) {
  const Mat p = lqr_riccati();
  const CoeffSet cost = quadratic(p(0, 0), p(0, 1), p(1, 1));
  TraceOptions opt;
  opt.step = 0.02;
  const Polyline curve = trace_level_curve(cost, 0.5, point(1.0, 0.0), opt);
  ASSERT_GT(curve.size(), 50u);
  for (const Vec& x : curve) EXPECT_NEAR(x.dot(p * x), 1.0, 1e-10);
  EXPECT_GT(signed_area(curve), 0.0);
  EXPECT_LE((curve.back() - curve.front()).norm(), opt.step * 1.01);
  // area of x^T P x <= 1 is pi / sqrt(det P)
  EXPECT_NEAR(signed_area(curve), std::numbers::pi / std::sqrt(p.determinant()), 1e-3);
}

TEST(LevelCurve, CircleCircumference) {
  TraceOptions opt;
  opt.step = 1e-3;
  const Polyline curve = trace_level_curve(quadratic(1, 0, 1), 0.5, point(0.3, 0.4), opt);
  EXPECT_NEAR(polyline_length(curve), 2 * std::numbers::pi, 1e-6);
}

TEST(LevelCurve, AlbrekhtBoundaryResidual) {
  const HuntKrenerProblem hk;
  const AlbrekhtSolution sol = albrekht_expand(hk, 4);
  const double c0 = level_within_radius(sol.cost, 0.25);
  TraceOptions opt;
  opt.step = 0.54 / 8;
  const Polyline curve = trace_level_curve(sol.cost, c0, point(0.25, 0.0), opt);
  for (const Vec& x : curve) EXPECT_LT(std::abs(poly_eval(sol.cost, x) - c0), 1e-10);
  EXPECT_GT(signed_area(curve), 0.0);
}

TEST(LevelCurve, Failures) {
  const CoeffSet circle = quadratic(1, 0, 1);
  EXPECT_THROW(project_to_level(circle, 0.5, Vec::Zero(2)), Error);
  TraceOptions opt;
  opt.step = 0.05;
  opt.inside = [](const Vec& x) { return x(0) < 0.5; };
  try {
    trace_level_curve(circle, 0.5, point(0.0, 1.0), opt);
    FAIL() << "expected the curve to leave the region";
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), "trace");
  }
  EXPECT_THROW(trace_level_curve(CoeffSet(3, 2, Vec::Zero(3)), 1.0, Vec::Zero(3)), Error);
}

TEST(LevelCurve, SolveAlongLine) {
  const CoeffSet circle = quadratic(1, 0, 1);
  EXPECT_NEAR(solve_along_line(circle, 0.5, Vec::Zero(2), point(0.6, 0.8), 3.0), 1.0, 1e-14);
  EXPECT_THROW(solve_along_line(circle, 0.5, Vec::Zero(2), point(0.6, 0.8), 0.5), Error);
}

// ---------------------------------------------------------------------------
// placement
// ---------------------------------------------------------------------------

TEST(Placement, UnitCircle) {
  TraceOptions opt;
  opt.step = 1e-3;
  const Polyline circle = trace_level_curve(quadratic(1, 0, 1), 0.5, point(1.0, 0.0), opt);
  const Polyline pts = place_patch_points(circle, std::numbers::pi / 4);
  ASSERT_EQ(pts.size(), 8u);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_NEAR(pts[i].norm(), 1.0, 1e-6);
    EXPECT_LT((pts[(i + 1) % pts.size()] - pts[i]).norm(), std::numbers::pi / 4);
  }
  EXPECT_EQ(place_patch_points(circle, 10.0).size(), 4u);
  EXPECT_THROW(place_patch_points(circle, 0.0), Error);
}

TEST(Placement, SpacingBoundOnAnEllipse) {
  TraceOptions opt;
  opt.step = 0.01;
  const Polyline curve = trace_level_curve(quadratic(4, 0, 0.25), 0.5, point(0.5, 0.0), opt);
  for (double h : {1.0, 0.5, 0.3, 0.1}) {
    const Polyline pts = place_patch_points(curve, h);
    EXPECT_GE(pts.size(), 4u);
    for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_LE((pts[(i + 1) % pts.size()] - pts[i]).norm(), h);
  }
}

// ---------------------------------------------------------------------------
// rings
// ---------------------------------------------------------------------------

TEST(Ring, FirstRingOnTestProblem) {
  const HuntKrenerProblem hk;
  AtlasOptions o;
  o.rings = 1;
  o.initial_points = 8;
  const Atlas atlas = build_atlas(hk, o);
  ASSERT_EQ(atlas.rings.size(), 1u);
  EXPECT_EQ(atlas.rings[0].patch_ids.size(), 8u);
  EXPECT_EQ(atlas.patches.size(), 9u);
  for (int id : atlas.rings[0].patch_ids) {
    const PatchSolution& s = atlas.patch(id).sol;
    EXPECT_EQ(s.parent, 0);
    const CoeffBlock g = poly_partials(s.cost, s.point, 1);
    EXPECT_LT(g.values[0] * s.direction(0) + g.values[1] * s.direction(1), 0.0);
  }
}

TEST(Ring, LqrPatchesAreExact) {
  const auto lqr = LqrProblem::double_integrator();
  AtlasOptions o;
  o.rings = 3;
  const Atlas atlas = build_atlas(*lqr, o);
  ASSERT_EQ(atlas.rings.size(), 3u);
  const Mat p = lqr_riccati();
  for (const AtlasPatch& patch : atlas.patches) {
    const Vec& x = patch.sol.point;
    const Vec px = p * x;
    const CoeffSet& c = patch.sol.cost;
    EXPECT_NEAR(c[0].values[0], 0.5 * x.dot(px), 1e-10);
    EXPECT_NEAR(c[1].values[0], px(0), 1e-10);
    EXPECT_NEAR(c[1].values[1], px(1), 1e-10);
    EXPECT_NEAR(c[2].at({0, 0}), p(0, 0), 1e-10);
    EXPECT_NEAR(c[2].at({0, 1}), p(0, 1), 1e-10);
    EXPECT_NEAR(c[2].at({1, 1}), p(1, 1), 1e-10);
    for (int k = 3; k <= c.max_order(); ++k) {
      for (double v : c[k].values) EXPECT_NEAR(v, 0.0, 1e-10);
    }
    // kappa = -x2 component of P x
    EXPECT_NEAR(patch.sol.control[0].values[0], -px(1), 1e-10);
  }
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 500; ++t) {
    const Vec x = point(u(rng), u(rng));
    if (const auto v = evaluate(atlas, x)) {
      EXPECT_NEAR(v->first, 0.5 * x.dot(p * x), 1e-10);
      EXPECT_NEAR(v->second, -(p * x)(1), 1e-10);
    }
  }
}

TEST(Ring, GrowthRules) {
  const auto lqr = LqrProblem::double_integrator();
  AtlasOptions o;
  o.rings = 3;
  const Atlas doubled = build_atlas(*lqr, o);
  EXPECT_EQ(doubled.rings[0].patch_ids.size(), 8u);
  EXPECT_EQ(doubled.rings[1].patch_ids.size(), 16u);
  EXPECT_EQ(doubled.rings[2].patch_ids.size(), 32u);

  o.growth = "list";
  o.ring_points = {6, 10};
  const Atlas listed = build_atlas(*lqr, o);
  EXPECT_EQ(listed.rings[0].patch_ids.size(), 6u);
  EXPECT_EQ(listed.rings[1].patch_ids.size(), 10u);
  EXPECT_EQ(listed.rings[2].patch_ids.size(), 20u);

  o.growth = "arclength";
  const Atlas arc = build_atlas(*lqr, o);
  for (std::size_t k = 0; k < arc.rings.size(); ++k) {
    const Polyline& inner = k == 0 ? arc.albrekht_boundary : arc.rings[k - 1].boundary;
    EXPECT_EQ(static_cast<int>(arc.rings[k].patch_ids.size()), point_count_for_spacing(polyline_length(inner), o.h));
  }

  o.growth = "fibonacci";
  try {
    build_atlas(*lqr, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), "config");
  }
}

TEST(Ring, ShippedScheduleHas73Patches) {
  EXPECT_EQ(reproduction_atlas().patches.size(), 73u);
}

TEST(Ring, LevelsIncreaseAndPointsShareALevelCurve) {
  const Atlas& atlas = reproduction_atlas();
  double prev = atlas.c0;
  for (const Ring& ring : atlas.rings) {
    EXPECT_GT(ring.level, prev);
    EXPECT_DOUBLE_EQ(ring.inner_level, prev);
    for (int id : ring.patch_ids) {
      const AtlasPatch& p = atlas.patch(id);
      EXPECT_LT(std::abs(poly_eval(atlas.cost(p.sol.parent), p.sol.point) - prev), 1e-10);
      EXPECT_DOUBLE_EQ(p.geom.c_in, prev);
      EXPECT_DOUBLE_EQ(p.geom.c_out, ring.level);
    }
    prev = ring.level;
  }
}

TEST(Ring, ParentChainsAndDistances) {
  const Atlas& atlas = reproduction_atlas();
  for (const AtlasPatch& p : atlas.patches) {
    if (p.id == 0) continue;
    const AtlasPatch& parent = atlas.patch(p.sol.parent);
    EXPECT_EQ(parent.geom.ring, p.geom.ring - 1);
    EXPECT_LE((p.sol.point - parent.sol.point).norm(), atlas.options.h);
    int cur = p.id, steps = 0;
    while (cur != 0 && steps++ < 10) cur = atlas.patch(cur).sol.parent;
    EXPECT_EQ(cur, 0);
  }
}

TEST(Ring, LateralRays) {
  const HuntKrenerProblem hk;
  const Atlas& atlas = reproduction_atlas();
  for (const Ring& ring : atlas.rings) {
    ASSERT_EQ(ring.rays.size(), ring.patch_ids.size());
    for (std::size_t j = 0; j < ring.rays.size(); ++j) {
      const LateralRay& ray = ring.rays[j];
      EXPECT_LT(std::abs(poly_eval(atlas.cost(ray.owner), ray.anchor) - ring.inner_level), 1e-10);
      const AtlasPatch& p = atlas.patch(ring.patch_ids[j]);
      const ProblemJets jets = jet_eval(hk, ray.anchor, 0);
      const Vec xdot = jets.f_value() + jets.g_value() * poly_eval(p.sol.control, ray.anchor);
      EXPECT_NEAR(ray.direction.dot(-xdot.normalized()), 1.0, 1e-12);
      const CoeffBlock g = poly_partials(p.sol.cost, ray.anchor, 1);
      EXPECT_GT(g.values[0] * ray.direction(0) + g.values[1] * ray.direction(1), 0.0);
    }
  }
}

TEST(Ring, ExplicitLevels) {
  const HuntKrenerProblem hk;
  AtlasOptions o = reproduction_options();
  o.rings = 2;
  o.levels = {0.04, 0.08};
  const Atlas atlas = build_atlas(hk, o);
  EXPECT_DOUBLE_EQ(atlas.rings[0].level, 0.04);
  EXPECT_DOUBLE_EQ(atlas.rings[1].level, 0.08);

  o.levels = {0.04, 0.03};
  try {
    build_atlas(hk, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), "build_ring");
  }
  // too far for h: the next ring's points would be farther than h
  o.levels = {0.04, 2.0};
  o.h = 0.3;
  try {
    build_atlas(hk, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_FALSE(e.stage().empty());
  }
  o.levels = {0.04};
  EXPECT_THROW(build_atlas(hk, o), Error);
}

TEST(Ring, RejectsNonPlanarProblems) {
  const patchy::testing::ChainProblem chain;
  try {
    build_atlas(chain, AtlasOptions{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), "config");
  }
}

// ---------------------------------------------------------------------------
// locate
// ---------------------------------------------------------------------------

TEST(Locate, OriginIsAlbrekht) {
  const Atlas& atlas = reproduction_atlas();
  EXPECT_EQ(locate(atlas, Vec::Zero(2)), 0);
  const auto v = evaluate(atlas, Vec::Zero(2));
  ASSERT_TRUE(v);
  EXPECT_EQ(v->first, 0.0);
  EXPECT_EQ(v->second, 0.0);
  EXPECT_FALSE(locate(atlas, point(5.0, 5.0)));
  EXPECT_FALSE(evaluate(atlas, point(5.0, 5.0)));
}

TEST(Locate, RayTieGoesCounterclockwise) {
  // four axis-aligned rays; ray j is the clockwise boundary of patch j
  Atlas atlas;
  atlas.patches.resize(5);
  Ring ring;
  ring.index = 1;
  const double dirs[4][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (int j = 0; j < 4; ++j) {
    AtlasPatch& p = atlas.patches[static_cast<std::size_t>(j + 1)];
    p.id = j + 1;
    p.geom.ring = 1;
    p.geom.index = j;
    p.geom.chord_mid = Vec::Zero(2);
    p.geom.chord_normal = point(1.0, 0.0);
    p.geom.chord_margin = 1e9;
    ring.patch_ids.push_back(j + 1);
    ring.rays.push_back({point(dirs[j][0], dirs[j][1]), point(dirs[j][0], dirs[j][1]), 0});
  }
  atlas.rings.push_back(ring);
  EXPECT_EQ(wedge_of(atlas, atlas.rings[0], point(2.0, 0.0)), 0u);
  EXPECT_EQ(wedge_of(atlas, atlas.rings[0], point(0.0, 2.0)), 1u);
  EXPECT_EQ(wedge_of(atlas, atlas.rings[0], point(-2.0, 0.0)), 2u);
  EXPECT_EQ(wedge_of(atlas, atlas.rings[0], point(0.0, -2.0)), 3u);
  EXPECT_EQ(wedge_of(atlas, atlas.rings[0], point(2.0, 1.0)), 0u);
  EXPECT_EQ(wedge_of(atlas, atlas.rings[0], point(2.0, -1.0)), 3u);
}

TEST(Locate, AgreesWithBruteForceOnRandomPoints) {
  const Atlas& atlas = reproduction_atlas();
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(-1, 1);
  int located = 0;
  for (int t = 0; t < 10000; ++t) {
    const Vec x = point(u(rng), u(rng));
    const auto id = locate(atlas, x);
    int count = 0, found = -1;
    for (const AtlasPatch& p : atlas.patches) {
      if (contains_bruteforce(atlas, p.id, x)) {
        ++count;
        found = p.id;
      }
    }
    ASSERT_LE(count, 1) << "x=(" << x(0) << ", " << x(1) << ")";
    ASSERT_EQ(id ? *id : -1, found) << "x=(" << x(0) << ", " << x(1) << ")";
    located += id ? 1 : 0;
  }
  EXPECT_GT(located, 3000);
}

TEST(Locate, AnnulusIsCoveredExactlyOnce) {
  const Atlas& atlas = reproduction_atlas();
  const Polyline& outer = atlas.outer_boundary();
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  int samples = 0;
  while (samples < 10000) {
    const Vec x = point(u(rng), u(rng));
    if (!inside_polygon(outer, x) || distance_to_polyline(outer, x) < 1e-3) continue;
    if (poly_eval(atlas.cost(0), x) <= atlas.c0) continue;
    ++samples;
    int count = 0;
    for (const AtlasPatch& p : atlas.patches) count += contains_bruteforce(atlas, p.id, x) ? 1 : 0;
    ASSERT_EQ(count, 1) << "x=(" << x(0) << ", " << x(1) << ")";
    ASSERT_TRUE(locate(atlas, x));
  }
}
