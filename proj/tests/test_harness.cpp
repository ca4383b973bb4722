#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "patchy/atlas_io.hpp"
#include "patchy/harness.hpp"
#include "patchy/svg.hpp"

using namespace patchy;
namespace fs = std::filesystem;

namespace {

AtlasOptions rings_only(int rings) {
  AtlasOptions o;
  o.rings = rings;
  return o;
}

Vec point(double a, double b) { return (Vec(2) << a, b).finished(); }

SolveConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("patchy_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

const Atlas& hk_atlas() {
  static const HuntKrenerProblem hk;
  static const Atlas atlas = [] {
    AtlasOptions o;
    o.growth = "list";
    o.ring_points = {8, 16, 16, 32};
    return build_atlas(hk, o);
  }();
  return atlas;
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

TEST(Config, ParsesKeysCommentsAndLists) {
  const SolveConfig cfg = parse(
      "# comment\n"
      "problem = lqr2d\n"
      "degree=2\n"
      "h = 0.4   # trailing comment\n"
      "\n"
      "rings = 3\n"
      "growth = list\n"
      "ring_points = 6, 12,24\n"
      "levels = 0.1, 0.2, 0.4\n"
      "albrekht_level = 0.01\n"
      "grid_n = 50\n"
      "probe_point = 0.1, -0.2\n"
      "probe_steps = 0.1,0.05\n"
      "seed = 17\n");
  EXPECT_EQ(cfg.problem, "lqr2d");
  EXPECT_EQ(cfg.atlas.degree, 2);
  EXPECT_DOUBLE_EQ(cfg.atlas.h, 0.4);
  EXPECT_EQ(cfg.atlas.rings, 3);
  EXPECT_EQ(cfg.atlas.ring_points, (std::vector<int>{6, 12, 24}));
  EXPECT_EQ(cfg.atlas.levels, (std::vector<double>{0.1, 0.2, 0.4}));
  ASSERT_TRUE(cfg.atlas.albrekht_level);
  EXPECT_DOUBLE_EQ(*cfg.atlas.albrekht_level, 0.01);
  EXPECT_EQ(cfg.grid.n, 50);
  EXPECT_DOUBLE_EQ(cfg.probe_point(1), -0.2);
  EXPECT_EQ(cfg.probe_steps.size(), 2u);
  EXPECT_EQ(cfg.seed, 17u);
}

TEST(Config, Defaults) {
  const SolveConfig cfg = parse("");
  EXPECT_EQ(cfg.problem, "hunt-krener-testproblem");
  EXPECT_EQ(cfg.atlas.degree, 3);
  EXPECT_DOUBLE_EQ(cfg.atlas.h, 0.54);
  EXPECT_EQ(cfg.grid.n, 100);
}

TEST(Config, Rejections) {
  for (const char* bad : {"nonsense = 1\n", "h = abc\n", "h = 0\n", "degree = 4\n", "rings = 0\n", "rings = 1.5\n",
                          "growth = list\n", "growth = spiral\n", "just a line\n", "ring_points = 4, 0\n",
                          "grid_n = 1\n", "probe_steps = 0.1\n"}) {
    try {
      parse(bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.stage(), "config") << bad;
    }
  }
  EXPECT_THROW(load_config("/nonexistent/patchy.cfg"), Error);
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"hunt_krener.cfg", "sequence5.cfg", "lqr.cfg"}) {
    EXPECT_NO_THROW(load_config(std::string(PATCHY_SOURCE_DIR) + "/configs/" + name)) << name;
  }
}

TEST(Config, UnknownProblemListsBuiltins) {
  try {
    make_problem("nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), "problem");
    EXPECT_NE(std::string(e.what()).find("lqr2d"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("hunt-krener-testproblem"), std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// error grid
// ---------------------------------------------------------------------------

TEST(ErrorGrid, LqrAtlasIsExact) {
  const auto lqr = LqrProblem::double_integrator();
  AtlasOptions o;
  o.rings = 3;
  const Atlas atlas = build_atlas(*lqr, o);
  const ErrorReport rep = error_grid(atlas, *lqr, GridSpec{});
  EXPECT_LT(rep.max_error, 1e-9);
  EXPECT_GT(rep.covered, 1000);
}

TEST(ErrorGrid, ReportInvariants) {
  const HuntKrenerProblem hk;
  const ErrorReport rep = error_grid(hk_atlas(), hk, GridSpec{});
  ASSERT_EQ(rep.points.size(), 10000u);
  EXPECT_EQ(rep.covered + rep.excluded, 10000);
  EXPECT_GE(rep.max_error, rep.mean_error);
  EXPECT_GE(rep.mean_error, 0.0);
  int covered = 0;
  double max_err = 0.0;
  for (const GridPoint& gp : rep.points) {
    if (gp.patch < 0) {
      EXPECT_TRUE(std::isnan(gp.error));
      continue;
    }
    ++covered;
    EXPECT_EQ(locate(hk_atlas(), gp.x), gp.patch);
    EXPECT_NEAR(gp.error, std::abs(gp.exact - gp.approx), 0.0);
    max_err = std::max(max_err, gp.error);
  }
  EXPECT_EQ(covered, rep.covered);
  EXPECT_EQ(max_err, rep.max_error);
  EXPECT_EQ(rep.points[static_cast<std::size_t>(rep.worst)].error, rep.max_error);
  // grid corners
  EXPECT_EQ(rep.points.front().x, point(-1, -1));
  EXPECT_EQ(rep.points.back().x, point(1, 1));
}

TEST(ErrorGrid, AlbrekhtOnlyCoverageIsItsAreaFraction) {
  const HuntKrenerProblem hk;
  AtlasOptions o;
  o.rings = 0;
  const Atlas atlas = build_atlas(hk, o);
  GridSpec g;
  g.n = 400;
  g.lo = -0.5;
  g.hi = 0.5;
  const ErrorReport rep = error_grid(atlas, hk, g);
  for (const GridPoint& gp : rep.points) {
    if (gp.patch >= 0) {
      EXPECT_EQ(gp.patch, 0);
    }
  }
  const double area_fraction = signed_area(atlas.albrekht_boundary) / ((g.hi - g.lo) * (g.hi - g.lo));
  EXPECT_NEAR(rep.coverage(), area_fraction, 5e-3);
}

TEST(ErrorGrid, CoverageGrowsWithRings) {
  const HuntKrenerProblem hk;
  double prev = 0.0;
  for (int rings = 0; rings <= 4; ++rings) {
    AtlasOptions o;
    o.growth = "list";
    o.ring_points = {8, 16, 16, 32};
    o.rings = rings;
    const ErrorReport rep = error_grid(build_atlas(hk, o), hk, GridSpec{});
    EXPECT_GE(rep.coverage(), prev) << rings;
    prev = rep.coverage();
  }
}

TEST(ErrorGrid, NeedsAnExactSolution) {
  struct NoExact : LqrProblem {
    NoExact() : LqrProblem(*LqrProblem::double_integrator()) {}
    std::optional<Taylor> exact_cost(const Vec&, int) const override { return std::nullopt; }
  };
  const NoExact p;
  const Atlas atlas = build_atlas(p, rings_only(1));
  try {
    error_grid(atlas, p, GridSpec{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), "error_grid");
  }
  EXPECT_THROW(sequence_error(atlas, p), Error);
}

// ---------------------------------------------------------------------------
// sequences
// ---------------------------------------------------------------------------

TEST(Sequence, FitLine) {
  const auto [slope, resid] = fit_line({1, 2, 3, 4}, {1.5, 3.5, 5.5, 7.5});
  EXPECT_NEAR(slope, 2.0, 1e-14);
  EXPECT_NEAR(resid, 0.0, 1e-14);
  EXPECT_TRUE(std::isnan(fit_line({1}, {1}).first));
}

TEST(Sequence, SingleRingChainHasLengthTwo) {
  const HuntKrenerProblem hk;
  const Atlas atlas = build_atlas(hk, rings_only(1));
  const SequenceReport rep = sequence_error(atlas, hk);
  ASSERT_EQ(rep.per_ring.size(), 1u);
  ASSERT_EQ(rep.worst.chain.size(), 2u);
  EXPECT_EQ(rep.worst.chain[0].patch, 0);
  EXPECT_TRUE(std::isnan(rep.fitted_ratio));
}

TEST(Sequence, LqrChainsAreExact) {
  const auto lqr = LqrProblem::double_integrator();
  const Atlas atlas = build_atlas(*lqr, rings_only(3));
  const SequenceReport rep = sequence_error(atlas, *lqr);
  for (const ChainReport& c : rep.per_ring) {
    for (const ChainEntry& e : c.chain) {
      for (double v : e.order_errors) EXPECT_LT(v, 1e-9);
    }
  }
}

TEST(Sequence, ChainsAreConsecutiveAndWorstIsMaximal) {
  const HuntKrenerProblem hk;
  const Atlas& atlas = hk_atlas();
  const SequenceReport rep = sequence_error(atlas, hk);
  ASSERT_EQ(rep.per_ring.size(), atlas.rings.size());
  for (std::size_t k = 0; k < rep.per_ring.size(); ++k) {
    const auto& chain = rep.per_ring[k].chain;
    ASSERT_EQ(chain.size(), k + 2);
    EXPECT_EQ(chain.front().patch, 0);
    for (std::size_t i = 1; i < chain.size(); ++i) {
      EXPECT_EQ(atlas.patch(chain[i].patch).sol.parent, chain[i - 1].patch);
      EXPECT_EQ(chain[i].ring, static_cast<int>(i));
    }
    // the terminal patch has the largest value error in its ring (oracle: direct exact cost)
    double worst = 0.0;
    for (int id : atlas.rings[k].patch_ids) {
      const Vec& x = atlas.patch(id).sol.point;
      worst = std::max(worst, std::abs(poly_eval(atlas.cost(id), x) - exact_cost_oracle(hk, x).value));
    }
    EXPECT_NEAR(rep.per_ring[k].terminal_error(), worst, 1e-15);
    EXPECT_LE(rep.per_ring[k].terminal_error(), rep.worst.terminal_error());
  }
  EXPECT_TRUE(std::isfinite(rep.fitted_ratio));
  EXPECT_GT(rep.fitted_ratio, 0.0);
}

// ---------------------------------------------------------------------------
// truncation probe
// ---------------------------------------------------------------------------

TEST(Probe, SlopesMatchTruncationOrders) {
  const HuntKrenerProblem hk;
  const ProbeReport rep = truncation_probe(hk, 3, point(0.3, 0.3), std::nullopt, {0.2, 0.1, 0.05, 0.025});
  ASSERT_EQ(rep.orders.size(), 5u);
  for (const ProbeOrder& o : rep.orders) {
    EXPECT_FALSE(o.flagged);
    EXPECT_EQ(o.expected_slope, 5 - o.order);
    EXPECT_NEAR(o.slope, o.expected_slope, 0.5) << "order " << o.order;
  }
  EXPECT_NEAR(rep.direction.norm(), 1.0, 1e-15);
}

TEST(Probe, ReproducibleAndDirectionIsAscent) {
  const HuntKrenerProblem hk;
  const ProbeReport a = truncation_probe(hk, 2, point(-0.3, 0.4), std::nullopt, {0.1, 0.05, 0.025});
  const ProbeReport b = truncation_probe(hk, 2, point(-0.3, 0.4), std::nullopt, {0.1, 0.05, 0.025});
  for (std::size_t j = 0; j < a.orders.size(); ++j) EXPECT_EQ(a.orders[j].slope, b.orders[j].slope);
  EXPECT_GT(a.direction.dot(exact_cost_oracle(hk, point(-0.3, 0.4)).gradient), 0.0);
}

TEST(Probe, LqrIsFlagged) {
  const auto lqr = LqrProblem::double_integrator();
  const ProbeReport rep = truncation_probe(*lqr, 3, point(0.3, 0.3), point(1.0, 0.0), {0.2, 0.1, 0.05});
  for (const ProbeOrder& o : rep.orders) {
    EXPECT_TRUE(o.flagged);
    EXPECT_TRUE(std::isnan(o.slope));
  }
}

TEST(Probe, Failures) {
  const HuntKrenerProblem hk;
  EXPECT_THROW(truncation_probe(hk, 3, point(0.3, 0.3), std::nullopt, {0.1}), Error);
  EXPECT_THROW(truncation_probe(hk, 3, point(0.3, 0.3), point(0.0, 0.0), {0.1, 0.05}), Error);
  try {
    truncation_probe(hk, 3, point(0.3, 0.3), point(1.0, 0.0), {5.0, 0.1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), "probe");
  }
}

// ---------------------------------------------------------------------------
// geometry self-check, serialization, svg
// ---------------------------------------------------------------------------

TEST(GeometryCheck, NoDisagreements) {
  std::mt19937 rng(5);
  const GeometryCheck gc = check_geometry(hk_atlas(), 3000, rng);
  EXPECT_EQ(gc.samples, 3000);
  EXPECT_EQ(gc.disagreements, 0);
  EXPECT_EQ(gc.multiple, 0);
  EXPECT_GT(gc.located, 1000);
}

TEST(AtlasIo, RoundTrip) {
  const HuntKrenerProblem hk;
  const Atlas& atlas = hk_atlas();
  const fs::path dir = scratch_dir("roundtrip");
  save_atlas(atlas, dir.string(), 1.4);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  for (int k = 0; k <= 4; ++k) EXPECT_TRUE(fs::exists(dir / ("ring_" + std::to_string(k) + ".csv")));

  const LoadedAtlas loaded = load_atlas(dir.string());
  const Atlas& b = loaded.atlas;
  EXPECT_EQ(loaded.x1_limit, 1.4);
  EXPECT_EQ(b.problem_name, atlas.problem_name);
  EXPECT_EQ(b.c0, atlas.c0);
  ASSERT_EQ(b.patches.size(), atlas.patches.size());
  ASSERT_EQ(b.rings.size(), atlas.rings.size());
  for (std::size_t i = 0; i < b.patches.size(); ++i) {
    const AtlasPatch& p = atlas.patches[i];
    const AtlasPatch& q = b.patches[i];
    EXPECT_EQ(p.sol.point, q.sol.point);
    EXPECT_EQ(p.sol.parent, q.sol.parent);
    EXPECT_EQ(p.geom.reach, q.geom.reach);
    for (int k = 0; k <= p.sol.cost.max_order(); ++k) EXPECT_EQ(p.sol.cost[k].values, q.sol.cost[k].values);
    for (int k = 0; k <= p.sol.control.max_order(); ++k) EXPECT_EQ(p.sol.control[k].values, q.sol.control[k].values);
  }
  for (std::size_t k = 0; k < b.rings.size(); ++k) {
    EXPECT_EQ(b.rings[k].level, atlas.rings[k].level);
    EXPECT_EQ(b.rings[k].patch_ids, atlas.rings[k].patch_ids);
    EXPECT_EQ(b.rings[k].boundary.size(), atlas.rings[k].boundary.size());
  }
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 2000; ++t) {
    const Vec x = point(u(rng), u(rng));
    EXPECT_EQ(locate(atlas, x), locate(b, x));
  }
  EXPECT_EQ(error_grid(atlas, hk, GridSpec{}).max_error, error_grid(b, hk, GridSpec{}).max_error);
  fs::remove_all(dir);
}

TEST(AtlasIo, LoadFailures) {
  try {
    load_atlas("/nonexistent/atlas");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), "load");
  }
  const fs::path dir = scratch_dir("bad");
  fs::create_directories(dir);
  std::ofstream(dir / "manifest.json") << "{\"format\": \"other\"}";
  EXPECT_THROW(load_atlas(dir.string()), Error);
  std::ofstream(dir / "manifest.json") << "not json";
  EXPECT_THROW(load_atlas(dir.string()), Error);
  fs::remove_all(dir);
}

TEST(Svg, HeatmapAndOverlay) {
  const HuntKrenerProblem hk;
  GridSpec g;
  g.n = 20;
  const ErrorReport rep = error_grid(hk_atlas(), hk, g);
  std::ostringstream os;
  write_svg(os, hk_atlas(), rep, g);
  const std::string svg = os.str();
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  std::size_t circles = 0, rects = 0;
  for (std::size_t pos = 0; (pos = svg.find("<circle", pos)) != std::string::npos; ++pos) ++circles;
  for (std::size_t pos = 0; (pos = svg.find("<rect x=", pos)) != std::string::npos; ++pos) ++rects;
  EXPECT_EQ(circles, hk_atlas().patches.size());
  EXPECT_EQ(rects, static_cast<std::size_t>(rep.covered));
}

TEST(Determinism, SameConfigSameReport) {
  const HuntKrenerProblem hk;
  AtlasOptions o;
  o.rings = 2;
  const ErrorReport a = error_grid(build_atlas(hk, o), hk, GridSpec{});
  const ErrorReport b = error_grid(build_atlas(hk, o), hk, GridSpec{});
  EXPECT_EQ(a.max_error, b.max_error);
  EXPECT_EQ(a.mean_error, b.mean_error);
  EXPECT_EQ(a.covered, b.covered);
}
