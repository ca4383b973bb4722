#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "patchy/albrekht.hpp"
#include "patchy/error.hpp"
#include "patchy/level_curve.hpp"
#include "patchy/patch.hpp"
#include "patchy/problem.hpp"

namespace patchy {

/// Lateral boundary between two adjacent patches of a ring: the half-line
/// anchor + t * direction, t >= 0. `owner` is the inner-layer patch whose
/// level curve holds the anchor.
struct LateralRay {
  Vec anchor;
  Vec direction;
  int owner = 0;
};

struct PatchGeom {
  int ring = 0;   // 0 for the Al'brekht patch
  int index = 0;  // position within the ring, counterclockwise
  double c_in = 0.0;
  double c_out = 0.0;
  // Wedge closure: points must satisfy (x - chord_mid) . chord_normal >= -chord_margin.
  Vec chord_mid;
  Vec chord_normal;
  double chord_margin = 0.0;
  double reach = 0.0;  // max distance from the patch point to any point of the patch
};

struct AtlasPatch {
  int id = 0;
  PatchSolution sol;
  PatchGeom geom;
};

struct Ring {
  int index = 0;
  double inner_level = 0.0;
  double level = 0.0;
  std::vector<int> patch_ids;    // counterclockwise
  std::vector<LateralRay> rays;  // rays[j] is the clockwise boundary of patch j
  Polyline boundary;             // outer composite boundary, counterclockwise
};

struct AtlasOptions {
  int degree = 3;  // control degree d; cost degree d+1
  double h = 0.54;
  double albrekht_radius = 0.25;
  std::optional<double> albrekht_level;
  int rings = 4;
  std::string growth = "double";  // double | arclength | list
  int initial_points = 8;
  std::vector<int> ring_points;   // growth = list
  double level_ratio = 2.0;       // initial rho in c_k = rho c_{k-1}
  std::vector<double> levels;     // explicit outer levels, one per ring
  std::optional<double> max_level;
  double trace_step = 0.0;        // 0: h / 8
  int max_ratio_halvings = 30;
};

struct Atlas {
  AtlasOptions options;
  std::string problem_name;
  AlbrekhtSolution albrekht;
  double c0 = 0.0;
  Polyline albrekht_boundary;
  std::vector<AtlasPatch> patches;  // id 0 is the Al'brekht patch
  std::vector<Ring> rings;

  const AtlasPatch& patch(int id) const { return patches.at(static_cast<std::size_t>(id)); }
  const CoeffSet& cost(int id) const { return patch(id).sol.cost; }
  const Polyline& outer_boundary() const { return rings.empty() ? albrekht_boundary : rings.back().boundary; }
  double outer_level() const { return rings.empty() ? c0 : rings.back().level; }
};

namespace detail {

inline double side(const LateralRay& ray, const Vec& x) { return cross2(ray.direction, x - ray.anchor); }

inline bool within_reach(const AtlasPatch& p, const Vec& x) { return (x - p.sol.point).norm() <= p.geom.reach; }

}  // namespace detail

/// Wedge test for patch j of a ring: counterclockwise of ray j (inclusive,
/// so a point on a ray belongs to the counterclockwise patch), clockwise of
/// ray j+1, and not behind the anchor chord.
inline bool in_wedge(const Atlas& atlas, const Ring& ring, std::size_t j, const Vec& x) {
  const std::size_t n = ring.rays.size();
  const PatchGeom& g = atlas.patch(ring.patch_ids[j]).geom;
  return detail::side(ring.rays[j], x) >= 0.0 && detail::side(ring.rays[(j + 1) % n], x) < 0.0 &&
         (x - g.chord_mid).dot(g.chord_normal) >= -g.chord_margin;
}

inline std::optional<std::size_t> wedge_of(const Atlas& atlas, const Ring& ring, const Vec& x) {
  for (std::size_t j = 0; j < ring.rays.size(); ++j) {
    if (in_wedge(atlas, ring, j, x)) return j;
  }
  return std::nullopt;
}

/// Patch containing x: the Al'brekht patch if pi0(x) <= c0, otherwise the
/// first ring (innermost) whose wedge patch j has pi^j(x) <= c_k. Inner
/// level boundaries belong to the inner region.
inline std::optional<int> locate(const Atlas& atlas, const Vec& x) {
  const AtlasPatch& alb = atlas.patches.front();
  if (poly_eval(alb.sol.cost, x) <= atlas.c0 && detail::within_reach(alb, x)) return 0;
  for (const Ring& ring : atlas.rings) {
    const auto j = wedge_of(atlas, ring, x);
    if (!j) continue;
    const AtlasPatch& p = atlas.patch(ring.patch_ids[*j]);
    if (poly_eval(p.sol.cost, x) <= ring.level && detail::within_reach(p, x)) return p.id;
  }
  return std::nullopt;
}

/// Cost and control at x from the located patch's polynomials.
inline std::optional<std::pair<double, double>> evaluate(const Atlas& atlas, const Vec& x) {
  const auto id = locate(atlas, x);
  if (!id) return std::nullopt;
  const AtlasPatch& p = atlas.patch(*id);
  return std::make_pair(poly_eval(p.sol.cost, x), poly_eval(p.sol.control, x));
}

/// Containment by definition, patch by patch: x lies in patch `id` when it
/// is in the patch's own wedge and sublevel set and in no patch of any inner
/// layer. Used to cross-check locate.
inline bool contains_bruteforce(const Atlas& atlas, int id, const Vec& x) {
  const AtlasPatch& p = atlas.patch(id);
  if (id == 0) return poly_eval(p.sol.cost, x) <= atlas.c0 && detail::within_reach(p, x);
  const Ring& ring = atlas.rings[static_cast<std::size_t>(p.geom.ring - 1)];
  if (!in_wedge(atlas, ring, static_cast<std::size_t>(p.geom.index), x)) return false;
  if (!(poly_eval(p.sol.cost, x) <= ring.level) || !detail::within_reach(p, x)) return false;
  if (contains_bruteforce(atlas, 0, x)) return false;
  for (int k = 0; k + 1 < p.geom.ring; ++k) {
    for (int other : atlas.rings[static_cast<std::size_t>(k)].patch_ids) {
      if (contains_bruteforce(atlas, other, x)) return false;
    }
  }
  return true;
}

namespace detail {

/// Owner of a point on (or just outside) the boundary of layer k: the
/// Al'brekht patch for k = 0, else the wedge patch of ring k.
inline int layer_owner(const Atlas& atlas, int k, const Vec& x) {
  if (k == 0) return 0;
  const Ring& ring = atlas.rings[static_cast<std::size_t>(k - 1)];
  if (const auto j = wedge_of(atlas, ring, x)) return ring.patch_ids[*j];
  int best = ring.patch_ids.front();
  for (int id : ring.patch_ids) {
    if ((atlas.patch(id).sol.point - x).norm() < (atlas.patch(best).sol.point - x).norm()) best = id;
  }
  return best;
}

inline double layer_level(const Atlas& atlas, int k) {
  return k == 0 ? atlas.c0 : atlas.rings[static_cast<std::size_t>(k - 1)].level;
}

inline const Polyline& layer_boundary(const Atlas& atlas, int k) {
  return k == 0 ? atlas.albrekht_boundary : atlas.rings[static_cast<std::size_t>(k - 1)].boundary;
}

inline int ring_point_count(const AtlasOptions& o, int k, double inner_length, int previous) {
  if (o.growth == "double") return k == 1 ? o.initial_points : 2 * previous;
  if (o.growth == "arclength") return point_count_for_spacing(inner_length, o.h);
  if (o.growth == "list") {
    if (k <= static_cast<int>(o.ring_points.size())) return o.ring_points[static_cast<std::size_t>(k - 1)];
    return 2 * previous;
  }
  throw Error("config", "unknown ring growth rule '" + o.growth + "' (double, arclength, list)");
}

inline Vec optimal_direction(const Problem& problem, const PatchSolution& sol, const Vec& x) {
  const ProblemJets j = jet_eval(problem, x, 0);
  return j.f_value() + j.g_value() * poly_eval(sol.control, x);
}

/// Points on the boundary of layer k at equal arclength (offset by
/// `shift` spacings), each projected onto its owner's level curve.
struct PlacedPoint {
  Vec x;
  int owner;
};

inline std::vector<PlacedPoint> place_on_layer(const Atlas& atlas, int k, int count, double shift,
                                               const TraceOptions& topt) {
  const Polyline& curve = layer_boundary(atlas, k);
  const auto cum = cumulative_length(curve);
  std::vector<PlacedPoint> out;
  for (int i = 0; i < count; ++i) {
    const Vec raw = point_at_arclength(curve, cum, cum.back() * (i + shift) / count);
    const int owner = layer_owner(atlas, k, raw);
    out.push_back({project_to_level(atlas.cost(owner), layer_level(atlas, k), raw, topt), owner});
  }
  return out;
}

/// Level curve pi^j = c inside wedge j, from ray j to ray j+1.
inline Polyline trace_outer_piece(const Atlas& atlas, const Ring& ring, std::size_t j, double c,
                                  const TraceOptions& topt, double h) {
  const std::size_t n = ring.rays.size();
  const AtlasPatch& p = atlas.patch(ring.patch_ids[j]);
  const CoeffSet& cost = p.sol.cost;
  const Vec grad = gradient2(cost, p.sol.point);
  const double t = solve_along_line(cost, c, p.sol.point, grad.normalized(), 4.0 * h);
  const Vec seed = project_to_level(cost, c, p.sol.point + t * grad.normalized(), topt);
  if (topt.inside && !topt.inside(seed)) throw Error("trace", "level curve leaves the validity region", p.id);

  const int max_steps = static_cast<int>(std::ceil(40.0 * h / topt.step)) + 100;
  auto crossing = [&](const LateralRay& ray) {
    const double s = solve_along_line(cost, c, ray.anchor, ray.direction, 4.0 * h);
    return Vec(ray.anchor + s * ray.direction);
  };
  auto walk = [&](int sign, const LateralRay& ray, bool want_nonneg) {
    Polyline pts;
    Vec x = seed;
    for (int s = 0; s < max_steps; ++s) {
      const Vec next = trace_step(cost, c, x, topt.step, sign, topt);
      const double sd = side(ray, next);
      if ((sd >= 0.0) == want_nonneg && (next - ray.anchor).dot(ray.direction) > 0.0) return pts;
      pts.push_back(next);
      x = next;
    }
    throw Error("trace", "outer level curve does not reach the lateral boundary", p.id);
  };
  // counterclockwise until counterclockwise of ray j+1, clockwise until clockwise of ray j
  const Polyline ccw = side(ring.rays[(j + 1) % n], seed) >= 0.0 ? Polyline{} : walk(+1, ring.rays[(j + 1) % n], true);
  const Polyline cw = side(ring.rays[j], seed) < 0.0 ? Polyline{} : walk(-1, ring.rays[j], false);
  Polyline piece{crossing(ring.rays[j])};
  for (auto it = cw.rbegin(); it != cw.rend(); ++it) {
    if (side(ring.rays[j], *it) >= 0.0 && side(ring.rays[(j + 1) % n], *it) < 0.0) piece.push_back(*it);
  }
  if (side(ring.rays[j], seed) >= 0.0 && side(ring.rays[(j + 1) % n], seed) < 0.0) piece.push_back(seed);
  for (const Vec& v : ccw) {
    if (side(ring.rays[j], v) >= 0.0 && side(ring.rays[(j + 1) % n], v) < 0.0) piece.push_back(v);
  }
  piece.push_back(crossing(ring.rays[(j + 1) % n]));
  return piece;
}

struct OuterBoundary {
  Polyline boundary;
  std::vector<Polyline> pieces;
};

inline OuterBoundary trace_outer_boundary(const Atlas& atlas, const Ring& ring, double c, const TraceOptions& topt,
                                          double h) {
  OuterBoundary out;
  for (std::size_t j = 0; j < ring.patch_ids.size(); ++j) {
    try {
      out.pieces.push_back(trace_outer_piece(atlas, ring, j, c, topt, h));
    } catch (const Error& e) {
      throw Error(e.stage(), e.message(), e.patch() ? e.patch() : ring.patch_ids[j]);
    }
    for (const Vec& v : out.pieces.back()) out.boundary.push_back(v);
  }
  if (signed_area(out.boundary) <= 0.0) throw Error("build_ring", "outer boundary is not counterclockwise");
  return out;
}

/// Vertices of layer k's boundary between arclength positions s0 < s1.
inline Polyline boundary_arc(const Polyline& curve, const std::vector<double>& cum, double s0, double s1) {
  Polyline out;
  const double length = cum.back();
  for (std::size_t i = 0; i < curve.size(); ++i) {
    for (double shift : {-length, 0.0, length}) {
      const double s = cum[i] + shift;
      if (s > s0 && s < s1) out.push_back(curve[i]);
    }
  }
  return out;
}

}  // namespace detail

/// Builds the Al'brekht patch and `options.rings` rings of patches around it
/// in the plane.
inline Atlas build_atlas(const Problem& problem, const AtlasOptions& options) {
  if (problem.dim() != 2) throw Error("config", "patch geometry is implemented for planar problems");
  if (options.degree < 1 || options.degree + 1 > kMaxCostDegree) throw Error("config", "d must satisfy 1 <= d <= 3");
  if (!(options.h > 0.0)) throw Error("config", "h must be positive");
  if (options.rings < 0) throw Error("config", "ring count must be nonnegative");
  if (!options.levels.empty() && static_cast<int>(options.levels.size()) < options.rings) {
    throw Error("config", "levels must list one outer level per ring");
  }
  const double h = options.h;
  TraceOptions topt;
  topt.step = options.trace_step > 0.0 ? options.trace_step : h / 8.0;
  topt.inside = [&problem](const Vec& x) { return problem.in_domain(x); };

  Atlas atlas;
  atlas.options = options;
  atlas.problem_name = problem.name();
  atlas.albrekht = albrekht_expand(problem, options.degree + 1);
  atlas.c0 = options.albrekht_level ? *options.albrekht_level
                                    : level_within_radius(atlas.albrekht.cost, options.albrekht_radius);
  if (!(atlas.c0 > 0.0)) throw Error("albrekht", "Al'brekht level must be positive");
  {
    AtlasPatch alb;
    alb.id = 0;
    alb.sol.point = Vec::Zero(2);
    alb.sol.cost = atlas.albrekht.cost;
    alb.sol.control = atlas.albrekht.control;
    alb.sol.direction = Vec::Zero(2);
    alb.geom.c_out = atlas.c0;
    const Vec seed = (Vec(2) << options.albrekht_radius, 0.0).finished();
    atlas.albrekht_boundary = trace_level_curve(alb.sol.cost, atlas.c0, seed, topt);
    for (const Vec& v : atlas.albrekht_boundary) alb.geom.reach = std::max(alb.geom.reach, 1.25 * v.norm());
    atlas.patches.push_back(std::move(alb));
  }

  int previous_count = 0;
  for (int k = 1; k <= options.rings; ++k) {
    const double inner_level = detail::layer_level(atlas, k - 1);
    const Polyline inner = detail::layer_boundary(atlas, k - 1);
    const auto inner_cum = cumulative_length(inner);
    const int count = detail::ring_point_count(options, k, inner_cum.back(), previous_count);
    if (count < 4) throw Error("build_ring", "a ring needs at least four patch points");

    Ring ring;
    ring.index = k;
    ring.inner_level = inner_level;
    const auto points = detail::place_on_layer(atlas, k - 1, count, 0.0, topt);
    const auto anchors = detail::place_on_layer(atlas, k - 1, count, -0.5, topt);
    const int first_id = static_cast<int>(atlas.patches.size());
    for (int j = 0; j < count; ++j) {
      const auto& pp = points[static_cast<std::size_t>(j)];
      PatchOptions popt;
      popt.max_distance = h;
      popt.patch_id = first_id + j;
      popt.parent = pp.owner;
      AtlasPatch patch;
      patch.id = first_id + j;
      try {
        patch.sol = assemble_patch(atlas.cost(pp.owner), pp.x, problem, options.degree, popt);
      } catch (const Error& e) {
        throw Error(e.stage(), "ring " + std::to_string(k) + ": " + e.message(), e.patch());
      }
      patch.geom.ring = k;
      patch.geom.index = j;
      patch.geom.c_in = inner_level;
      ring.patch_ids.push_back(patch.id);
      atlas.patches.push_back(std::move(patch));
    }
    for (int j = 0; j < count; ++j) {
      const auto& an = anchors[static_cast<std::size_t>(j)];
      const AtlasPatch& p = atlas.patch(ring.patch_ids[static_cast<std::size_t>(j)]);
      const Vec dir = -detail::optimal_direction(problem, p.sol, an.x);
      if (!(dir.norm() > 0.0)) throw Error("build_ring", "optimal direction vanishes at a lateral anchor", p.id);
      const Vec d = dir.normalized();
      if (!(detail::gradient2(p.sol.cost, an.x).dot(d) > 0.0)) {
        throw Error("build_ring", "lateral boundary is not a strict ascent direction", p.id);
      }
      ring.rays.push_back({an.x, d, an.owner});
    }
    // wedge closure chords
    const double length = inner_cum.back();
    for (int j = 0; j < count; ++j) {
      AtlasPatch& p = atlas.patches[static_cast<std::size_t>(ring.patch_ids[static_cast<std::size_t>(j)])];
      const Vec& a0 = ring.rays[static_cast<std::size_t>(j)].anchor;
      const Vec& a1 = ring.rays[static_cast<std::size_t>((j + 1) % count)].anchor;
      const Vec chord = a1 - a0;
      p.geom.chord_mid = 0.5 * (a0 + a1);
      p.geom.chord_normal = (Vec(2) << chord(1), -chord(0)).finished().normalized();
      double behind = 0.0;
      const Polyline arc = detail::boundary_arc(inner, inner_cum, length * (j - 0.5) / count, length * (j + 0.5) / count);
      for (const Vec& v : arc) behind = std::max(behind, -(v - p.geom.chord_mid).dot(p.geom.chord_normal));
      behind = std::max(behind, -(p.sol.point - p.geom.chord_mid).dot(p.geom.chord_normal));
      p.geom.chord_margin = behind + 0.05 * chord.norm();
    }
    atlas.rings.push_back(ring);
    Ring& built = atlas.rings.back();

    // outer level: explicit, or rho search keeping the next ring within h
    const int next_count = detail::ring_point_count(options, k + 1, 0.0, count);
    double rho = options.level_ratio;
    if (!(rho > 1.0)) throw Error("config", "level_ratio must exceed 1");
    std::string last_failure = "no admissible outer level";
    bool done = false;
    for (int attempt = 0; attempt <= options.max_ratio_halvings && !done; ++attempt) {
      double c = options.levels.empty() ? rho * inner_level : options.levels[static_cast<std::size_t>(k - 1)];
      if (options.levels.empty() && options.max_level) c = std::min(c, *options.max_level);
      if (!(c > inner_level)) throw Error("build_ring", "ring levels must strictly increase (ring " + std::to_string(k) + ")");
      try {
        built.level = c;
        const detail::OuterBoundary ob = detail::trace_outer_boundary(atlas, built, c, topt, h);
        built.boundary = ob.boundary;
        double worst = 0.0;
        int worst_owner = built.patch_ids.front();
        if (options.growth == "arclength" || next_count >= 4) {
          const int n_next = options.growth == "arclength" ? point_count_for_spacing(polyline_length(ob.boundary), h)
                                                            : next_count;
          for (const auto& np : detail::place_on_layer(atlas, k, n_next, 0.0, topt)) {
            const double dist = (np.x - atlas.patch(np.owner).sol.point).norm();
            if (dist > worst) {
              worst = dist;
              worst_owner = np.owner;
            }
          }
        }
        if (worst > h) {
          last_failure = "next-ring patch point at distance " + std::to_string(worst) + " > h from patch " +
                         std::to_string(worst_owner);
          if (!options.levels.empty()) throw Error("build_ring", last_failure, worst_owner);
        } else {
          for (std::size_t j = 0; j < ob.pieces.size(); ++j) {
            AtlasPatch& p = atlas.patches[static_cast<std::size_t>(built.patch_ids[j])];
            p.geom.c_out = c;
            double reach = 0.0;
            for (const Vec& v : ob.pieces[j]) reach = std::max(reach, (v - p.sol.point).norm());
            const Polyline arc = detail::boundary_arc(inner, inner_cum, length * (static_cast<double>(j) - 0.5) / count,
                                                      length * (static_cast<double>(j) + 0.5) / count);
            for (const Vec& v : arc) reach = std::max(reach, (v - p.sol.point).norm());
            for (int r : {0, 1}) {
              reach = std::max(reach, (built.rays[(j + static_cast<std::size_t>(r)) % ob.pieces.size()].anchor - p.sol.point).norm());
            }
            p.geom.reach = 1.25 * reach;
          }
          done = true;
        }
      } catch (const Error& e) {
        if (!options.levels.empty() || e.stage() == "config") throw;
        last_failure = e.what();
      }
      rho = 1.0 + 0.5 * (rho - 1.0);
    }
    if (!done) throw Error("build_ring", "ring " + std::to_string(k) + ": " + last_failure);
    previous_count = count;
  }
  return atlas;
}

}  // namespace patchy
