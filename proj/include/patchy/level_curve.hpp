#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "patchy/coeff.hpp"
#include "patchy/error.hpp"

namespace patchy {

using Polyline = std::vector<Vec>;

struct TraceOptions {
  double step = 0.05;       // arclength predictor step
  double tolerance = 1e-12;  // Newton residual tolerance
  int max_newton = 25;
  int max_steps = 200000;
  std::function<bool(const Vec&)> inside;  // validity region; empty = everywhere
};

namespace detail {

inline Vec gradient2(const CoeffSet& c, const Vec& x) {
  const CoeffBlock g = poly_partials(c, x, 1);
  return (Vec(2) << g.values[0], g.values[1]).finished();
}

inline double cross2(const Vec& a, const Vec& b) { return a(0) * b(1) - a(1) * b(0); }

}  // namespace detail

/// Newton projection onto {P(C, x) = c} along the gradient.
inline Vec project_to_level(const CoeffSet& cost, double level, const Vec& seed, const TraceOptions& opt = {}) {
  Vec x = seed;
  for (int it = 0; it < opt.max_newton; ++it) {
    const double res = poly_eval(cost, x) - level;
    if (std::abs(res) <= opt.tolerance * (1.0 + std::abs(level))) return x;
    const Vec g = detail::gradient2(cost, x);
    const double g2 = g.squaredNorm();
    if (!(g2 > 1e-300)) throw Error("trace", "gradient vanishes on the level curve");
    x -= (res / g2) * g;
  }
  if (std::abs(poly_eval(cost, x) - level) <= opt.tolerance * (1.0 + std::abs(level))) return x;
  throw Error("trace", "Newton corrector did not converge");
}

/// Counterclockwise unit tangent of the level curve through x.
inline Vec level_tangent(const CoeffSet& cost, const Vec& x) {
  const Vec g = detail::gradient2(cost, x);
  const double n = g.norm();
  if (!(n > 0.0)) throw Error("trace", "gradient vanishes on the level curve");
  return (Vec(2) << -g(1) / n, g(0) / n).finished();
}

/// One predictor-corrector step along the level curve; sign +1 is ccw.
inline Vec trace_step(const CoeffSet& cost, double level, const Vec& x, double step, int sign,
                      const TraceOptions& opt) {
  const Vec t1 = level_tangent(cost, x) * sign;
  // midpoint tangent for a second-order predictor
  const Vec mid = x + 0.5 * step * t1;
  const Vec t2 = level_tangent(cost, mid) * sign;
  Vec next = project_to_level(cost, level, x + step * t2, opt);
  if (opt.inside && !opt.inside(next)) throw Error("trace", "level curve leaves the validity region");
  return next;
}

/// Closed level curve through (the projection of) seed, ccw, without the
/// closing duplicate point.
inline Polyline trace_level_curve(const CoeffSet& cost, double level, const Vec& seed, const TraceOptions& opt = {}) {
  if (cost.dim() != 2) throw Error("trace", "level curves are traced in the plane only");
  if (!(opt.step > 0.0)) throw Error("trace", "step must be positive");
  const Vec start = project_to_level(cost, level, seed, opt);
  if (opt.inside && !opt.inside(start)) throw Error("trace", "level curve leaves the validity region");
  Polyline out{start};
  double travelled = 0.0;
  Vec x = start;
  for (int s = 0; s < opt.max_steps; ++s) {
    const Vec next = trace_step(cost, level, x, opt.step, +1, opt);
    travelled += (next - x).norm();
    const double gap = (next - start).norm();
    if (travelled > 3.0 * opt.step && gap <= opt.step) {
      if (gap > 1e-3 * opt.step) out.push_back(next);
      return out;
    }
    out.push_back(next);
    x = next;
  }
  throw Error("trace", "level curve did not close");
}

/// Cumulative arclength at each vertex; the last entry is the closed length.
inline std::vector<double> cumulative_length(const Polyline& curve, bool closed = true) {
  std::vector<double> s(curve.size() + (closed ? 1 : 0), 0.0);
  for (std::size_t i = 1; i < curve.size(); ++i) s[i] = s[i - 1] + (curve[i] - curve[i - 1]).norm();
  if (closed && !curve.empty()) s.back() = s[curve.size() - 1] + (curve.front() - curve.back()).norm();
  return s;
}

inline double polyline_length(const Polyline& curve, bool closed = true) { return cumulative_length(curve, closed).back(); }

/// Point at arclength s (mod length) along a closed polyline, by linear
/// interpolation between vertices.
inline Vec point_at_arclength(const Polyline& curve, const std::vector<double>& cum, double s) {
  const double length = cum.back();
  s = std::fmod(s, length);
  if (s < 0) s += length;
  const auto it = std::upper_bound(cum.begin(), cum.end(), s);
  const std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - cum.begin()) - 1));
  const Vec& a = curve[i % curve.size()];
  const Vec& b = curve[(i + 1) % curve.size()];
  const double seg = cum[i + 1] - cum[i];
  const double t = seg > 0 ? (s - cum[i]) / seg : 0.0;
  return a + t * (b - a);
}

/// Number of points for spacing h on a closed curve of the given length:
/// evenly spaced by arclength, never fewer than four.
inline int point_count_for_spacing(double length, double h) {
  if (!(h > 0.0)) throw Error("place_points", "h must be positive");
  return std::max(4, static_cast<int>(std::ceil(length / h - 1e-9)));
}

/// `count` points evenly spaced by arclength, starting at the first vertex.
inline Polyline place_points_by_count(const Polyline& curve, int count) {
  if (count < 1) throw Error("place_points", "point count must be positive");
  if (curve.size() < 3) throw Error("place_points", "curve has too few vertices");
  const auto cum = cumulative_length(curve);
  Polyline out;
  for (int i = 0; i < count; ++i) out.push_back(point_at_arclength(curve, cum, cum.back() * i / count));
  return out;
}

/// Patch points with maximum spacing h on a closed curve.
inline Polyline place_patch_points(const Polyline& curve, double h) {
  return place_points_by_count(curve, point_count_for_spacing(polyline_length(curve), h));
}

/// Signed area (positive for counterclockwise).
inline double signed_area(const Polyline& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) a += detail::cross2(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * a;
}

/// Even-odd point-in-polygon test.
inline bool inside_polygon(const Polyline& poly, const Vec& x) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec& a = poly[i];
    const Vec& b = poly[j];
    if ((a(1) > x(1)) != (b(1) > x(1))) {
      const double xc = a(0) + (x(1) - a(1)) * (b(0) - a(0)) / (b(1) - a(1));
      if (x(0) < xc) in = !in;
    }
  }
  return in;
}

/// Distance from x to a closed polyline.
inline double distance_to_polyline(const Polyline& poly, const Vec& x) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec& a = poly[i];
    const Vec& b = poly[(i + 1) % poly.size()];
    const Vec ab = b - a;
    const double l2 = ab.squaredNorm();
    const double t = l2 > 0 ? std::clamp((x - a).dot(ab) / l2, 0.0, 1.0) : 0.0;
    best = std::min(best, (a + t * ab - x).norm());
  }
  return best;
}

/// Root of P(C, origin + t dir) = level for t in (0, t_max], bracketed by
/// stepping out from t = 0 and refined by bisection.
inline double solve_along_line(const CoeffSet& cost, double level, const Vec& origin, const Vec& dir, double t_max,
                               int samples = 64) {
  auto fn = [&](double t) { return poly_eval(cost, origin + t * dir) - level; };
  double lo = 0.0;
  double flo = fn(lo);
  if (flo == 0.0) return 0.0;
  for (int i = 1; i <= samples; ++i) {
    const double hi = t_max * i / samples;
    const double fhi = fn(hi);
    if ((flo < 0.0) != (fhi < 0.0)) {
      double a = lo, b = hi, fa = flo;
      for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(b)); ++it) {
        const double m = 0.5 * (a + b);
        const double fm = fn(m);
        if ((fa < 0.0) == (fm < 0.0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      return 0.5 * (a + b);
    }
    lo = hi;
    flo = fhi;
  }
  throw Error("trace", "level not reached along the search line");
}

}  // namespace patchy
