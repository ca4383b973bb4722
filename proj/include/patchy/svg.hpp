#pragma once

// Static SVG: heatmap of log10 |pi - pi^i| over the error grid, with ring
// boundaries, lateral rays and patch points on top.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "patchy/atlas.hpp"
#include "patchy/harness.hpp"

namespace patchy {

struct SvgOptions {
  int size = 640;           // pixels per side
  double log_lo = -8.0;     // color scale, log10 error
  double log_hi = -2.0;
};

namespace detail {

/// Dark blue -> yellow ramp on t in [0, 1].
inline std::string ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(255 * std::clamp(1.6 * t - 0.4, 0.0, 1.0)));
  const int g = static_cast<int>(std::lround(255 * std::sqrt(t)));
  const int b = static_cast<int>(std::lround(255 * std::clamp(0.6 - 0.8 * t, 0.0, 1.0)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace detail

inline void write_svg(std::ostream& os, const Atlas& atlas, const ErrorReport& report, const GridSpec& grid,
                      const SvgOptions& opt = {}) {
  const double span = grid.hi - grid.lo;
  const double px = opt.size / span;
  auto sx = [&](double x) { return (x - grid.lo) * px; };
  auto sy = [&](double y) { return (grid.hi - y) * px; };
  auto path = [&](const Polyline& p, bool closed) {
    std::string d;
    char buf[64];
    for (std::size_t i = 0; i < p.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%c%.2f %.2f ", i ? 'L' : 'M', sx(p[i](0)), sy(p[i](1)));
      d += buf;
    }
    if (closed) d += "Z";
    return d;
  };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.size << "\" height=\"" << opt.size
     << "\" viewBox=\"0 0 " << opt.size << ' ' << opt.size << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"#eeeeee\"/>\n<g shape-rendering=\"crispEdges\">\n";
  const double cell = span / (grid.n - 1);
  for (const GridPoint& gp : report.points) {
    if (gp.patch < 0) continue;
    const double le = std::log10(std::max(gp.error, 1e-300));
    const double t = (le - opt.log_lo) / (opt.log_hi - opt.log_lo);
    char buf[160];
    std::snprintf(buf, sizeof buf, "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"%s\"/>\n",
                  sx(gp.x(0) - 0.5 * cell), sy(gp.x(1) + 0.5 * cell), cell * px, cell * px, detail::ramp(t).c_str());
    os << buf;
  }
  os << "</g>\n<g fill=\"none\" stroke=\"#ffffff\" stroke-width=\"1\">\n";
  os << "<path d=\"" << path(atlas.albrekht_boundary, true) << "\"/>\n";
  for (const Ring& ring : atlas.rings) {
    os << "<path d=\"" << path(ring.boundary, true) << "\"/>\n";
    for (const LateralRay& ray : ring.rays) {
      // ray segment up to the nearest outer boundary vertex ahead of the anchor
      double t_end = 0.0, best = 1e300;
      for (const Vec& v : ring.boundary) {
        const double t = (v - ray.anchor).dot(ray.direction);
        const double off = std::abs(detail::cross2(ray.direction, v - ray.anchor));
        if (t > 0.0 && off < best) {
          best = off;
          t_end = t;
        }
      }
      os << "<path d=\"" << path({ray.anchor, Vec(ray.anchor + t_end * ray.direction)}, false) << "\"/>\n";
    }
  }
  os << "</g>\n<g fill=\"#d62728\">\n";
  for (const AtlasPatch& p : atlas.patches) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\"/>\n", sx(p.sol.point(0)), sy(p.sol.point(1)));
    os << buf;
  }
  os << "</g>\n</svg>\n";
}

}  // namespace patchy
