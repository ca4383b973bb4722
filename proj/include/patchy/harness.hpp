#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "patchy/atlas.hpp"
#include "patchy/error.hpp"
#include "patchy/patch.hpp"
#include "patchy/problem.hpp"

namespace patchy {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct GridSpec {
  int n = 100;
  double lo = -1.0;
  double hi = 1.0;
};

struct SolveConfig {
  std::string problem = "hunt-krener-testproblem";
  double x1_limit = 1.5;
  AtlasOptions atlas;
  GridSpec grid;
  std::string output_dir = "patchy_out";
  unsigned seed = 1;
  int check_samples = 2000;
  Vec probe_point = (Vec(2) << 0.3, 0.3).finished();
  std::optional<Vec> probe_direction;  // empty: ascent direction -(f + g kappa)
  std::vector<double> probe_steps{0.2, 0.1, 0.05, 0.025};
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || trim(v.substr(used)) != "") throw Error("config", "'" + key + "' expects a number, got '" + v + "'");
  return out;
}

inline int parse_int(const std::string& key, const std::string& v) {
  const double d = parse_double(key, v);
  if (d != std::floor(d) || std::abs(d) > 1e9) throw Error("config", "'" + key + "' expects an integer, got '" + v + "'");
  return static_cast<int>(d);
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(key, item));
  }
  if (out.empty()) throw Error("config", "'" + key + "' expects a comma-separated list");
  return out;
}

inline Vec parse_point(const std::string& key, const std::string& v) {
  const auto xs = parse_list(key, v);
  return Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

}  // namespace detail

/// Applies one key=value setting.
inline void apply_setting(SolveConfig& cfg, const std::string& key, const std::string& value) {
  using namespace detail;
  AtlasOptions& a = cfg.atlas;
  if (key == "problem") {
    cfg.problem = value;
  } else if (key == "x1_limit") {
    cfg.x1_limit = parse_double(key, value);
  } else if (key == "degree" || key == "d") {
    a.degree = parse_int(key, value);
  } else if (key == "h") {
    a.h = parse_double(key, value);
  } else if (key == "albrekht_radius") {
    a.albrekht_radius = parse_double(key, value);
  } else if (key == "albrekht_level") {
    a.albrekht_level = parse_double(key, value);
  } else if (key == "rings") {
    a.rings = parse_int(key, value);
  } else if (key == "growth") {
    a.growth = value;
  } else if (key == "initial_points") {
    a.initial_points = parse_int(key, value);
  } else if (key == "ring_points") {
    a.ring_points.clear();
    for (double v : parse_list(key, value)) {
      if (v != std::floor(v) || v < 1 || v > 1e6) throw Error("config", "ring_points expects positive integers");
      a.ring_points.push_back(static_cast<int>(v));
    }
  } else if (key == "level_ratio") {
    a.level_ratio = parse_double(key, value);
  } else if (key == "levels") {
    a.levels = parse_list(key, value);
  } else if (key == "max_level") {
    a.max_level = parse_double(key, value);
  } else if (key == "trace_step") {
    a.trace_step = parse_double(key, value);
  } else if (key == "grid_n") {
    cfg.grid.n = parse_int(key, value);
  } else if (key == "grid_lo") {
    cfg.grid.lo = parse_double(key, value);
  } else if (key == "grid_hi") {
    cfg.grid.hi = parse_double(key, value);
  } else if (key == "output_dir") {
    cfg.output_dir = value;
  } else if (key == "seed") {
    cfg.seed = static_cast<unsigned>(parse_int(key, value));
  } else if (key == "check_samples") {
    cfg.check_samples = parse_int(key, value);
  } else if (key == "probe_point") {
    cfg.probe_point = parse_point(key, value);
  } else if (key == "probe_direction") {
    cfg.probe_direction = parse_point(key, value);
  } else if (key == "probe_steps") {
    cfg.probe_steps = parse_list(key, value);
  } else {
    throw Error("config", "unknown key '" + key + "'");
  }
}

inline void validate(const SolveConfig& cfg) {
  const AtlasOptions& a = cfg.atlas;
  if (a.degree < 1 || a.degree + 1 > kMaxCostDegree) throw Error("config", "degree must satisfy 1 <= d <= 3");
  if (!(a.h > 0.0)) throw Error("config", "h must be positive");
  if (a.rings < 1) throw Error("config", "rings must be at least 1");
  if (a.growth != "double" && a.growth != "arclength" && a.growth != "list") {
    throw Error("config", "growth must be double, arclength or list");
  }
  if (a.growth == "list" && a.ring_points.empty()) throw Error("config", "growth=list needs ring_points");
  if (cfg.grid.n < 2 || !(cfg.grid.hi > cfg.grid.lo)) throw Error("config", "grid needs n >= 2 and hi > lo");
  if (cfg.probe_steps.size() < 2) throw Error("config", "probe_steps needs at least two steps");
}

/// Parses `key = value` lines; '#' starts a comment.
inline SolveConfig parse_config(std::istream& is) {
  SolveConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config", "line " + std::to_string(lineno) + ": expected key = value");
    apply_setting(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  validate(cfg);
  return cfg;
}

inline SolveConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config", "cannot open " + path);
  return parse_config(in);
}

inline std::unique_ptr<Problem> make_problem(const std::string& name, double x1_limit = 1.5) {
  ProblemOptions po;
  po.x1_limit = x1_limit;
  return ProblemRegistry::with_builtins().create(name, po);
}

inline std::unique_ptr<Problem> make_problem(const SolveConfig& cfg) { return make_problem(cfg.problem, cfg.x1_limit); }

// ---------------------------------------------------------------------------
// Error grid
// ---------------------------------------------------------------------------

struct GridPoint {
  Vec x;
  double exact = std::numeric_limits<double>::quiet_NaN();
  double approx = std::numeric_limits<double>::quiet_NaN();
  double error = std::numeric_limits<double>::quiet_NaN();
  int patch = -1;  // -1: excluded
};

struct ErrorReport {
  std::vector<GridPoint> points;
  int covered = 0;
  int excluded = 0;
  double max_error = 0.0;
  double mean_error = 0.0;
  int worst = -1;  // index into points

  double coverage() const { return points.empty() ? 0.0 : static_cast<double>(covered) / static_cast<double>(points.size()); }
};

inline double grid_coordinate(const GridSpec& g, int i) { return g.lo + (g.hi - g.lo) * i / (g.n - 1); }

/// |pi - pi^i| on an n x n grid. Points that no patch contains, or where the
/// exact cost is unavailable, are kept with patch = -1.
inline ErrorReport error_grid(const Atlas& atlas, const Problem& problem, const GridSpec& grid) {
  if (!problem.exact_cost(Vec::Zero(problem.dim()), 0)) {
    throw Error("error_grid", problem.name() + " has no exact solution to compare against");
  }
  ErrorReport rep;
  double sum = 0.0;
  for (int i = 0; i < grid.n; ++i) {
    for (int j = 0; j < grid.n; ++j) {
      GridPoint gp;
      gp.x = (Vec(2) << grid_coordinate(grid, i), grid_coordinate(grid, j)).finished();
      const auto id = locate(atlas, gp.x);
      if (id && problem.in_domain(gp.x)) {
        gp.patch = *id;
        gp.exact = exact_cost_oracle(problem, gp.x).value;
        gp.approx = poly_eval(atlas.cost(*id), gp.x);
        gp.error = std::abs(gp.exact - gp.approx);
        ++rep.covered;
        sum += gp.error;
        if (rep.worst < 0 || gp.error > rep.max_error) {
          rep.max_error = gp.error;
          rep.worst = static_cast<int>(rep.points.size());
        }
      } else {
        ++rep.excluded;
      }
      rep.points.push_back(std::move(gp));
    }
  }
  rep.mean_error = rep.covered ? sum / rep.covered : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Sequences of consecutive patch points
// ---------------------------------------------------------------------------

struct ChainEntry {
  int patch = 0;
  int ring = 0;
  double value_error = 0.0;         // |pi^i(x^i) - pi(x^i)|
  std::vector<double> order_errors;  // max |C_j^i - exact_j| per order j
};

struct ChainReport {
  std::vector<ChainEntry> chain;  // origin first
  double terminal_error() const { return chain.empty() ? 0.0 : chain.back().value_error; }
};

struct SequenceReport {
  std::vector<ChainReport> per_ring;  // worst chain ending in each ring
  ChainReport worst;
  double fitted_ratio = std::numeric_limits<double>::quiet_NaN();  // per-ring growth factor
  double fit_residual = std::numeric_limits<double>::quiet_NaN();
};

/// Least-squares line through (x_i, y_i): slope and RMS residual.
inline std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  double rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (my + slope * (x[i] - mx));
    rss += r * r;
  }
  return {slope, std::sqrt(rss / n)};
}

inline ChainEntry patch_errors(const Atlas& atlas, const Problem& problem, int id) {
  const AtlasPatch& p = atlas.patch(id);
  const int order = p.sol.cost.max_order();
  const CoeffSet exact = problem.exact_cost(p.sol.point, order)->to_coeffs(p.sol.point);
  ChainEntry e;
  e.patch = id;
  e.ring = p.geom.ring;
  for (int k = 0; k <= order; ++k) {
    double m = 0.0;
    for (std::size_t i = 0; i < exact[k].size(); ++i) m = std::max(m, std::abs(p.sol.cost[k].values[i] - exact[k].values[i]));
    e.order_errors.push_back(m);
  }
  e.value_error = e.order_errors[0];
  return e;
}

inline ChainReport chain_to(const Atlas& atlas, const Problem& problem, int id) {
  ChainReport rep;
  for (int cur = id;; cur = atlas.patch(cur).sol.parent) {
    rep.chain.push_back(patch_errors(atlas, problem, cur));
    if (cur == 0) break;
    if (static_cast<int>(rep.chain.size()) > static_cast<int>(atlas.patches.size())) {
      throw Error("sequence_error", "parent chain does not terminate at the origin", id);
    }
  }
  std::reverse(rep.chain.begin(), rep.chain.end());
  return rep;
}

/// For each ring, the chain of consecutive patch points ending at the patch
/// point with the largest cost error; the worst of these overall; and the
/// geometric growth factor fitted to the per-ring worst errors.
inline SequenceReport sequence_error(const Atlas& atlas, const Problem& problem) {
  if (!problem.exact_cost(Vec::Zero(problem.dim()), 0)) {
    throw Error("sequence_error", problem.name() + " has no exact solution to compare against");
  }
  SequenceReport rep;
  std::vector<double> ks, logs;
  for (const Ring& ring : atlas.rings) {
    int best = ring.patch_ids.front();
    double best_err = -1.0;
    for (int id : ring.patch_ids) {
      const double e = patch_errors(atlas, problem, id).value_error;
      if (e > best_err) {
        best_err = e;
        best = id;
      }
    }
    rep.per_ring.push_back(chain_to(atlas, problem, best));
    if (best_err > 0.0) {
      ks.push_back(ring.index);
      logs.push_back(std::log(best_err));
    }
  }
  if (rep.per_ring.empty()) {
    rep.worst = chain_to(atlas, problem, 0);
    return rep;
  }
  rep.worst = *std::max_element(rep.per_ring.begin(), rep.per_ring.end(), [](const ChainReport& a, const ChainReport& b) {
    return a.terminal_error() < b.terminal_error();
  });
  const auto [slope, resid] = fit_line(ks, logs);
  rep.fitted_ratio = std::exp(slope);
  rep.fit_residual = resid;
  return rep;
}

// ---------------------------------------------------------------------------
// Truncation probe
// ---------------------------------------------------------------------------

struct ProbeOrder {
  int order = 0;
  int expected_slope = 0;  // d + 2 - j
  std::vector<double> errors;
  double slope = std::numeric_limits<double>::quiet_NaN();
  double fit_residual = std::numeric_limits<double>::quiet_NaN();
  bool flagged = false;  // errors at rounding level, no fit
};

struct ProbeReport {
  Vec point;
  Vec direction;
  std::vector<double> steps;
  std::vector<ProbeOrder> orders;
};

/// One step of the patch map fed with the exact Taylor coefficients at x,
/// to x + s * direction for each step s; per order j the largest
/// |C_j - exact_j| and its log-log slope against s.
inline ProbeReport truncation_probe(const Problem& problem, int d, const Vec& x, const std::optional<Vec>& direction,
                                    const std::vector<double>& steps) {
  if (!problem.exact_cost(x, 0)) throw Error("probe", problem.name() + " has no exact solution for the probe");
  if (steps.size() < 2) throw Error("probe", "at least two steps are needed for a slope");
  const CoeffSet source = problem.exact_cost(x, d + 1)->to_coeffs(x);
  ProbeReport rep;
  rep.point = x;
  rep.steps = steps;
  if (direction) {
    if (!(direction->norm() > 0.0)) throw Error("probe", "probe direction must be nonzero");
    rep.direction = direction->normalized();
  } else {
    const FirstOrder fo = new_first_order(source, x, problem);
    rep.direction = (-fo.direction).normalized();
  }
  for (int j = 0; j <= d + 1; ++j) {
    ProbeOrder o;
    o.order = j;
    o.expected_slope = d + 2 - j;
    rep.orders.push_back(o);
  }
  for (double s : steps) {
    const Vec y = x + s * rep.direction;
    PatchSolution sol;
    try {
      sol = assemble_patch(source, y, problem, d);
    } catch (const Error& e) {
      throw Error("probe", "step " + std::to_string(s) + ": [" + e.stage() + "] " + e.message(), e.patch());
    }
    const CoeffSet exact = problem.exact_cost(y, d + 1)->to_coeffs(y);
    for (int j = 0; j <= d + 1; ++j) {
      double m = 0.0;
      for (std::size_t i = 0; i < exact[j].size(); ++i) m = std::max(m, std::abs(sol.cost[j].values[i] - exact[j].values[i]));
      rep.orders[static_cast<std::size_t>(j)].errors.push_back(m);
    }
  }
  for (ProbeOrder& o : rep.orders) {
    if (*std::max_element(o.errors.begin(), o.errors.end()) < 1e-13) {
      o.flagged = true;
      continue;
    }
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      lx.push_back(std::log(steps[i]));
      ly.push_back(std::log(std::max(o.errors[i], 1e-300)));
    }
    std::tie(o.slope, o.fit_residual) = fit_line(lx, ly);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Geometry self-check
// ---------------------------------------------------------------------------

struct GeometryCheck {
  int samples = 0;
  int located = 0;
  int disagreements = 0;  // locate differs from the brute-force container
  int multiple = 0;       // more than one container
};

/// Random points in the bounding box of the outer boundary, checked
/// against containment by definition.
template <class Rng>
GeometryCheck check_geometry(const Atlas& atlas, int samples, Rng& rng) {
  GeometryCheck out;
  const Polyline& outer = atlas.outer_boundary();
  Vec lo = outer.front(), hi = outer.front();
  for (const Vec& v : outer) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int s = 0; s < samples; ++s) {
    const Vec x = (Vec(2) << lo(0) + (hi(0) - lo(0)) * u(rng), lo(1) + (hi(1) - lo(1)) * u(rng)).finished();
    const auto id = locate(atlas, x);
    int count = 0;
    int found = -1;
    for (const AtlasPatch& p : atlas.patches) {
      if (contains_bruteforce(atlas, p.id, x)) {
        ++count;
        found = p.id;
      }
    }
    ++out.samples;
    if (id) ++out.located;
    if (count > 1) ++out.multiple;
    if ((id ? *id : -1) != found) ++out.disagreements;
  }
  return out;
}

}  // namespace patchy
