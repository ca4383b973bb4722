// patchy: build patchy atlases and report their errors.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "patchy/patchy.hpp"

namespace fs = std::filesystem;
using namespace patchy;

namespace {

struct Args {
  std::string config;
  std::string atlas_dir;
  std::string out;
  std::optional<unsigned> seed;
  std::vector<std::string> sets;
};

SolveConfig resolve_config(const Args& a) {
  SolveConfig cfg = a.config.empty() ? SolveConfig{} : load_config(a.config);
  for (const std::string& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error("config", "--set expects key=value, got '" + s + "'");
    apply_setting(cfg, detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)));
  }
  validate(cfg);
  if (a.seed) cfg.seed = *a.seed;
  return cfg;
}

/// --out, then PATCHY_OUTPUT_DIR, then the atlas directory, then output_dir.
std::string output_dir(const Args& a, const SolveConfig& cfg) {
  if (!a.out.empty()) return a.out;
  if (const char* env = std::getenv("PATCHY_OUTPUT_DIR"); env && *env) return env;
  if (!a.atlas_dir.empty()) return a.atlas_dir;
  return cfg.output_dir;
}

std::ofstream open_output(const std::string& dir, const std::string& name) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("output", "cannot create " + dir + ": " + ec.message());
  std::ofstream out(fs::path(dir) / name);
  if (!out) throw Error("output", "cannot write " + (fs::path(dir) / name).string());
  out.precision(17);
  return out;
}

struct Loaded {
  Atlas atlas;
  std::unique_ptr<Problem> problem;
};

/// The atlas from --atlas, or a fresh build from the config.
Loaded obtain_atlas(const Args& a, const SolveConfig& cfg) {
  Loaded out;
  if (!a.atlas_dir.empty()) {
    LoadedAtlas la = load_atlas(a.atlas_dir);
    out.problem = make_problem(la.atlas.problem_name, la.x1_limit);
    out.atlas = std::move(la.atlas);
  } else {
    out.problem = make_problem(cfg);
    out.atlas = build_atlas(*out.problem, cfg.atlas);
  }
  return out;
}

int cmd_solve(const Args& a) {
  const SolveConfig cfg = resolve_config(a);
  const auto problem = make_problem(cfg);
  const Atlas atlas = build_atlas(*problem, cfg.atlas);
  const std::string dir = output_dir(a, cfg);
  save_atlas(atlas, dir, cfg.x1_limit);
  std::printf("problem=%s d=%d h=%g\n", atlas.problem_name.c_str(), atlas.options.degree, atlas.options.h);
  std::printf("albrekht_level=%.6g\n", atlas.c0);
  for (const Ring& r : atlas.rings) {
    std::printf("ring=%d patches=%zu level=%.6g\n", r.index, r.patch_ids.size(), r.level);
  }
  std::printf("patches=%zu\n", atlas.patches.size());
  std::mt19937 rng(cfg.seed);
  const GeometryCheck gc = check_geometry(atlas, cfg.check_samples, rng);
  std::printf("geometry_check samples=%d located=%d disagreements=%d multiple=%d seed=%u\n", gc.samples, gc.located,
              gc.disagreements, gc.multiple, cfg.seed);
  std::printf("atlas=%s\n", dir.c_str());
  if (gc.disagreements || gc.multiple) throw Error("geometry_check", "locate disagrees with brute-force containment");
  return 0;
}

int cmd_error_grid(const Args& a) {
  const SolveConfig cfg = resolve_config(a);
  const Loaded l = obtain_atlas(a, cfg);
  const ErrorReport rep = error_grid(l.atlas, *l.problem, cfg.grid);
  const std::string dir = output_dir(a, cfg);
  std::ofstream out = open_output(dir, "error_grid.csv");
  out << "x1,x2,exact,approx,abs_error,patch\n";
  for (const GridPoint& gp : rep.points) {
    out << gp.x(0) << ',' << gp.x(1) << ',' << gp.exact << ',' << gp.approx << ',' << gp.error << ',' << gp.patch << '\n';
  }
  std::printf("max_abs_error=%.6e\n", rep.max_error);
  std::printf("mean_abs_error=%.6e\n", rep.mean_error);
  std::printf("covered=%d excluded=%d coverage=%.4f\n", rep.covered, rep.excluded, rep.coverage());
  if (rep.worst >= 0) {
    const GridPoint& w = rep.points[static_cast<std::size_t>(rep.worst)];
    std::printf("worst_point=(%.6g, %.6g) patch=%d\n", w.x(0), w.x(1), w.patch);
  }
  return 0;
}

int cmd_sequence_error(const Args& a) {
  const SolveConfig cfg = resolve_config(a);
  const Loaded l = obtain_atlas(a, cfg);
  const SequenceReport rep = sequence_error(l.atlas, *l.problem);
  std::ofstream out = open_output(output_dir(a, cfg), "sequence_error.csv");
  out << "ring,position,patch,patch_ring,value_error";
  const int orders = l.atlas.options.degree + 2;
  for (int j = 0; j < orders; ++j) out << ",order_" << j;
  out << '\n';
  for (const ChainReport& c : rep.per_ring) {
    for (std::size_t i = 0; i < c.chain.size(); ++i) {
      const ChainEntry& e = c.chain[i];
      out << c.chain.back().ring << ',' << i << ',' << e.patch << ',' << e.ring << ',' << e.value_error;
      for (double v : e.order_errors) out << ',' << v;
      out << '\n';
    }
  }
  for (const ChainReport& c : rep.per_ring) {
    std::printf("ring=%d worst_patch=%d terminal_error=%.6e\n", c.chain.back().ring, c.chain.back().patch,
                c.terminal_error());
  }
  std::printf("worst_chain=");
  for (std::size_t i = 0; i < rep.worst.chain.size(); ++i) std::printf("%s%d", i ? "," : "", rep.worst.chain[i].patch);
  std::printf("\nworst_chain_errors=");
  for (std::size_t i = 0; i < rep.worst.chain.size(); ++i) std::printf("%s%.3e", i ? "," : "", rep.worst.chain[i].value_error);
  std::printf("\nterminal_error=%.6e\n", rep.worst.terminal_error());
  std::printf("fitted_ratio=%.4f fit_residual=%.4f\n", rep.fitted_ratio, rep.fit_residual);
  return 0;
}

int cmd_probe(const Args& a) {
  const SolveConfig cfg = resolve_config(a);
  const auto problem = make_problem(cfg);
  const ProbeReport rep =
      truncation_probe(*problem, cfg.atlas.degree, cfg.probe_point, cfg.probe_direction, cfg.probe_steps);
  std::ofstream out = open_output(output_dir(a, cfg), "probe.csv");
  out << "order,step,error\n";
  for (const ProbeOrder& o : rep.orders) {
    for (std::size_t i = 0; i < rep.steps.size(); ++i) out << o.order << ',' << rep.steps[i] << ',' << o.errors[i] << '\n';
  }
  std::printf("point=(%.6g, %.6g) direction=(%.6g, %.6g)\n", rep.point(0), rep.point(1), rep.direction(0),
              rep.direction(1));
  for (const ProbeOrder& o : rep.orders) {
    if (o.flagged) {
      std::printf("order=%d expected=%d slope=undefined (errors at rounding level)\n", o.order, o.expected_slope);
    } else {
      std::printf("order=%d expected=%d slope=%.3f fit_residual=%.3f\n", o.order, o.expected_slope, o.slope,
                  o.fit_residual);
    }
  }
  return 0;
}

int cmd_emit_contours(const Args& a) {
  const SolveConfig cfg = resolve_config(a);
  const Loaded l = obtain_atlas(a, cfg);
  const ErrorReport rep = error_grid(l.atlas, *l.problem, cfg.grid);
  const std::string dir = output_dir(a, cfg);
  std::ofstream out = open_output(dir, "contours.svg");
  write_svg(out, l.atlas, rep, cfg.grid);
  std::printf("svg=%s\n", (fs::path(dir) / "contours.svg").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Patchy solutions of the HJB equations"};
  app.require_subcommand(1);
  Args args;

  auto common = [&](CLI::App* sub, bool atlas_input) {
    sub->add_option("--config", args.config, "key=value configuration file");
    if (atlas_input) sub->add_option("--atlas", args.atlas_dir, "directory written by solve (else build from --config)");
    sub->add_option("--out", args.out, "output directory (overrides PATCHY_OUTPUT_DIR)");
    sub->add_option("--set", args.sets, "override one config key, key=value");
    sub->add_option("--seed", args.seed, "seed for randomized checks");
  };
  auto* solve = app.add_subcommand("solve", "build an atlas and write manifest + ring CSVs");
  common(solve, false);
  auto* grid = app.add_subcommand("error-grid", "cost error on a uniform grid");
  common(grid, true);
  auto* seq = app.add_subcommand("sequence-error", "worst chains of consecutive patch points");
  common(seq, true);
  auto* probe = app.add_subcommand("probe", "truncation-order probe at one point");
  common(probe, false);
  auto* svg = app.add_subcommand("emit-contours", "SVG heatmap of the error with patch boundaries");
  common(svg, true);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*solve) return cmd_solve(args);
    if (*grid) return cmd_error_grid(args);
    if (*seq) return cmd_sequence_error(args);
    if (*probe) return cmd_probe(args);
    if (*svg) return cmd_emit_contours(args);
  } catch (const Error& e) {
    std::fprintf(stderr, "patchy: stage=%s patch=%s: %s\n", e.stage().c_str(),
                 e.patch() ? std::to_string(*e.patch()).c_str() : "none", e.message().c_str());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "patchy: stage=internal patch=none: %s\n", e.what());
    return 1;
  }
  return 1;
}
