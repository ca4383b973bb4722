#pragma once

// Atlas on disk: manifest.json (options, levels, geometry) plus
// ring_<k>.csv with the polynomial coefficients of every patch in ring k
// (ring_0.csv holds the Al'brekht patch).

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "patchy/atlas.hpp"
#include "patchy/error.hpp"

namespace patchy {

inline constexpr int kAtlasFormatVersion = 1;

namespace detail {

using json = nlohmann::json;

inline json vec_json(const Vec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Vec json_vec(const json& j) {
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

inline json polyline_json(const Polyline& p) {
  json out = json::array();
  for (const Vec& v : p) out.push_back(vec_json(v));
  return out;
}

inline Polyline json_polyline(const json& j) {
  Polyline out;
  for (const auto& v : j) out.push_back(json_vec(v));
  return out;
}

inline json options_json(const AtlasOptions& o) {
  json j{{"degree", o.degree},          {"h", o.h},
         {"albrekht_radius", o.albrekht_radius}, {"rings", o.rings},
         {"growth", o.growth},          {"initial_points", o.initial_points},
         {"ring_points", o.ring_points}, {"level_ratio", o.level_ratio},
         {"levels", o.levels},          {"trace_step", o.trace_step},
         {"max_ratio_halvings", o.max_ratio_halvings}};
  if (o.albrekht_level) j["albrekht_level"] = *o.albrekht_level;
  if (o.max_level) j["max_level"] = *o.max_level;
  return j;
}

inline AtlasOptions json_options(const json& j) {
  AtlasOptions o;
  o.degree = j.at("degree").get<int>();
  o.h = j.at("h").get<double>();
  o.albrekht_radius = j.at("albrekht_radius").get<double>();
  o.rings = j.at("rings").get<int>();
  o.growth = j.at("growth").get<std::string>();
  o.initial_points = j.at("initial_points").get<int>();
  o.ring_points = j.at("ring_points").get<std::vector<int>>();
  o.level_ratio = j.at("level_ratio").get<double>();
  o.levels = j.at("levels").get<std::vector<double>>();
  o.trace_step = j.at("trace_step").get<double>();
  o.max_ratio_halvings = j.at("max_ratio_halvings").get<int>();
  if (j.contains("albrekht_level")) o.albrekht_level = j["albrekht_level"].get<double>();
  if (j.contains("max_level")) o.max_level = j["max_level"].get<double>();
  return o;
}

inline void write_poly_rows(std::ostream& os, int id, const char* kind, const CoeffSet& c) {
  for (int k = 0; k <= c.max_order(); ++k) {
    const auto indices = enumerate_indices(c.dim(), k);
    for (std::size_t r = 0; r < indices.size(); ++r) {
      os << id << ',' << kind << ',' << k << ',' << to_string(indices[r]) << ',' << std::setprecision(17)
         << c[k].values[r] << '\n';
    }
  }
}

inline std::string ring_file(int k) { return "ring_" + std::to_string(k) + ".csv"; }

}  // namespace detail

/// Writes manifest.json and one ring_<k>.csv per ring into `dir`
/// (created if missing).
inline void save_atlas(const Atlas& atlas, const std::string& dir, double x1_limit = 1.5) {
  namespace fs = std::filesystem;
  using detail::json;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("save", "cannot create " + dir + ": " + ec.message());

  std::vector<std::vector<int>> by_ring(atlas.rings.size() + 1);
  by_ring[0].push_back(0);
  for (const Ring& r : atlas.rings) by_ring[static_cast<std::size_t>(r.index)] = r.patch_ids;

  json manifest;
  manifest["format"] = "patchy-atlas";
  manifest["version"] = kAtlasFormatVersion;
  manifest["problem"] = atlas.problem_name;
  manifest["x1_limit"] = x1_limit;
  manifest["options"] = detail::options_json(atlas.options);
  manifest["c0"] = atlas.c0;
  manifest["albrekht_boundary"] = detail::polyline_json(atlas.albrekht_boundary);
  manifest["patch_count"] = atlas.patches.size();
  json rings = json::array();
  for (std::size_t k = 0; k < by_ring.size(); ++k) {
    json rj;
    rj["index"] = k;
    rj["file"] = detail::ring_file(static_cast<int>(k));
    rj["patch_ids"] = by_ring[k];
    if (k > 0) {
      const Ring& r = atlas.rings[k - 1];
      rj["inner_level"] = r.inner_level;
      rj["level"] = r.level;
      json rays = json::array();
      for (const LateralRay& ray : r.rays) {
        rays.push_back({{"anchor", detail::vec_json(ray.anchor)}, {"direction", detail::vec_json(ray.direction)},
                        {"owner", ray.owner}});
      }
      rj["rays"] = rays;
      rj["boundary"] = detail::polyline_json(r.boundary);
    } else {
      rj["inner_level"] = 0.0;
      rj["level"] = atlas.c0;
    }
    rings.push_back(rj);
  }
  manifest["rings"] = rings;
  json patches = json::array();
  for (const AtlasPatch& p : atlas.patches) {
    json pj{{"id", p.id},
            {"ring", p.geom.ring},
            {"index", p.geom.index},
            {"parent", p.sol.parent},
            {"point", detail::vec_json(p.sol.point)},
            {"direction", detail::vec_json(p.sol.direction)},
            {"c_in", p.geom.c_in},
            {"c_out", p.geom.c_out},
            {"chord_margin", p.geom.chord_margin},
            {"reach", p.geom.reach}};
    if (p.geom.chord_mid.size() == 2) {
      pj["chord_mid"] = detail::vec_json(p.geom.chord_mid);
      pj["chord_normal"] = detail::vec_json(p.geom.chord_normal);
    }
    patches.push_back(pj);
  }
  manifest["patches"] = patches;

  {
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) throw Error("save", "cannot write manifest in " + dir);
    out << manifest.dump() << '\n';
  }
  for (std::size_t k = 0; k < by_ring.size(); ++k) {
    std::ofstream out(fs::path(dir) / detail::ring_file(static_cast<int>(k)));
    if (!out) throw Error("save", "cannot write " + detail::ring_file(static_cast<int>(k)));
    out << "patch,poly,order,exponents,value\n";
    for (int id : by_ring[k]) {
      detail::write_poly_rows(out, id, "cost", atlas.cost(id));
      detail::write_poly_rows(out, id, "control", atlas.patch(id).sol.control);
    }
  }
}

struct LoadedAtlas {
  Atlas atlas;
  double x1_limit = 1.5;
};

inline LoadedAtlas load_atlas(const std::string& dir) {
  namespace fs = std::filesystem;
  using detail::json;
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw Error("load", "no manifest.json in " + dir);
  json m;
  try {
    in >> m;
  } catch (const std::exception& e) {
    throw Error("load", std::string("manifest is not valid JSON: ") + e.what());
  }
  if (m.value("format", "") != "patchy-atlas") throw Error("load", "not an atlas manifest");
  if (m.value("version", 0) != kAtlasFormatVersion) throw Error("load", "unsupported atlas format version");

  LoadedAtlas out;
  Atlas& a = out.atlas;
  try {
    out.x1_limit = m.at("x1_limit").get<double>();
    a.problem_name = m.at("problem").get<std::string>();
    a.options = detail::json_options(m.at("options"));
    a.c0 = m.at("c0").get<double>();
    a.albrekht_boundary = detail::json_polyline(m.at("albrekht_boundary"));
    const int d = a.options.degree;
    for (const auto& pj : m.at("patches")) {
      AtlasPatch p;
      p.id = pj.at("id").get<int>();
      if (p.id != static_cast<int>(a.patches.size())) throw Error("load", "patch ids must be consecutive from 0");
      p.geom.ring = pj.at("ring").get<int>();
      p.geom.index = pj.at("index").get<int>();
      p.sol.parent = pj.at("parent").get<int>();
      p.sol.point = detail::json_vec(pj.at("point"));
      p.sol.direction = detail::json_vec(pj.at("direction"));
      p.geom.c_in = pj.at("c_in").get<double>();
      p.geom.c_out = pj.at("c_out").get<double>();
      p.geom.chord_margin = pj.at("chord_margin").get<double>();
      p.geom.reach = pj.at("reach").get<double>();
      if (pj.contains("chord_mid")) {
        p.geom.chord_mid = detail::json_vec(pj["chord_mid"]);
        p.geom.chord_normal = detail::json_vec(pj["chord_normal"]);
      }
      p.sol.cost = CoeffSet(2, d + 1, p.sol.point);
      p.sol.control = CoeffSet(2, d, p.sol.point);
      a.patches.push_back(std::move(p));
    }
    const auto& rings = m.at("rings");
    for (const auto& rj : rings) {
      const int k = rj.at("index").get<int>();
      if (k > 0) {
        Ring r;
        r.index = k;
        r.inner_level = rj.at("inner_level").get<double>();
        r.level = rj.at("level").get<double>();
        r.patch_ids = rj.at("patch_ids").get<std::vector<int>>();
        for (const auto& ray : rj.at("rays")) {
          r.rays.push_back({detail::json_vec(ray.at("anchor")), detail::json_vec(ray.at("direction")), ray.at("owner").get<int>()});
        }
        r.boundary = detail::json_polyline(rj.at("boundary"));
        a.rings.push_back(std::move(r));
      }
      std::ifstream csv(fs::path(dir) / rj.at("file").get<std::string>());
      if (!csv) throw Error("load", "missing " + rj.at("file").get<std::string>());
      std::string line;
      std::getline(csv, line);
      while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id_s, kind, order_s, exps, value;
        if (!std::getline(ss, id_s, ',') || !std::getline(ss, kind, ',') || !std::getline(ss, order_s, ',') ||
            !std::getline(ss, exps, ',') || !std::getline(ss, value)) {
          throw Error("load", "malformed row: " + line);
        }
        const int id = std::stoi(id_s);
        if (id < 0 || id >= static_cast<int>(a.patches.size())) throw Error("load", "row refers to unknown patch " + id_s);
        MultiIndex alpha;
        std::istringstream es(exps);
        int e;
        while (es >> e) alpha.push_back(e);
        if (kind != "cost" && kind != "control") throw Error("load", "unknown polynomial kind '" + kind + "'");
        CoeffSet& c = kind == "cost" ? a.patches[static_cast<std::size_t>(id)].sol.cost
                                     : a.patches[static_cast<std::size_t>(id)].sol.control;
        if (static_cast<int>(alpha.size()) != 2 || order_of(alpha) > c.max_order()) {
          throw Error("load", "bad multi-index in row: " + line);
        }
        c[order_of(alpha)].at(alpha) = std::stod(value);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("load", std::string("manifest field error: ") + e.what());
  }
  if (a.patches.empty()) throw Error("load", "atlas has no patches");
  a.albrekht.cost = a.patches.front().sol.cost;
  a.albrekht.control = a.patches.front().sol.control;
  return out;
}

}  // namespace patchy
