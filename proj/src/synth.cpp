#include "layoutgen/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "layoutgen/error.hpp"
#include "layoutgen/graph.hpp"
#include "layoutgen/random.hpp"

namespace layoutgen {

using nlohmann::json;

namespace {

constexpr std::uint64_t kGraphStream = 1;
constexpr std::uint64_t kLayoutStream = 2;

Archetype nominal(std::string name, double w, double l, double h,
                  std::vector<std::string> attrs) {
  // +-10% around the nominal size.
  return {std::move(name),
          {0.9 * w, 0.9 * l, 0.9 * h},
          {1.1 * w, 1.1 * l, 1.1 * h},
          std::move(attrs)};
}

double round_tenth(double v) { return std::round(v * 10.0) / 10.0; }

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

json size_json(const SizeInches& s) {
  return json::array({s.width, s.length, s.height});
}

SizeInches size_from(const json& v) {
  if (!v.is_array() || v.size() != 3) {
    throw InvalidArgument("sizes must be [w, l, h]");
  }
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

}  // namespace

std::vector<Archetype> default_archetypes() {
  return {
      nominal("bed", 80, 60, 24, {"furniture", "bedroom"}),
      nominal("lamp", 8, 8, 24, {"lighting"}),
      nominal("nightstand", 20, 16, 24, {"furniture", "bedroom"}),
      nominal("wardrobe", 48, 24, 72, {"furniture", "storage"}),
      nominal("sofa", 84, 36, 34, {"furniture", "seating"}),
      nominal("coffee_table", 48, 24, 18, {"furniture", "table"}),
      nominal("armchair", 32, 34, 36, {"furniture", "seating"}),
      nominal("tv_stand", 60, 18, 24, {"furniture", "media"}),
      nominal("plant", 14, 14, 36, {"decor"}),
      nominal("bookshelf", 36, 12, 72, {"furniture", "storage"}),
      nominal("billiard_table", 100, 56, 31, {"furniture", "table"}),
      nominal("bar_stool", 16, 16, 30, {"furniture", "seating"}),
      nominal("cue_rack", 24, 6, 48, {"storage"}),
      nominal("workbench", 60, 24, 36, {"furniture", "table"}),
      nominal("tool_chest", 30, 18, 40, {"storage"}),
      nominal("bicycle", 68, 24, 40, {"vehicle"}),
  };
}

const Archetype* find_archetype(const std::vector<Archetype>& table,
                                const std::string& name) {
  for (const auto& a : table) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

GeneratorConfig::GeneratorConfig() {
  for (RelationType r : kAllRelations) {
    if (r != RelationType::kInScene) relation_weights[r] = 1.0;
  }
}

void GeneratorConfig::validate() const {
  if (min_objects < 1 || max_objects < min_objects) {
    throw InvalidArgument("object-count range must be nonempty and >= 1");
  }
  if (min_binary_edges < 0 || max_binary_edges < min_binary_edges) {
    throw InvalidArgument("edge-count range must be nonempty");
  }
  if (archetypes.empty()) throw InvalidArgument("no archetypes configured");
  for (const auto& a : archetypes) {
    if (!(a.size_min.width > 0) || !(a.size_min.length > 0) ||
        !(a.size_min.height > 0) || a.size_max.width < a.size_min.width ||
        a.size_max.length < a.size_min.length ||
        a.size_max.height < a.size_min.height) {
      throw InvalidArgument("archetype '" + a.name +
                            "' has an empty size range");
    }
  }
  double total = 0.0;
  for (const auto& [r, w] : relation_weights) {
    if (r == RelationType::kInScene) {
      throw InvalidArgument("in-scene is implicit and takes no weight");
    }
    if (!(w >= 0.0)) throw InvalidArgument("relation weights must be >= 0");
    total += w;
  }
  if (max_binary_edges > 0 && !(total > 0.0)) {
    throw InvalidArgument("at least one relation weight must be positive");
  }
  if (max_attempts <= 0) throw InvalidArgument("max_attempts must be > 0");
  if (retry_budget <= 0) throw InvalidArgument("retry_budget must be > 0");
  rules.validate();
}

GeneratorConfig generator_config_from_json(const json& doc) {
  GeneratorConfig cfg;
  try {
    cfg.min_objects = doc.value("min_objects", cfg.min_objects);
    cfg.max_objects = doc.value("max_objects", cfg.max_objects);
    cfg.min_binary_edges = doc.value("min_binary_edges", cfg.min_binary_edges);
    cfg.max_binary_edges = doc.value("max_binary_edges", cfg.max_binary_edges);
    cfg.max_attempts = doc.value("max_attempts", cfg.max_attempts);
    cfg.retry_budget = doc.value("retry_budget", cfg.retry_budget);
    cfg.scene_label = doc.value("scene_label", cfg.scene_label);
    if (doc.contains("canvas")) {
      cfg.canvas.width = doc["canvas"].at("width").get<double>();
      cfg.canvas.height = doc["canvas"].at("height").get<double>();
    }
    if (doc.contains("rules")) {
      cfg.rules.close_threshold =
          doc["rules"].value("close_threshold", cfg.rules.close_threshold);
      cfg.rules.away_threshold =
          doc["rules"].value("away_threshold", cfg.rules.away_threshold);
    }
    if (doc.contains("relation_weights")) {
      cfg.relation_weights.clear();
      for (const auto& [name, w] : doc["relation_weights"].items()) {
        cfg.relation_weights[relation_from_name(name)] = w.get<double>();
      }
    }
    if (doc.contains("archetypes")) {
      cfg.archetypes.clear();
      for (const auto& a : doc["archetypes"]) {
        Archetype arch;
        arch.name = a.at("name").get<std::string>();
        if (a.contains("size_in")) {
          // Nominal size with an optional relative spread on every axis.
          const SizeInches nominal = size_from(a["size_in"]);
          const double spread = a.value("spread", 0.0);
          if (!(spread >= 0.0) || spread >= 1.0) {
            throw InvalidArgument("archetype spread must lie in [0, 1)");
          }
          arch.size_min = {nominal.width * (1.0 - spread), nominal.length * (1.0 - spread),
                           nominal.height * (1.0 - spread)};
          arch.size_max = {nominal.width * (1.0 + spread), nominal.length * (1.0 + spread),
                           nominal.height * (1.0 + spread)};
        } else {
          arch.size_min = size_from(a.at("size_min_in"));
          arch.size_max = size_from(a.at("size_max_in"));
        }
        arch.attributes =
            a.value("attributes", std::vector<std::string>{});
        cfg.archetypes.push_back(std::move(arch));
      }
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("generator config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json generator_config_to_json(const GeneratorConfig& cfg) {
  json weights = json::object();
  for (const auto& [r, w] : cfg.relation_weights) {
    weights[std::string(relation_name(r))] = w;
  }
  json archetypes = json::array();
  for (const auto& a : cfg.archetypes) {
    archetypes.push_back({{"name", a.name},
                          {"size_min_in", size_json(a.size_min)},
                          {"size_max_in", size_json(a.size_max)},
                          {"attributes", a.attributes}});
  }
  return {{"min_objects", cfg.min_objects},
          {"max_objects", cfg.max_objects},
          {"min_binary_edges", cfg.min_binary_edges},
          {"max_binary_edges", cfg.max_binary_edges},
          {"max_attempts", cfg.max_attempts},
          {"retry_budget", cfg.retry_budget},
          {"scene_label", cfg.scene_label},
          {"canvas", {{"width", cfg.canvas.width}, {"height", cfg.canvas.height}}},
          {"rules",
           {{"close_threshold", cfg.rules.close_threshold},
            {"away_threshold", cfg.rules.away_threshold}}},
          {"relation_weights", std::move(weights)},
          {"archetypes", std::move(archetypes)}};
}

SceneGraph sample_graph(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  SceneGraph g;
  g.canvas = cfg.canvas;
  g.scene_label = cfg.scene_label;

  const int n_objects =
      std::uniform_int_distribution<int>(cfg.min_objects, cfg.max_objects)(rng);
  std::vector<std::size_t> order(cfg.archetypes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  std::map<std::string, int> name_uses;
  for (int i = 0; i < n_objects; ++i) {
    const Archetype& arch = cfg.archetypes[order[static_cast<std::size_t>(i) % order.size()]];
    const int use = ++name_uses[arch.name];
    ObjectSpec spec;
    spec.id = use == 1 ? arch.name : arch.name + "_" + std::to_string(use);
    spec.size = {round_tenth(uniform(rng, arch.size_min.width, arch.size_max.width)),
                 round_tenth(uniform(rng, arch.size_min.length, arch.size_max.length)),
                 round_tenth(uniform(rng, arch.size_min.height, arch.size_max.height))};
    spec.size.width = std::max(spec.size.width, 0.1);
    spec.size.length = std::max(spec.size.length, 0.1);
    spec.size.height = std::max(spec.size.height, 0.1);
    spec.attributes = arch.attributes;
    spec.attributes.insert(spec.attributes.begin(), arch.name);
    g.objects.push_back(std::move(spec));
  }
  for (const auto& o : g.objects) {
    g.edges.push_back({RelationType::kInScene, o.id, std::string(kSceneSentinel)});
  }

  std::vector<RelationType> rels;
  std::vector<double> weights;
  for (const auto& [r, w] : cfg.relation_weights) {
    if (w > 0.0) {
      rels.push_back(r);
      weights.push_back(w);
    }
  }
  if (rels.empty()) return canonicalize(std::move(g));
  std::discrete_distribution<std::size_t> pick_rel(weights.begin(), weights.end());

  const int n_edges = std::uniform_int_distribution<int>(
      cfg.min_binary_edges, cfg.max_binary_edges)(rng);
  std::set<std::pair<std::size_t, std::size_t>> used_pairs;
  std::set<std::pair<RelationType, std::size_t>> used_unary;
  const std::size_t n = g.objects.size();
  for (int k = 0; k < n_edges; ++k) {
    const RelationType r = rels[pick_rel(rng)];
    if (is_unary(r)) {
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i) {
        if (!used_unary.contains({r, i})) free.push_back(i);
      }
      if (free.empty()) continue;
      const std::size_t i =
          free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
      used_unary.insert({r, i});
      g.edges.push_back({r, g.objects[i].id, std::string(kSceneSentinel)});
      continue;
    }
    std::vector<std::pair<std::size_t, std::size_t>> free;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!used_pairs.contains({i, j})) free.emplace_back(i, j);
      }
    }
    if (free.empty()) break;
    auto [i, j] =
        free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
    used_pairs.insert({i, j});
    if (std::bernoulli_distribution(0.5)(rng)) std::swap(i, j);
    g.edges.push_back({r, g.objects[i].id, g.objects[j].id});
  }
  return canonicalize(std::move(g));
}

LayoutSample sample_layout_with_stats(const SceneGraph& g,
                                      const GeneratorConfig& cfg,
                                      std::uint64_t seed) {
  validate(g);
  cfg.rules.validate();
  Rng rng(seed);
  const std::size_t n = g.objects.size();
  const double ppi = auto_ppi(g.objects, g.canvas);
  std::vector<Extent> extents;
  std::vector<bool> on_canvas(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    extents.push_back(derive_extent(g.objects[i], g.canvas, ppi));
  }
  for (const auto& e : g.edges) {
    if (e.relation != RelationType::kInScene) continue;
    for (std::size_t i = 0; i < n; ++i) {
      if (g.objects[i].id == e.subject) on_canvas[i] = true;
    }
  }

  auto proposal = [&](double extent, bool inside) -> std::pair<double, double> {
    if (inside && extent < 1.0) return {0.5 * extent, 1.0 - 0.5 * extent};
    return {0.0, 1.0};
  };

  std::vector<std::size_t> fail_counts(g.edges.size(), 0);
  std::vector<std::size_t> best_failing;
  bool have_best = false;
  Layout layout;
  layout.canvas = g.canvas;
  for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto [x0, x1] = proposal(extents[i].ew, on_canvas[i]);
      const auto [y0, y1] = proposal(extents[i].eh, on_canvas[i]);
      const double cx = uniform(rng, x0, x1);
      const double cy = uniform(rng, y0, y1);
      layout.boxes[g.objects[i].id] = {cx, cy, extents[i].ew, extents[i].eh};
    }
    std::vector<std::size_t> failing;
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
      if (!holds(g.edges[k], layout, cfg.rules)) {
        failing.push_back(k);
        ++fail_counts[k];
      }
    }
    if (failing.empty()) return {std::move(layout), attempt};
    if (!have_best || failing.size() < best_failing.size()) {
      best_failing = failing;
      have_best = true;
    }
  }
  std::vector<std::string> names;
  std::string msg = "no layout satisfies all predicates after " +
                    std::to_string(cfg.max_attempts) +
                    " attempts; closest attempt failed:";
  for (std::size_t k : best_failing) {
    names.push_back(to_string(g.edges[k]));
    msg += " " + names.back();
  }
  throw UnsatisfiableGraph(std::move(names), msg);
}

Layout sample_layout(const SceneGraph& g, const GeneratorConfig& cfg,
                     std::uint64_t seed) {
  return sample_layout_with_stats(g, cfg, seed).layout;
}

DatasetRecord make_record(const GeneratorConfig& cfg, std::uint64_t seed) {
  DatasetRecord rec;
  rec.seed = seed;
  rec.graph = sample_graph(cfg, derive_seed(seed, kGraphStream));
  rec.layout = sample_layout(rec.graph, cfg, derive_seed(seed, kLayoutStream));
  return rec;
}

namespace {

template <typename Sink>
void generate_into(const GeneratorConfig& cfg, int n, std::uint64_t seed,
                   Sink&& sink) {
  if (n <= 0) throw InvalidArgument("dataset size must be positive");
  cfg.validate();
  for (int i = 0; i < n; ++i) {
    const std::uint64_t base = derive_seed(seed, static_cast<std::uint64_t>(i));
    for (int retry = 0;; ++retry) {
      const std::uint64_t s =
          retry == 0 ? base : derive_seed(base, static_cast<std::uint64_t>(retry));
      try {
        sink(make_record(cfg, s));
        break;
      } catch (const UnsatisfiableGraph&) {
        if (retry + 1 >= cfg.retry_budget) throw;
      }
    }
  }
}

}  // namespace

std::vector<DatasetRecord> generate_dataset(const GeneratorConfig& cfg, int n,
                                            std::uint64_t seed) {
  std::vector<DatasetRecord> out;
  if (n > 0) out.reserve(static_cast<std::size_t>(n));
  generate_into(cfg, n, seed,
                [&](DatasetRecord&& rec) { out.push_back(std::move(rec)); });
  return out;
}

void generate_dataset_to_file(const GeneratorConfig& cfg, int n,
                              std::uint64_t seed, const std::string& path) {
  if (n <= 0) throw InvalidArgument("dataset size must be positive");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  generate_into(cfg, n, seed,
                [&](DatasetRecord&& rec) { out << record_to_line(rec) << '\n'; });
  if (!out) throw IoError("failed writing '" + path + "'");
}

json record_to_json(const DatasetRecord& rec) {
  return {{"seed", rec.seed},
          {"graph", graph_to_json(rec.graph)},
          {"layout", layout_to_json(rec.layout)}};
}

DatasetRecord record_from_json(const json& doc) {
  DatasetRecord rec;
  if (!doc.is_object() || !doc.contains("graph") || !doc.contains("layout")) {
    throw FormatError("dataset record needs 'graph' and 'layout'");
  }
  rec.seed = doc.value("seed", std::uint64_t{0});
  rec.graph = graph_from_json(doc["graph"]);
  rec.layout = layout_from_json(doc["layout"]);
  if (!rec.layout.covers(rec.graph)) {
    throw FormatError("dataset record layout does not cover its graph");
  }
  return rec;
}

std::string record_to_line(const DatasetRecord& rec) {
  return record_to_json(rec).dump();
}

void write_dataset(const std::vector<DatasetRecord>& records,
                   const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (const auto& r : records) out << record_to_line(r) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<DatasetRecord> read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::vector<DatasetRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace layoutgen
