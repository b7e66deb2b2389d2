#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "layoutgen/relations.hpp"
#include "layoutgen/scene.hpp"

namespace layoutgen {

struct Archetype {
  std::string name;
  SizeInches size_min;
  SizeInches size_max;
  std::vector<std::string> attributes;
};

/// Built-in furniture table; also shipped as data/archetypes.json.
std::vector<Archetype> default_archetypes();
const Archetype* find_archetype(const std::vector<Archetype>& table,
                                const std::string& name);

struct GeneratorConfig {
  int min_objects = 2;
  int max_objects = 4;
  int min_binary_edges = 1;
  int max_binary_edges = 2;
  std::vector<Archetype> archetypes = default_archetypes();
  /// Sampling weights over every relation except in-scene, which is added
  /// implicitly for every object.
  std::map<RelationType, double> relation_weights;
  int max_attempts = 10000;
  /// Graph resamples per record before generate_dataset gives up.
  int retry_budget = 50;
  RuleConfig rules;
  Canvas canvas;
  std::string scene_label = "bedroom";

  GeneratorConfig();
  void validate() const;
};

GeneratorConfig generator_config_from_json(const nlohmann::json& doc);
nlohmann::json generator_config_to_json(const GeneratorConfig& cfg);

/// Conflict-free graph: in-scene for every object, at most one binary edge
/// per unordered object pair. Returned in canonical order.
SceneGraph sample_graph(const GeneratorConfig& cfg, std::uint64_t seed);

struct LayoutSample {
  Layout layout;
  int attempts = 0;
};

/// Rejection sampling of centers, uniform over the feasible set. Objects
/// bound by in-scene propose only centers that keep them on canvas, which
/// leaves the accepted distribution unchanged.
LayoutSample sample_layout_with_stats(const SceneGraph& g,
                                      const GeneratorConfig& cfg,
                                      std::uint64_t seed);
Layout sample_layout(const SceneGraph& g, const GeneratorConfig& cfg,
                     std::uint64_t seed);

struct DatasetRecord {
  SceneGraph graph;
  Layout layout;
  std::uint64_t seed = 0;
};

/// Graph and layout both derived from one record seed.
DatasetRecord make_record(const GeneratorConfig& cfg, std::uint64_t seed);

std::vector<DatasetRecord> generate_dataset(const GeneratorConfig& cfg, int n,
                                            std::uint64_t seed);

/// Streams records to a JSON-lines file as they are produced.
void generate_dataset_to_file(const GeneratorConfig& cfg, int n,
                              std::uint64_t seed, const std::string& path);

nlohmann::json record_to_json(const DatasetRecord& rec);
DatasetRecord record_from_json(const nlohmann::json& doc);
std::string record_to_line(const DatasetRecord& rec);

void write_dataset(const std::vector<DatasetRecord>& records,
                   const std::string& path);
std::vector<DatasetRecord> read_dataset(const std::string& path);

}  // namespace layoutgen
