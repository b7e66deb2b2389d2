#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "layoutgen/scene.hpp"

namespace layoutgen {

/// Parses a scene-graph document. Semantic errors (unknown relation,
/// dangling or duplicate ids, duplicate edges) carry the line of the
/// offending entry. Objects and edges keep document order.
SceneGraph parse_graph(std::string_view text);
SceneGraph load_graph(const std::string& path);

/// Canonical pretty-printed document: objects by id, edges in
/// canonical_less order.
std::string serialize_graph(const SceneGraph& g);
void save_graph(const SceneGraph& g, const std::string& path);

nlohmann::json graph_to_json(const SceneGraph& g);
/// Structural conversion without position information; throws ParseError
/// with line 0 on schema violations.
SceneGraph graph_from_json(const nlohmann::json& doc);

enum class ConflictKind { kAntisymmetricDuplicate, kProximityContradiction };

std::string_view conflict_kind_name(ConflictKind k);

struct Conflict {
  RelationEdge first;
  RelationEdge second;
  ConflictKind kind = ConflictKind::kAntisymmetricDuplicate;
};

struct ConflictReport {
  std::vector<Conflict> conflicts;

  bool empty() const { return conflicts.empty(); }
  std::size_t size() const { return conflicts.size(); }
};

struct ConflictOptions {
  /// Restricts the antisymmetry check to {in, in-front-of, left-of}; the
  /// default also covers top-of.
  bool strict = false;
};

/// One entry per conflicting edge pair, in canonical edge order.
ConflictReport detect_conflicts(const SceneGraph& g,
                                ConflictOptions options = {});

/// Distinct relation types used, over the 10-relation vocabulary.
double relationship_coverage(const SceneGraph& g);

/// Edge endpoints per object: binary edges count twice, unary once.
double mean_degree(const SceneGraph& g);

/// {"canvas": {...}, "boxes": {id: {"cx", "cy", "ew", "eh"}}}
nlohmann::json layout_to_json(const Layout& layout);
Layout layout_from_json(const nlohmann::json& doc);
void save_layout(const Layout& layout, const std::string& path);
/// Accepts a layout document or a dataset record (its "layout" member).
Layout load_layout(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace layoutgen
