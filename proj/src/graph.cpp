#include "layoutgen/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "layoutgen/error.hpp"

namespace layoutgen {

using nlohmann::json;

namespace {

// Input iterator that publishes how many characters the parser consumed, so
// parse callbacks can recover the source position of each entry.
class CountingIterator {
 public:
  using iterator_category = std::input_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  CountingIterator() = default;
  CountingIterator(const char* p, std::size_t* consumed)
      : p_(p), consumed_(consumed) {}

  reference operator*() const { return *p_; }
  CountingIterator& operator++() {
    ++p_;
    if (consumed_ != nullptr) ++*consumed_;
    return *this;
  }
  CountingIterator operator++(int) {
    CountingIterator tmp = *this;
    ++*this;
    return tmp;
  }
  bool operator==(const CountingIterator& o) const { return p_ == o.p_; }

 private:
  const char* p_ = nullptr;
  std::size_t* consumed_ = nullptr;
};

struct Position {
  std::size_t line = 0;
  std::size_t column = 0;
};

Position position_at(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  Position pos{1, 1};
  for (std::size_t i = 0; i < offset; ++i) {
    if (text[i] == '\n') {
      ++pos.line;
      pos.column = 1;
    } else {
      ++pos.column;
    }
  }
  return pos;
}

// Offsets of the '{' opening each element of the top-level "objects" and
// "edges" arrays.
struct EntryOffsets {
  std::vector<std::size_t> objects;
  std::vector<std::size_t> edges;
};

[[noreturn]] void schema_error(const std::string& msg, Position pos = {}) {
  throw ParseError(ParseError::Kind::kSchema, pos.line, pos.column, msg);
}

const json& require(const json& obj, const char* key, Position pos = {}) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    schema_error(std::string("missing field '") + key + "'", pos);
  }
  return *it;
}

double require_number(const json& obj, const char* key, Position pos) {
  const json& v = require(obj, key, pos);
  if (!v.is_number()) {
    schema_error(std::string("field '") + key + "' must be a number", pos);
  }
  return v.get<double>();
}

std::string require_string(const json& obj, const char* key, Position pos) {
  const json& v = require(obj, key, pos);
  if (!v.is_string()) {
    schema_error(std::string("field '") + key + "' must be a string", pos);
  }
  return v.get<std::string>();
}

SceneGraph build_graph(const json& doc, const EntryOffsets* offsets,
                       std::string_view text) {
  auto entry_pos = [&](const std::vector<std::size_t>* list,
                       std::size_t i) -> Position {
    if (offsets == nullptr || list == nullptr || i >= list->size()) return {};
    return position_at(text, (*list)[i] - 1);
  };
  if (!doc.is_object()) schema_error("document root must be an object");

  SceneGraph g;
  if (auto it = doc.find("scene_label"); it != doc.end()) {
    if (!it->is_string()) schema_error("'scene_label' must be a string");
    g.scene_label = it->get<std::string>();
  }
  if (auto it = doc.find("canvas"); it != doc.end()) {
    if (!it->is_object()) schema_error("'canvas' must be an object");
    g.canvas.width = require_number(*it, "width", {});
    g.canvas.height = require_number(*it, "height", {});
    if (!(g.canvas.width > 0.0) || !(g.canvas.height > 0.0) ||
        !std::isfinite(g.canvas.width) || !std::isfinite(g.canvas.height)) {
      throw ParseError(ParseError::Kind::kInvalidValue, 0, 0,
                       "canvas dimensions must be positive");
    }
  }

  const json& objects = require(doc, "objects");
  if (!objects.is_array()) schema_error("'objects' must be an array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const Position pos =
        entry_pos(offsets != nullptr ? &offsets->objects : nullptr, i);
    const json& o = objects[i];
    if (!o.is_object()) schema_error("object entries must be objects", pos);
    ObjectSpec spec;
    spec.id = require_string(o, "id", pos);
    if (spec.id.empty() || spec.id == kSceneSentinel) {
      throw ParseError(ParseError::Kind::kInvalidValue, pos.line, pos.column,
                       "invalid object id '" + spec.id + "'");
    }
    if (!ids.insert(spec.id).second) {
      throw ParseError(ParseError::Kind::kDuplicateObject, pos.line,
                       pos.column, "duplicate object id '" + spec.id + "'");
    }
    const json& size = require(o, "size_in", pos);
    if (!size.is_array() || size.size() != 3 ||
        !std::all_of(size.begin(), size.end(),
                     [](const json& v) { return v.is_number(); })) {
      schema_error("'size_in' must be [w, l, h]", pos);
    }
    spec.size = {size[0].get<double>(), size[1].get<double>(),
                 size[2].get<double>()};
    if (!(spec.size.width > 0) || !(spec.size.length > 0) ||
        !(spec.size.height > 0) || !std::isfinite(spec.size.width) ||
        !std::isfinite(spec.size.length) || !std::isfinite(spec.size.height)) {
      throw ParseError(ParseError::Kind::kInvalidValue, pos.line, pos.column,
                       "object '" + spec.id + "' needs positive dimensions");
    }
    if (auto it = o.find("attributes"); it != o.end()) {
      if (!it->is_array()) schema_error("'attributes' must be an array", pos);
      for (const auto& a : *it) {
        if (!a.is_string()) schema_error("attributes must be strings", pos);
        spec.attributes.push_back(a.get<std::string>());
      }
    }
    g.objects.push_back(std::move(spec));
  }

  std::set<std::tuple<RelationType, std::string, std::string>> seen;
  if (auto it = doc.find("edges"); it != doc.end()) {
    if (!it->is_array()) schema_error("'edges' must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const Position pos =
          entry_pos(offsets != nullptr ? &offsets->edges : nullptr, i);
      const json& e = (*it)[i];
      if (!e.is_object()) schema_error("edge entries must be objects", pos);
      RelationEdge edge;
      const std::string rel = require_string(e, "rel", pos);
      try {
        edge.relation = relation_from_name(rel);
      } catch (const InvalidArgument&) {
        throw ParseError(ParseError::Kind::kUnknownRelation, pos.line,
                         pos.column, "unknown relation '" + rel + "'");
      }
      edge.subject = require_string(e, "subject", pos);
      edge.object = require_string(e, "object", pos);
      if (!ids.contains(edge.subject)) {
        throw ParseError(ParseError::Kind::kDanglingReference, pos.line,
                         pos.column,
                         "edge references undeclared object '" +
                             edge.subject + "'");
      }
      if (is_unary(edge.relation)) {
        if (edge.object != kSceneSentinel) {
          throw ParseError(ParseError::Kind::kInvalidValue, pos.line,
                           pos.column,
                           "unary relation '" + rel +
                               "' must target \"scene\"");
        }
      } else {
        if (!ids.contains(edge.object)) {
          throw ParseError(ParseError::Kind::kDanglingReference, pos.line,
                           pos.column,
                           "edge references undeclared object '" +
                               edge.object + "'");
        }
        if (edge.object == edge.subject) {
          throw ParseError(ParseError::Kind::kInvalidValue, pos.line,
                           pos.column, "binary edge is a self loop");
        }
      }
      if (!seen.emplace(edge.relation, edge.subject, edge.object).second) {
        throw ParseError(ParseError::Kind::kDuplicateEdge, pos.line,
                         pos.column, "duplicate edge " + to_string(edge));
      }
      g.edges.push_back(std::move(edge));
    }
  }
  return g;
}

}  // namespace

SceneGraph parse_graph(std::string_view text) {
  std::size_t consumed = 0;
  EntryOffsets offsets;
  std::string section;
  json::parser_callback_t cb = [&](int depth, json::parse_event_t event,
                                   json& parsed) {
    if (event == json::parse_event_t::key && depth == 1) {
      section = parsed.get<std::string>();
    } else if (event == json::parse_event_t::object_start && depth == 2) {
      if (section == "objects") offsets.objects.push_back(consumed);
      if (section == "edges") offsets.edges.push_back(consumed);
    }
    return true;
  };
  json doc;
  try {
    doc = json::parse(CountingIterator(text.data(), &consumed),
                      CountingIterator(text.data() + text.size(), nullptr), cb);
  } catch (const json::parse_error& e) {
    const Position pos = position_at(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError(ParseError::Kind::kSyntax, pos.line, pos.column,
                     e.what());
  }
  return build_graph(doc, &offsets, text);
}

SceneGraph graph_from_json(const json& doc) {
  return build_graph(doc, nullptr, {});
}

json graph_to_json(const SceneGraph& g) {
  const SceneGraph c = canonicalize(g);
  json doc = json::object();
  doc["scene_label"] = c.scene_label;
  doc["canvas"] = {{"width", c.canvas.width}, {"height", c.canvas.height}};
  json objects = json::array();
  for (const auto& o : c.objects) {
    objects.push_back({{"id", o.id},
                       {"size_in", {o.size.width, o.size.length, o.size.height}},
                       {"attributes", o.attributes}});
  }
  doc["objects"] = std::move(objects);
  json edges = json::array();
  for (const auto& e : c.edges) {
    edges.push_back({{"rel", relation_name(e.relation)},
                     {"subject", e.subject},
                     {"object", e.object}});
  }
  doc["edges"] = std::move(edges);
  return doc;
}

std::string serialize_graph(const SceneGraph& g) {
  return graph_to_json(g).dump(2) + "\n";
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

SceneGraph load_graph(const std::string& path) {
  return parse_graph(read_text_file(path));
}

void save_graph(const SceneGraph& g, const std::string& path) {
  write_text_file(path, serialize_graph(g));
}

json layout_to_json(const Layout& layout) {
  json boxes = json::object();
  for (const auto& [id, b] : layout.boxes) {
    boxes[id] = {{"cx", b.cx}, {"cy", b.cy}, {"ew", b.ew}, {"eh", b.eh}};
  }
  return {{"canvas",
           {{"width", layout.canvas.width}, {"height", layout.canvas.height}}},
          {"boxes", std::move(boxes)}};
}

Layout layout_from_json(const json& doc) {
  const json* src = &doc;
  if (doc.is_object() && doc.contains("layout")) src = &doc.at("layout");
  if (!src->is_object()) schema_error("layout document must be an object");
  Layout layout;
  if (auto it = src->find("canvas"); it != src->end()) {
    layout.canvas.width = require_number(*it, "width", {});
    layout.canvas.height = require_number(*it, "height", {});
  }
  const json& boxes = require(*src, "boxes");
  if (!boxes.is_object()) schema_error("'boxes' must be an object");
  for (const auto& [id, b] : boxes.items()) {
    BoundingBox box{require_number(b, "cx", {}), require_number(b, "cy", {}),
                    require_number(b, "ew", {}), require_number(b, "eh", {})};
    if (!(box.ew > 0.0) || !(box.eh > 0.0)) {
      throw ParseError(ParseError::Kind::kInvalidValue, 0, 0,
                       "box '" + id + "' needs positive extent");
    }
    layout.boxes[id] = box;
  }
  return layout;
}

void save_layout(const Layout& layout, const std::string& path) {
  write_text_file(path, layout_to_json(layout).dump(2) + "\n");
}

Layout load_layout(const std::string& path) {
  const std::string text = read_text_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const Position pos = position_at(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError(ParseError::Kind::kSyntax, pos.line, pos.column,
                     e.what());
  }
  return layout_from_json(doc);
}

std::string_view conflict_kind_name(ConflictKind k) {
  switch (k) {
    case ConflictKind::kAntisymmetricDuplicate:
      return "antisymmetric-duplicate";
    case ConflictKind::kProximityContradiction:
      return "proximity-contradiction";
  }
  return "unknown";
}

ConflictReport detect_conflicts(const SceneGraph& g, ConflictOptions options) {
  auto antisymmetric = [&](RelationType r) {
    switch (r) {
      case RelationType::kIn:
      case RelationType::kInFrontOf:
      case RelationType::kLeftOf:
        return true;
      case RelationType::kTopOf:
        return !options.strict;
      default:
        return false;
    }
  };

  std::vector<RelationEdge> edges = g.edges;
  std::sort(edges.begin(), edges.end(), canonical_less);

  ConflictReport report;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& a = edges[i];
    if (is_unary(a.relation)) continue;
    for (std::size_t j = i + 1; j < edges.size(); ++j) {
      const auto& b = edges[j];
      if (is_unary(b.relation)) continue;
      const bool same_pair = (a.subject == b.subject && a.object == b.object) ||
                             (a.subject == b.object && a.object == b.subject);
      if (!same_pair) continue;
      if (a.relation == b.relation && antisymmetric(a.relation) &&
          a.subject == b.object) {
        report.conflicts.push_back(
            {a, b, ConflictKind::kAntisymmetricDuplicate});
      }
      const bool proximity =
          (a.relation == RelationType::kCloseTo &&
           b.relation == RelationType::kAwayFrom) ||
          (a.relation == RelationType::kAwayFrom &&
           b.relation == RelationType::kCloseTo);
      if (proximity) {
        report.conflicts.push_back(
            {a, b, ConflictKind::kProximityContradiction});
      }
    }
  }
  return report;
}

double relationship_coverage(const SceneGraph& g) {
  std::set<RelationType> used;
  for (const auto& e : g.edges) used.insert(e.relation);
  return static_cast<double>(used.size()) / static_cast<double>(kRelationCount);
}

double mean_degree(const SceneGraph& g) {
  if (g.objects.empty()) {
    throw InvalidArgument("mean_degree of a graph without objects");
  }
  std::size_t endpoints = 0;
  for (const auto& e : g.edges) endpoints += is_unary(e.relation) ? 1 : 2;
  return static_cast<double>(endpoints) /
         static_cast<double>(g.objects.size());
}

}  // namespace layoutgen
