#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace layoutgen {

/// Physical object dimensions in inches: width, length (depth), height.
struct SizeInches {
  double width = 0.0;
  double length = 0.0;
  double height = 0.0;

  bool operator==(const SizeInches&) const = default;
};

struct ObjectSpec {
  std::string id;
  SizeInches size;
  std::vector<std::string> attributes;

  bool operator==(const ObjectSpec&) const = default;
};

struct Canvas {
  double width = 1024.0;
  double height = 1024.0;

  bool operator==(const Canvas&) const = default;
};

enum class RelationType {
  kInScene,
  kRightInScene,
  kLeftInScene,
  kIn,
  kLeftOf,
  kTopOf,
  kCloseTo,
  kAwayFrom,
  kOverlapping,
  kInFrontOf,
};

inline constexpr std::size_t kRelationCount = 10;

inline constexpr std::array<RelationType, kRelationCount> kAllRelations = {
    RelationType::kInScene,  RelationType::kRightInScene,
    RelationType::kLeftInScene, RelationType::kIn,
    RelationType::kLeftOf,   RelationType::kTopOf,
    RelationType::kCloseTo,  RelationType::kAwayFrom,
    RelationType::kOverlapping, RelationType::kInFrontOf,
};

/// Unary relations reference one object and the scene.
bool is_unary(RelationType r);
std::string_view relation_name(RelationType r);
/// Throws InvalidArgument for names outside the vocabulary.
RelationType relation_from_name(std::string_view name);
inline std::size_t relation_index(RelationType r) {
  return static_cast<std::size_t>(r);
}

/// Object id used as the target of unary edges.
inline constexpr std::string_view kSceneSentinel = "scene";

struct RelationEdge {
  RelationType relation = RelationType::kInScene;
  std::string subject;
  std::string object;

  bool operator==(const RelationEdge&) const = default;
};

/// Orders edges by (relation name, subject, object), the canonical order.
bool canonical_less(const RelationEdge& a, const RelationEdge& b);
std::string to_string(const RelationEdge& e);

struct SceneGraph {
  std::vector<ObjectSpec> objects;
  std::vector<RelationEdge> edges;
  Canvas canvas;
  std::string scene_label;

  bool operator==(const SceneGraph&) const = default;

  const ObjectSpec* find(std::string_view id) const;
};

/// Throws InvalidArgument naming the first violated invariant.
void validate(const SceneGraph& g);
/// Objects sorted by id, edges in canonical order.
SceneGraph canonicalize(SceneGraph g);

/// Center and extent in normalized canvas units.
struct BoundingBox {
  double cx = 0.5;
  double cy = 0.5;
  double ew = 0.0;
  double eh = 0.0;

  bool operator==(const BoundingBox&) const = default;

  double left() const { return cx - 0.5 * ew; }
  double right() const { return cx + 0.5 * ew; }
  double top() const { return cy - 0.5 * eh; }
  double bottom() const { return cy + 0.5 * eh; }
};

struct PixelRect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;
};

PixelRect to_pixels(const BoundingBox& box, const Canvas& canvas);
BoundingBox from_pixels(const PixelRect& rect, const Canvas& canvas);

struct Layout {
  std::map<std::string, BoundingBox> boxes;
  Canvas canvas;

  bool operator==(const Layout&) const = default;

  /// Throws InvalidArgument when the id has no box.
  const BoundingBox& at(std::string_view id) const;
  /// True when every object of g has a box.
  bool covers(const SceneGraph& g) const;
};

struct Extent {
  double ew = 0.0;
  double eh = 0.0;
};

/// Orthographic projection: width -> ew, height -> eh; length is dropped.
Extent derive_extent(const ObjectSpec& spec, const Canvas& canvas, double ppi);

/// Fraction of the canvas the largest object may span on either axis.
inline constexpr double kMaxExtentFraction = 0.4;

double auto_ppi(std::span<const ObjectSpec> specs, const Canvas& canvas,
                double max_fraction = kMaxExtentFraction);

/// Sizes normalized by canvas at the graph's auto ppi: (w, l) by canvas
/// width, h by canvas height. The model's size conditioning.
std::array<double, 3> normalized_size(const ObjectSpec& spec,
                                      const Canvas& canvas, double ppi);

/// Boxes for every object of g at the given centers (object order of g).
Layout make_layout(const SceneGraph& g, std::span<const double> centers);

/// Centers of layout in object order of g, interleaved (cx, cy).
std::vector<double> centers_of(const SceneGraph& g, const Layout& layout);

}  // namespace layoutgen
