#include "layoutgen/scene.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "layoutgen/error.hpp"

namespace layoutgen {

ParseError::ParseError(Kind kind, std::size_t line, std::size_t column,
                       const std::string& message)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) +
                                        ", column " + std::to_string(column) +
                                        ": " + message
                                  : message),
      kind_(kind),
      line_(line),
      column_(column) {}

namespace {

constexpr std::array<std::string_view, kRelationCount> kNames = {
    "in-scene", "right-in-scene", "left-in-scene", "in",
    "left-of",  "top-of",         "close-to",      "away-from",
    "overlapping", "in-front-of",
};

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

bool is_unary(RelationType r) {
  return r == RelationType::kInScene || r == RelationType::kRightInScene ||
         r == RelationType::kLeftInScene;
}

std::string_view relation_name(RelationType r) {
  return kNames[relation_index(r)];
}

RelationType relation_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return kAllRelations[i];
  }
  throw InvalidArgument("unknown relation '" + std::string(name) + "'");
}

bool canonical_less(const RelationEdge& a, const RelationEdge& b) {
  return std::tuple(relation_name(a.relation), std::string_view(a.subject),
                    std::string_view(a.object)) <
         std::tuple(relation_name(b.relation), std::string_view(b.subject),
                    std::string_view(b.object));
}

std::string to_string(const RelationEdge& e) {
  return std::string(relation_name(e.relation)) + "(" + e.subject + ", " +
         e.object + ")";
}

const ObjectSpec* SceneGraph::find(std::string_view id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

void validate(const SceneGraph& g) {
  if (!positive_finite(g.canvas.width) || !positive_finite(g.canvas.height)) {
    throw InvalidArgument("canvas dimensions must be positive");
  }
  std::set<std::string_view> ids;
  for (const auto& o : g.objects) {
    if (o.id.empty()) throw InvalidArgument("object id must be nonempty");
    if (o.id == kSceneSentinel) {
      throw InvalidArgument("object id 'scene' is reserved");
    }
    if (!ids.insert(o.id).second) {
      throw InvalidArgument("duplicate object id '" + o.id + "'");
    }
    if (!positive_finite(o.size.width) || !positive_finite(o.size.length) ||
        !positive_finite(o.size.height)) {
      throw InvalidArgument("object '" + o.id +
                            "' must have positive finite dimensions");
    }
  }
  std::set<std::tuple<RelationType, std::string_view, std::string_view>> seen;
  for (const auto& e : g.edges) {
    if (!ids.contains(e.subject)) {
      throw InvalidArgument("edge " + to_string(e) + " references unknown '" +
                            e.subject + "'");
    }
    if (is_unary(e.relation)) {
      if (e.object != kSceneSentinel) {
        throw InvalidArgument("unary edge " + to_string(e) +
                              " must target 'scene'");
      }
    } else {
      if (!ids.contains(e.object)) {
        throw InvalidArgument("edge " + to_string(e) +
                              " references unknown '" + e.object + "'");
      }
      if (e.object == e.subject) {
        throw InvalidArgument("edge " + to_string(e) + " is a self loop");
      }
    }
    if (!seen.emplace(e.relation, e.subject, e.object).second) {
      throw InvalidArgument("duplicate edge " + to_string(e));
    }
  }
}

SceneGraph canonicalize(SceneGraph g) {
  std::sort(g.objects.begin(), g.objects.end(),
            [](const ObjectSpec& a, const ObjectSpec& b) { return a.id < b.id; });
  std::sort(g.edges.begin(), g.edges.end(), canonical_less);
  return g;
}

PixelRect to_pixels(const BoundingBox& box, const Canvas& canvas) {
  return {box.left() * canvas.width, box.top() * canvas.height,
          box.right() * canvas.width, box.bottom() * canvas.height};
}

BoundingBox from_pixels(const PixelRect& rect, const Canvas& canvas) {
  const double w = rect.x1 - rect.x0;
  const double h = rect.y1 - rect.y0;
  return {(rect.x0 + 0.5 * w) / canvas.width,
          (rect.y0 + 0.5 * h) / canvas.height, w / canvas.width,
          h / canvas.height};
}

const BoundingBox& Layout::at(std::string_view id) const {
  auto it = boxes.find(std::string(id));
  if (it == boxes.end()) {
    throw InvalidArgument("layout has no box for '" + std::string(id) + "'");
  }
  return it->second;
}

bool Layout::covers(const SceneGraph& g) const {
  return std::all_of(g.objects.begin(), g.objects.end(),
                     [&](const ObjectSpec& o) { return boxes.contains(o.id); });
}

Extent derive_extent(const ObjectSpec& spec, const Canvas& canvas,
                     double ppi) {
  if (!positive_finite(ppi)) throw InvalidArgument("ppi must be positive");
  if (!positive_finite(spec.size.width) || !positive_finite(spec.size.height)) {
    throw InvalidArgument("object '" + spec.id +
                          "' must have positive dimensions");
  }
  if (!positive_finite(canvas.width) || !positive_finite(canvas.height)) {
    throw InvalidArgument("canvas dimensions must be positive");
  }
  return {spec.size.width * ppi / canvas.width,
          spec.size.height * ppi / canvas.height};
}

double auto_ppi(std::span<const ObjectSpec> specs, const Canvas& canvas,
                double max_fraction) {
  if (specs.empty()) throw InvalidArgument("auto_ppi needs at least one object");
  if (!positive_finite(max_fraction)) {
    throw InvalidArgument("max extent fraction must be positive");
  }
  double max_w = 0.0;
  double max_h = 0.0;
  for (const auto& s : specs) {
    if (!positive_finite(s.size.width) || !positive_finite(s.size.height)) {
      throw InvalidArgument("object '" + s.id +
                            "' must have positive dimensions");
    }
    max_w = std::max(max_w, s.size.width);
    max_h = std::max(max_h, s.size.height);
  }
  return std::min(max_fraction * canvas.width / max_w,
                  max_fraction * canvas.height / max_h);
}

std::array<double, 3> normalized_size(const ObjectSpec& spec,
                                      const Canvas& canvas, double ppi) {
  return {spec.size.width * ppi / canvas.width,
          spec.size.length * ppi / canvas.width,
          spec.size.height * ppi / canvas.height};
}

Layout make_layout(const SceneGraph& g, std::span<const double> centers) {
  if (centers.size() != 2 * g.objects.size()) {
    throw InvalidArgument("center vector length does not match object count");
  }
  Layout layout;
  layout.canvas = g.canvas;
  const double ppi = auto_ppi(g.objects, g.canvas);
  for (std::size_t i = 0; i < g.objects.size(); ++i) {
    const Extent ext = derive_extent(g.objects[i], g.canvas, ppi);
    layout.boxes[g.objects[i].id] =
        BoundingBox{centers[2 * i], centers[2 * i + 1], ext.ew, ext.eh};
  }
  return layout;
}

std::vector<double> centers_of(const SceneGraph& g, const Layout& layout) {
  std::vector<double> out;
  out.reserve(2 * g.objects.size());
  for (const auto& o : g.objects) {
    const auto& b = layout.at(o.id);
    out.push_back(b.cx);
    out.push_back(b.cy);
  }
  return out;
}

}  // namespace layoutgen
