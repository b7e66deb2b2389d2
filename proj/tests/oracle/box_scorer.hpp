#pragma once

// Second scoring path for layouts. Works on pixel-space corners computed
// here from the raw box fields, with its own predicate table, so a record
// that passes both this and the library scorer is checked twice.

#include <cmath>
#include <string>

#include "layoutgen/scene.hpp"

namespace oracle {

struct Corners {
  double left, top, right, bottom;
  double mid_x() const { return 0.5 * (left + right); }
  double mid_y() const { return 0.5 * (top + bottom); }
};

inline Corners corners(const layoutgen::BoundingBox& b, const layoutgen::Canvas& c) {
  return {(b.cx - b.ew / 2) * c.width, (b.cy - b.eh / 2) * c.height,
          (b.cx + b.ew / 2) * c.width, (b.cy + b.eh / 2) * c.height};
}

// Tolerance for corners that land exactly on the canvas edge after the
// round trip through pixel units.
inline constexpr double kEdgeSlack = 1e-9;

inline bool check_edge(const layoutgen::RelationEdge& e, const layoutgen::Layout& layout,
                       double close_threshold, double away_threshold) {
  const auto& c = layout.canvas;
  const Corners a = corners(layout.boxes.at(e.subject), c);
  const std::string rel{layoutgen::relation_name(e.relation)};
  if (rel == "in-scene") {
    return a.left >= -kEdgeSlack && a.top >= -kEdgeSlack &&
           a.right <= c.width + kEdgeSlack && a.bottom <= c.height + kEdgeSlack;
  }
  if (rel == "right-in-scene") {
    return a.right <= c.width + kEdgeSlack && a.right >= c.width / 2 - kEdgeSlack;
  }
  if (rel == "left-in-scene") {
    return a.left >= -kEdgeSlack && a.left <= c.width / 2 + kEdgeSlack;
  }
  const Corners b = corners(layout.boxes.at(e.object), c);
  const double dx = a.mid_x() - b.mid_x();
  const double dy = a.mid_y() - b.mid_y();
  const double dist = std::hypot(dx, dy);
  if (rel == "in") {
    return a.left >= b.left - kEdgeSlack && a.right <= b.right + kEdgeSlack &&
           a.top >= b.top - kEdgeSlack && a.bottom <= b.bottom + kEdgeSlack;
  }
  if (rel == "left-of") return dx < 0;
  if (rel == "top-of" || rel == "in-front-of") return dy < 0;
  if (rel == "close-to") return dist < close_threshold * c.width;
  if (rel == "away-from") return dist > away_threshold * c.width;
  if (rel == "overlapping") {
    return std::min(a.right, b.right) > std::max(a.left, b.left) &&
           std::min(a.bottom, b.bottom) > std::max(a.top, b.top);
  }
  return false;
}

inline double score(const layoutgen::SceneGraph& g, const layoutgen::Layout& layout,
                    double close_threshold = 0.25, double away_threshold = 0.5) {
  if (g.edges.empty()) return 1.0;
  int ok = 0;
  for (const auto& e : g.edges) ok += check_edge(e, layout, close_threshold, away_threshold);
  return static_cast<double>(ok) / static_cast<double>(g.edges.size());
}

}  // namespace oracle
