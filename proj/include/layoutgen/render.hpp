#pragma once

#include <string>

#include "layoutgen/scene.hpp"

namespace layoutgen {

struct RenderOptions {
  /// Draw binary edges as labeled arrows between box centers.
  bool annotate_edges = false;
  bool show_labels = true;
};

/// SVG document with a canvas border and one labeled rectangle per object.
/// Coordinates use fixed two-decimal formatting, so output is
/// byte-deterministic. Throws InvalidArgument when layout does not cover g.
std::string render_svg(const SceneGraph& g, const Layout& layout,
                       const RenderOptions& options = {});

/// Stable "#rrggbb" color derived from an object id.
std::string object_color(const std::string& id);

}  // namespace layoutgen
