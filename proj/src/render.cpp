#include "layoutgen/render.hpp"

#include <cstdint>
#include <cstdio>

#include "layoutgen/error.hpp"

namespace layoutgen {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  // Avoid printing a negative zero.
  return std::string(buf) == "-0.00" ? "0.00" : buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::uint32_t fnv1a(const std::string& s) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : s) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

}  // namespace

std::string object_color(const std::string& id) {
  const std::uint32_t h = fnv1a(id);
  // Keep channels in a mid range so boxes and labels stay readable.
  const int r = 48 + static_cast<int>(h & 0xff) * 160 / 255;
  const int g = 48 + static_cast<int>((h >> 8) & 0xff) * 160 / 255;
  const int b = 48 + static_cast<int>((h >> 16) & 0xff) * 160 / 255;
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

std::string render_svg(const SceneGraph& g, const Layout& layout,
                       const RenderOptions& options) {
  if (!layout.covers(g)) throw InvalidArgument("layout does not cover the graph");
  const Canvas& c = layout.canvas;
  const std::string w = num(c.width);
  const std::string h = num(c.height);

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + w + "\" height=\"" + h +
         "\" viewBox=\"0 0 " + w + " " + h + "\">\n";
  if (options.annotate_edges) {
    out += "  <defs>\n"
           "    <marker id=\"arrowhead\" markerWidth=\"10\" markerHeight=\"7\" refX=\"10\" "
           "refY=\"3.5\" orient=\"auto\">\n"
           "      <polygon points=\"0 0, 10 3.5, 0 7\" fill=\"#333333\"/>\n"
           "    </marker>\n"
           "  </defs>\n";
  }
  out += "  <rect class=\"border\" x=\"0.00\" y=\"0.00\" width=\"" + w + "\" height=\"" + h +
         "\" fill=\"#ffffff\" stroke=\"#000000\" stroke-width=\"2.00\"/>\n";

  for (const auto& obj : g.objects) {
    const PixelRect r = to_pixels(layout.at(obj.id), c);
    const std::string color = object_color(obj.id);
    const std::string id = escape(obj.id);
    out += "  <g class=\"object\" id=\"obj-" + id + "\">\n";
    out += "    <rect x=\"" + num(r.x0) + "\" y=\"" + num(r.y0) + "\" width=\"" +
           num(r.x1 - r.x0) + "\" height=\"" + num(r.y1 - r.y0) + "\" fill=\"" + color +
           "\" fill-opacity=\"0.35\" stroke=\"" + color + "\" stroke-width=\"2.00\"/>\n";
    if (options.show_labels) {
      out += "    <text x=\"" + num(0.5 * (r.x0 + r.x1)) + "\" y=\"" +
             num(0.5 * (r.y0 + r.y1)) +
             "\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" "
             "dominant-baseline=\"middle\">" +
             id + "</text>\n";
    }
    out += "  </g>\n";
  }

  if (options.annotate_edges) {
    for (const auto& e : g.edges) {
      if (is_unary(e.relation)) continue;
      const BoundingBox& a = layout.at(e.subject);
      const BoundingBox& b = layout.at(e.object);
      const double x1 = a.cx * c.width;
      const double y1 = a.cy * c.height;
      const double x2 = b.cx * c.width;
      const double y2 = b.cy * c.height;
      out += "  <g class=\"edge\">\n";
      out += "    <line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) +
             "\" y2=\"" + num(y2) +
             "\" stroke=\"#333333\" stroke-width=\"1.50\" marker-end=\"url(#arrowhead)\"/>\n";
      out += "    <text x=\"" + num(0.5 * (x1 + x2)) + "\" y=\"" + num(0.5 * (y1 + y2)) +
             "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" +
             escape(std::string(relation_name(e.relation))) + "</text>\n";
      out += "  </g>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

}  // namespace layoutgen
