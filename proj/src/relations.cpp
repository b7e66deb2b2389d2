#include "layoutgen/relations.hpp"

#include <cmath>
#include <map>

#include "layoutgen/error.hpp"

namespace layoutgen {

namespace {

// Smoothing floor for distances so gradients exist at coincident centers.
constexpr double kDistanceFloor = 1e-6;

struct Geometry {
  std::span<const double> centers;
  std::vector<Extent> extents;
  double aspect = 1.0;  // canvas height / width

  double cx(std::size_t i) const { return centers[2 * i]; }
  double cy(std::size_t i) const { return centers[2 * i + 1]; }
};

std::size_t index_of(const SceneGraph& g, const std::string& id) {
  for (std::size_t i = 0; i < g.objects.size(); ++i) {
    if (g.objects[i].id == id) return i;
  }
  throw InvalidArgument("edge endpoint '" + id + "' is not in the graph");
}

// Accumulates one hinge term u(x) = sum_k coeff_k * x[index_k] + offset.
class Accumulator {
 public:
  Accumulator(std::span<double> grad, double sharpness)
      : grad_(grad), sharpness_(sharpness) {}

  template <std::size_t N>
  void term(double u, const std::array<std::pair<std::size_t, double>, N>& du) {
    energy_ += smooth_hinge(u, sharpness_);
    if (grad_.empty()) return;
    const double d = smooth_hinge_grad(u, sharpness_);
    if (d == 0.0) return;
    for (const auto& [idx, coeff] : du) grad_[idx] += d * coeff;
  }

  double energy() const { return energy_; }

 private:
  std::span<double> grad_;
  double sharpness_;
  double energy_ = 0.0;
};

double edge_energy_impl(const SceneGraph& g, const Geometry& geo,
                        const RelationEdge& edge, std::span<double> grad,
                        const RuleConfig& cfg, const EnergyOptions& opt) {
  const double m = opt.margin;
  Accumulator acc(grad, opt.sharpness);
  const std::size_t a = index_of(g, edge.subject);
  const std::size_t ax = 2 * a;
  const std::size_t ay = 2 * a + 1;
  const Extent ea = geo.extents[a];

  if (is_unary(edge.relation)) {
    const double l = geo.cx(a) - 0.5 * ea.ew;
    const double r = geo.cx(a) + 0.5 * ea.ew;
    const double t = geo.cy(a) - 0.5 * ea.eh;
    const double b = geo.cy(a) + 0.5 * ea.eh;
    using P1 = std::array<std::pair<std::size_t, double>, 1>;
    switch (edge.relation) {
      case RelationType::kInScene:
        acc.term(m - l, P1{{{ax, -1.0}}});
        acc.term(r - 1.0 + m, P1{{{ax, 1.0}}});
        acc.term(m - t, P1{{{ay, -1.0}}});
        acc.term(b - 1.0 + m, P1{{{ay, 1.0}}});
        break;
      case RelationType::kRightInScene:
        acc.term(r - 1.0 + m, P1{{{ax, 1.0}}});
        acc.term(0.5 - r + m, P1{{{ax, -1.0}}});
        break;
      case RelationType::kLeftInScene:
        acc.term(m - l, P1{{{ax, -1.0}}});
        acc.term(l - 0.5 + m, P1{{{ax, 1.0}}});
        break;
      default:
        break;
    }
    return acc.energy();
  }

  const std::size_t bi = index_of(g, edge.object);
  const std::size_t bx = 2 * bi;
  const std::size_t by = 2 * bi + 1;
  const Extent eb = geo.extents[bi];
  using P2 = std::array<std::pair<std::size_t, double>, 2>;
  const double dx = geo.cx(a) - geo.cx(bi);
  const double dy = geo.cy(a) - geo.cy(bi);

  switch (edge.relation) {
    case RelationType::kIn: {
      acc.term((geo.cx(bi) - 0.5 * eb.ew) - (geo.cx(a) - 0.5 * ea.ew) + m,
               P2{{{ax, -1.0}, {bx, 1.0}}});
      acc.term((geo.cx(a) + 0.5 * ea.ew) - (geo.cx(bi) + 0.5 * eb.ew) + m,
               P2{{{ax, 1.0}, {bx, -1.0}}});
      acc.term((geo.cy(bi) - 0.5 * eb.eh) - (geo.cy(a) - 0.5 * ea.eh) + m,
               P2{{{ay, -1.0}, {by, 1.0}}});
      acc.term((geo.cy(a) + 0.5 * ea.eh) - (geo.cy(bi) + 0.5 * eb.eh) + m,
               P2{{{ay, 1.0}, {by, -1.0}}});
      break;
    }
    case RelationType::kLeftOf:
      acc.term(dx + m, P2{{{ax, 1.0}, {bx, -1.0}}});
      break;
    case RelationType::kTopOf:
    case RelationType::kInFrontOf:
      acc.term(dy + m, P2{{{ay, 1.0}, {by, -1.0}}});
      break;
    case RelationType::kCloseTo:
    case RelationType::kAwayFrom: {
      // Distance in canvas-width units.
      const double wy = geo.aspect;
      const double d = std::sqrt(dx * dx + wy * wy * dy * dy +
                                 kDistanceFloor * kDistanceFloor);
      const double gx = dx / d;
      const double gy = wy * wy * dy / d;
      if (edge.relation == RelationType::kCloseTo) {
        using P4 = std::array<std::pair<std::size_t, double>, 4>;
        acc.term(d - cfg.close_threshold + m,
                 P4{{{ax, gx}, {bx, -gx}, {ay, gy}, {by, -gy}}});
      } else {
        using P4 = std::array<std::pair<std::size_t, double>, 4>;
        acc.term(cfg.away_threshold - d + m,
                 P4{{{ax, -gx}, {bx, gx}, {ay, -gy}, {by, gy}}});
      }
      break;
    }
    case RelationType::kOverlapping: {
      const double adx = std::sqrt(dx * dx + kDistanceFloor * kDistanceFloor);
      const double ady = std::sqrt(dy * dy + kDistanceFloor * kDistanceFloor);
      acc.term(m - 0.5 * (ea.ew + eb.ew) + adx,
               P2{{{ax, dx / adx}, {bx, -dx / adx}}});
      acc.term(m - 0.5 * (ea.eh + eb.eh) + ady,
               P2{{{ay, dy / ady}, {by, -dy / ady}}});
      break;
    }
    default:
      break;
  }
  return acc.energy();
}

Geometry geometry_from_graph(const SceneGraph& g,
                             std::span<const double> centers) {
  if (centers.size() != 2 * g.objects.size()) {
    throw InvalidArgument("center vector length does not match object count");
  }
  Geometry geo;
  geo.centers = centers;
  geo.aspect = g.canvas.height / g.canvas.width;
  const double ppi = auto_ppi(g.objects, g.canvas);
  geo.extents.reserve(g.objects.size());
  for (const auto& o : g.objects) {
    geo.extents.push_back(derive_extent(o, g.canvas, ppi));
  }
  return geo;
}

}  // namespace

void RuleConfig::validate() const {
  if (!(close_threshold > 0.0) || !(close_threshold < away_threshold) ||
      !(away_threshold <= std::sqrt(2.0))) {
    throw InvalidArgument(
        "rule thresholds must satisfy 0 < close < away <= sqrt(2)");
  }
}

bool holds(const RelationEdge& edge, const Layout& layout,
           const RuleConfig& cfg) {
  const BoundingBox& a = layout.at(edge.subject);
  switch (edge.relation) {
    case RelationType::kInScene:
      return a.left() >= 0.0 && a.right() <= 1.0 && a.top() >= 0.0 &&
             a.bottom() <= 1.0;
    case RelationType::kRightInScene:
      return a.right() <= 1.0 && a.right() >= 0.5;
    case RelationType::kLeftInScene:
      return a.left() >= 0.0 && a.left() <= 0.5;
    default:
      break;
  }
  const BoundingBox& b = layout.at(edge.object);
  switch (edge.relation) {
    case RelationType::kIn:
      return a.left() >= b.left() && a.right() <= b.right() &&
             a.top() >= b.top() && a.bottom() <= b.bottom();
    case RelationType::kLeftOf:
      return a.cx < b.cx;
    case RelationType::kTopOf:
    case RelationType::kInFrontOf:
      return a.cy < b.cy;
    case RelationType::kCloseTo:
    case RelationType::kAwayFrom: {
      const double aspect = layout.canvas.height / layout.canvas.width;
      const double dx = a.cx - b.cx;
      const double dy = (a.cy - b.cy) * aspect;
      const double d2 = dx * dx + dy * dy;
      if (edge.relation == RelationType::kCloseTo) {
        return d2 < cfg.close_threshold * cfg.close_threshold;
      }
      return d2 > cfg.away_threshold * cfg.away_threshold;
    }
    case RelationType::kOverlapping: {
      const double w = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
      const double h = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
      return w > 0.0 && h > 0.0;
    }
    default:
      return false;
  }
}

double position_score(const SceneGraph& g, const Layout& layout,
                      const RuleConfig& cfg) {
  if (!layout.covers(g)) {
    throw InvalidArgument("layout does not cover every object of the graph");
  }
  if (g.edges.empty()) return 1.0;
  std::size_t satisfied = 0;
  for (const auto& e : g.edges) satisfied += holds(e, layout, cfg) ? 1 : 0;
  return static_cast<double>(satisfied) / static_cast<double>(g.edges.size());
}

double smooth_hinge(double u, double sharpness) {
  if (u <= 0.0) return 0.0;
  const double knee = 1.0 / sharpness;
  if (u < knee) return 0.5 * sharpness * u * u;
  return u - 0.5 * knee;
}

double smooth_hinge_grad(double u, double sharpness) {
  if (u <= 0.0) return 0.0;
  const double knee = 1.0 / sharpness;
  if (u < knee) return sharpness * u;
  return 1.0;
}

double edge_energy(const SceneGraph& g, const RelationEdge& edge,
                   std::span<const double> centers, std::span<double> grad,
                   const RuleConfig& cfg, const EnergyOptions& opt) {
  if (!grad.empty() && grad.size() != centers.size()) {
    throw InvalidArgument("gradient buffer size mismatch");
  }
  return edge_energy_impl(g, geometry_from_graph(g, centers), edge, grad, cfg,
                          opt);
}

double energy(const SceneGraph& g, const RelationEdge& edge,
              const Layout& layout, std::vector<double>* grad,
              const RuleConfig& cfg, const EnergyOptions& opt) {
  const std::vector<double> centers = centers_of(g, layout);
  Geometry geo;
  geo.centers = centers;
  geo.aspect = layout.canvas.height / layout.canvas.width;
  for (const auto& o : g.objects) {
    const auto& b = layout.at(o.id);
    geo.extents.push_back({b.ew, b.eh});
  }
  std::span<double> gspan;
  if (grad != nullptr) {
    grad->assign(centers.size(), 0.0);
    gspan = *grad;
  }
  return edge_energy_impl(g, geo, edge, gspan, cfg, opt);
}

double total_energy(const SceneGraph& g, std::span<const double> centers,
                    std::span<double> grad, const RuleConfig& cfg,
                    const EnergyOptions& opt) {
  if (!grad.empty() && grad.size() != centers.size()) {
    throw InvalidArgument("gradient buffer size mismatch");
  }
  const Geometry geo = geometry_from_graph(g, centers);
  double total = 0.0;
  for (const auto& e : g.edges) {
    total += edge_energy_impl(g, geo, e, grad, cfg, opt);
  }
  return total;
}

}  // namespace layoutgen
