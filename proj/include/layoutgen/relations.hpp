#pragma once

#include <span>
#include <vector>

#include "layoutgen/scene.hpp"

namespace layoutgen {

/// Distance thresholds in units of canvas width.
struct RuleConfig {
  double close_threshold = 0.25;
  double away_threshold = 0.50;

  /// Throws InvalidArgument unless 0 < close < away <= sqrt(2).
  void validate() const;
};

/// Exact Table-style predicate for one edge. Strict inequalities for the
/// ordering, distance and overlap rules; containment rules (in-scene,
/// left/right-in-scene, in) accept boxes touching the boundary.
bool holds(const RelationEdge& edge, const Layout& layout,
           const RuleConfig& cfg = {});

/// Fraction of edges whose predicate holds; 1.0 for an edgeless graph.
double position_score(const SceneGraph& g, const Layout& layout,
                      const RuleConfig& cfg = {});

struct EnergyOptions {
  /// Required slack inside the satisfied region, normalized units.
  double margin = 0.02;
  /// Inverse width of the quadratic knee of the hinge.
  double sharpness = 50.0;
};

/// Smoothed hinge: 0 for u <= 0, quadratic on (0, 1/sharpness), then
/// linear with unit slope. C1 everywhere.
double smooth_hinge(double u, double sharpness);
double smooth_hinge_grad(double u, double sharpness);

/// Differentiable penalty for one edge, evaluated on the center vector of g
/// (interleaved cx, cy in object order). Adds dE/dcenter into grad when it
/// is non-empty. Energy 0 implies the predicate holds.
double edge_energy(const SceneGraph& g, const RelationEdge& edge,
                   std::span<const double> centers, std::span<double> grad,
                   const RuleConfig& cfg = {}, const EnergyOptions& opt = {});

/// Convenience form over a Layout; gradient indexed like centers_of(g, ...).
double energy(const SceneGraph& g, const RelationEdge& edge,
              const Layout& layout, std::vector<double>* grad,
              const RuleConfig& cfg = {}, const EnergyOptions& opt = {});

/// Sum of edge energies over the graph.
double total_energy(const SceneGraph& g, std::span<const double> centers,
                    std::span<double> grad, const RuleConfig& cfg = {},
                    const EnergyOptions& opt = {});

}  // namespace layoutgen
