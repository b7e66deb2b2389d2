#pragma once

// Property checks shared by the unit tests and the acceptance gate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "layoutgen/graph.hpp"
#include "layoutgen/relations.hpp"
#include "oracle/pixel_rules.hpp"
#include "test_util.hpp"

namespace testutil {

struct AgreementStats {
  std::size_t checks = 0;
  std::size_t disagreements = 0;
};

// holds() against the integer pixel oracle for one relation over a 17^4 grid
// of center pairs. Fixed dyadic extents keep every box corner an exact
// pixel, so ties on the non-strict boundaries are exercised exactly.
inline AgreementStats oracle_grid_agreement(layoutgen::RelationType r) {
  using namespace layoutgen;
  const Canvas canvas{1024, 768};
  const double ewa = 0.125, eha = 0.125, ewb = 0.375, ehb = 0.25;
  const std::int64_t wa = 128, ha = 96, wb = 384, hb = 192;
  const RuleConfig rules;
  const oracle::PixelCanvas pc{1024, 768, 256, 512};
  const RelationEdge e = is_unary(r) ? edge(r, "a") : edge(r, "a", "b");
  const std::string name{relation_name(r)};
  AgreementStats stats;
  Layout layout;
  layout.canvas = canvas;
  for (int i = 0; i <= 16; ++i) {
    for (int j = 0; j <= 16; ++j) {
      for (int k = 0; k <= 16; ++k) {
        for (int l = 0; l <= 16; ++l) {
          layout.boxes["a"] = {i / 16.0, j / 16.0, ewa, eha};
          layout.boxes["b"] = {k / 16.0, l / 16.0, ewb, ehb};
          const std::int64_t ax = i * 64, ay = j * 48, bx = k * 64, by = l * 48;
          const oracle::PixelBox pa{ax - wa / 2, ay - ha / 2, ax + wa / 2, ay + ha / 2};
          const oracle::PixelBox pb{bx - wb / 2, by - hb / 2, bx + wb / 2, by + hb / 2};
          const bool want = oracle::pixel_holds(name, pa, pb, pc);
          stats.disagreements += holds(e, layout, rules) != want ? 1 : 0;
          ++stats.checks;
        }
      }
    }
  }
  return stats;
}

// Builds conflict-free graphs with one relation per object pair, injects
// trial % 6 contradicting edges and counts trials where detect_conflicts
// reports a different number.
inline int conflict_injection_mismatches(int trials, std::uint64_t seed) {
  using namespace layoutgen;
  const RelationType injectable[] = {RelationType::kIn,      RelationType::kLeftOf,
                                     RelationType::kTopOf,   RelationType::kInFrontOf,
                                     RelationType::kCloseTo, RelationType::kAwayFrom};
  std::mt19937_64 rng(seed);
  int mismatches = 0;
  for (int trial = 0; trial < trials; ++trial) {
    SceneGraph g;
    const int n = 4 + trial % 4;
    for (int i = 0; i < n; ++i) g.objects.push_back(object("o" + std::to_string(i), 10, 10, 10));
    std::vector<std::size_t> candidates;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const RelationType r = injectable[rng() % 6];
        g.edges.push_back(edge(r, "o" + std::to_string(i), "o" + std::to_string(j)));
        candidates.push_back(g.edges.size() - 1);
      }
    }
    if (!detect_conflicts(g).empty()) {
      ++mismatches;
      continue;
    }
    const int k = trial % 6;
    std::shuffle(candidates.begin(), candidates.end(), rng);
    for (int c = 0; c < k; ++c) {
      const RelationEdge e = g.edges[candidates[static_cast<std::size_t>(c)]];
      if (e.relation == RelationType::kCloseTo) {
        g.edges.push_back(edge(RelationType::kAwayFrom, e.object, e.subject));
      } else if (e.relation == RelationType::kAwayFrom) {
        g.edges.push_back(edge(RelationType::kCloseTo, e.subject, e.object));
      } else {
        g.edges.push_back(edge(e.relation, e.object, e.subject));
      }
    }
    if (detect_conflicts(g).size() != static_cast<std::size_t>(k)) ++mismatches;
  }
  return mismatches;
}

// Worst relative error between the analytic soft-energy gradient and
// central differences over random center configurations that cover every
// relation.
inline double energy_gradient_worst(int instances, std::uint64_t seed) {
  using namespace layoutgen;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.1, 1.1);
  SceneGraph g;
  g.canvas = {1024, 768};
  g.objects = {object("a", 30, 10, 20), object("b", 60, 10, 45), object("c", 12, 10, 70)};
  for (RelationType r : kAllRelations) {
    if (is_unary(r)) {
      g.edges.push_back(edge(r, "a"));
      g.edges.push_back(edge(r, "c"));
    } else {
      g.edges.push_back(edge(r, "a", "b"));
      g.edges.push_back(edge(r, "c", "b"));
    }
  }
  const double h = 1e-5;
  double worst = 0.0;
  for (int trial = 0; trial < instances; ++trial) {
    std::vector<double> x(6);
    for (double& v : x) v = u(rng);
    std::vector<double> grad(6, 0.0);
    total_energy(g, x, grad);
    for (std::size_t i = 0; i < x.size(); ++i) {
      std::vector<double> xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (total_energy(g, xp, {}) - total_energy(g, xm, {})) / (2.0 * h);
      const double err =
          std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-3});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace testutil
