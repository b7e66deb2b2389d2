#include <algorithm>
#include <random>
#include <string>

#include "doctest.h"

#include "layoutgen/error.hpp"
#include "layoutgen/graph.hpp"
#include "layoutgen/synth.hpp"
#include "checks.hpp"
#include "test_util.hpp"

using namespace layoutgen;
using testutil::edge;
using testutil::object;

namespace {

const char* kBedLamp = R"({
  "scene_label": "bedroom",
  "canvas": {"width": 1024, "height": 1024},
  "objects": [
    {"id": "bed", "size_in": [80, 60, 24], "attributes": ["bed"]},
    {"id": "lamp", "size_in": [8, 8, 24]}
  ],
  "edges": [
    {"rel": "left-of", "subject": "lamp", "object": "bed"}
  ]
})";

SceneGraph two_objects() {
  SceneGraph g;
  g.objects = {object("A", 10, 10, 10), object("B", 12, 10, 14)};
  return g;
}

}  // namespace

TEST_CASE("parse reads objects and edges") {
  const SceneGraph g = parse_graph(kBedLamp);
  CHECK(g.objects.size() == 2);
  CHECK(g.edges.size() == 1);
  CHECK(g.edges[0] == edge(RelationType::kLeftOf, "lamp", "bed"));
  CHECK(g.scene_label == "bedroom");
  CHECK(g.find("bed")->attributes == std::vector<std::string>{"bed"});
}

TEST_CASE("parse reports dangling references at their line") {
  const std::string doc = R"({
  "objects": [
    {"id": "bed", "size_in": [80, 60, 24]},
    {"id": "lamp", "size_in": [8, 8, 24]}
  ],
  "edges": [
    {"rel": "in-scene", "subject": "bed", "object": "scene"},
    {"rel": "left-of", "subject": "sofa", "object": "bed"}
  ]
})";
  try {
    parse_graph(doc);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseError::Kind::kDanglingReference);
    CHECK(e.line() == 8);
    CHECK(e.column() > 0);
  }
}

TEST_CASE("parse rejects duplicate edges, unknown relations and bad syntax") {
  const std::string dup = R"({"objects": [{"id": "bed", "size_in": [1, 1, 1]},
    {"id": "lamp", "size_in": [1, 1, 1]}],
    "edges": [{"rel": "left-of", "subject": "lamp", "object": "bed"},
              {"rel": "left-of", "subject": "lamp", "object": "bed"}]})";
  try {
    parse_graph(dup);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseError::Kind::kDuplicateEdge);
    CHECK(e.line() == 4);
  }

  const std::string unknown = R"({"objects": [{"id": "bed", "size_in": [1, 1, 1]},
    {"id": "lamp", "size_in": [1, 1, 1]}],
    "edges": [{"rel": "beside", "subject": "lamp", "object": "bed"}]})";
  try {
    parse_graph(unknown);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseError::Kind::kUnknownRelation);
  }

  try {
    parse_graph("{\"objects\": [\n  {\"id\": \"bed\",, }\n]}");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseError::Kind::kSyntax);
    CHECK(e.line() == 2);
  }

  const std::string dup_obj = R"({"objects": [{"id": "bed", "size_in": [1, 1, 1]},
    {"id": "bed", "size_in": [1, 1, 1]}]})";
  try {
    parse_graph(dup_obj);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseError::Kind::kDuplicateObject);
  }
}

TEST_CASE("serialize round trips and orders canonically") {
  SceneGraph g;
  g.scene_label = "test";
  g.canvas = {800, 600};
  g.objects = {object("z", 10, 10, 10), object("a", 20, 5, 15), object("m", 7, 7, 7)};
  for (RelationType r : kAllRelations) {
    if (is_unary(r)) {
      g.edges.push_back(edge(r, "m"));
    } else {
      g.edges.push_back(edge(r, "z", "a"));
    }
  }
  std::reverse(g.edges.begin(), g.edges.end());
  const std::string doc = serialize_graph(g);
  const SceneGraph back = parse_graph(doc);
  CHECK(back == canonicalize(g));
  CHECK(back.objects.front().id == "a");
  CHECK(std::is_sorted(back.edges.begin(), back.edges.end(), canonical_less));
  CHECK(back.edges.size() == 10);

  SceneGraph empty;
  empty.objects = {object("a", 1, 1, 1)};
  const nlohmann::json j = nlohmann::json::parse(serialize_graph(empty));
  CHECK(j["edges"].empty());
  CHECK(parse_graph(serialize_graph(empty)) == empty);
}

TEST_CASE("parse and serialize are inverse on 1000 random graphs") {
  GeneratorConfig cfg;
  cfg.max_objects = 6;
  cfg.max_binary_edges = 5;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const SceneGraph g = canonicalize(sample_graph(cfg, seed));
    REQUIRE(parse_graph(serialize_graph(g)) == g);
  }
}

TEST_CASE("detect_conflicts on the reference pairs") {
  SceneGraph g = two_objects();
  g.edges = {edge(RelationType::kLeftOf, "A", "B"), edge(RelationType::kLeftOf, "B", "A")};
  ConflictReport r = detect_conflicts(g);
  REQUIRE(r.size() == 1);
  CHECK(r.conflicts[0].kind == ConflictKind::kAntisymmetricDuplicate);

  g.edges = {edge(RelationType::kCloseTo, "A", "B"), edge(RelationType::kAwayFrom, "A", "B")};
  r = detect_conflicts(g);
  REQUIRE(r.size() == 1);
  CHECK(r.conflicts[0].kind == ConflictKind::kProximityContradiction);

  g.edges = {edge(RelationType::kLeftOf, "A", "B"), edge(RelationType::kTopOf, "B", "A")};
  CHECK(detect_conflicts(g).empty());

  // top-of both ways is a conflict by default and outside the strict subset.
  g.edges = {edge(RelationType::kTopOf, "A", "B"), edge(RelationType::kTopOf, "B", "A")};
  CHECK(detect_conflicts(g).size() == 1);
  CHECK(detect_conflicts(g, {true}).empty());

  // Symmetric relations never conflict with themselves.
  g.edges = {edge(RelationType::kCloseTo, "A", "B"), edge(RelationType::kCloseTo, "B", "A")};
  CHECK(detect_conflicts(g).empty());
}

TEST_CASE("injected conflicts are all found") {
  CHECK(testutil::conflict_injection_mismatches(300, 11) == 0);
}

TEST_CASE("relationship coverage and mean degree") {
  SceneGraph g;
  g.objects = {object("a", 1, 1, 1), object("b", 1, 1, 1), object("c", 1, 1, 1)};
  CHECK(relationship_coverage(g) == 0.0);
  g.edges = {edge(RelationType::kInScene, "a"), edge(RelationType::kLeftOf, "a", "b"),
             edge(RelationType::kCloseTo, "b", "c")};
  CHECK(relationship_coverage(g) == doctest::Approx(0.3));

  SceneGraph tri;
  tri.objects = g.objects;
  tri.edges = {edge(RelationType::kLeftOf, "a", "b"), edge(RelationType::kLeftOf, "b", "c"),
               edge(RelationType::kCloseTo, "a", "c")};
  CHECK(mean_degree(tri) == doctest::Approx(2.0));
  std::reverse(tri.edges.begin(), tri.edges.end());
  CHECK(mean_degree(tri) == doctest::Approx(2.0));

  SceneGraph pair;
  pair.objects = {object("a", 1, 1, 1), object("b", 1, 1, 1)};
  pair.edges = {edge(RelationType::kInScene, "a"), edge(RelationType::kInScene, "b"),
                edge(RelationType::kLeftOf, "a", "b")};
  CHECK(mean_degree(pair) == doctest::Approx(2.0));
  CHECK_THROWS_AS(mean_degree(SceneGraph{}), InvalidArgument);

  SceneGraph all;
  all.objects = {object("a", 1, 1, 1), object("b", 1, 1, 1)};
  for (RelationType r : kAllRelations) {
    all.edges.push_back(is_unary(r) ? edge(r, "a") : edge(r, "a", "b"));
  }
  CHECK(relationship_coverage(all) == 1.0);
}

TEST_CASE("layout documents round trip") {
  const SceneGraph g = parse_graph(kBedLamp);
  const Layout layout = make_layout(g, std::vector<double>{0.3, 0.4, 0.7, 0.6});
  CHECK(layout_from_json(layout_to_json(layout)) == layout);
}
