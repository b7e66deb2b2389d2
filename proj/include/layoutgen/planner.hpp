#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "layoutgen/graph.hpp"
#include "layoutgen/scene.hpp"
#include "layoutgen/synth.hpp"

namespace layoutgen {

/// An object as the planner receives it; the size may be left to the
/// planner to estimate.
struct PlanObject {
  std::string id;
  std::optional<SizeInches> size;
  std::vector<std::string> attributes;
};

struct PlanRequest {
  std::string scene_label;
  std::vector<PlanObject> objects;
  Canvas canvas;

  void validate() const;
};

struct PlanResponse {
  SceneGraph graph;
  std::string refined_prompt;
};

/// Wire format: graph document fields plus scene_label; sizes optional.
nlohmann::json plan_request_to_json(const PlanRequest& req);
PlanRequest plan_request_from_json(const nlohmann::json& doc);
PlanRequest load_plan_request(const std::string& path);
/// Graph document plus refined_prompt.
nlohmann::json plan_response_to_json(const PlanResponse& resp);

/// A size is missing and no archetype matches the object.
class UnresolvableSize : public std::runtime_error {
 public:
  explicit UnresolvableSize(std::string object_id)
      : std::runtime_error("cannot estimate a size for object '" + object_id + "'"),
        object_id_(std::move(object_id)) {}
  const std::string& object_id() const { return object_id_; }

 private:
  std::string object_id_;
};

/// Archetype tag of an object: the first attribute naming an archetype,
/// else the id with any trailing digits and separators removed.
std::string object_tag(const PlanObject& obj, const std::vector<Archetype>& table);

/// Deterministic template planner. Sizes come from archetype midpoints,
/// every object gets in-scene, and relations are keyed by (scene label,
/// tag pair). At most one binary edge per object pair, so the graph is
/// conflict-free.
PlanResponse mock_plan(const PlanRequest& req, std::uint64_t seed,
                       const std::vector<Archetype>& table = default_archetypes());

/// Sentence naming every edge of the graph.
std::string refined_prompt(const SceneGraph& g);

struct EndpointConfig {
  /// Base URL such as http://127.0.0.1:8080; requests go to <base>/plan.
  std::string url;
  double timeout_seconds = 10.0;

  /// Timeout from LAYOUTGEN_PLAN_TIMEOUT when set, else the default.
  static EndpointConfig from_env(std::string url);
};

class PlanError : public std::runtime_error {
 public:
  enum class Kind { kTransport, kMalformed, kValidation };

  PlanError(Kind kind, const std::string& message, ConflictReport conflicts = {},
            std::vector<std::string> missing_objects = {})
      : std::runtime_error(message),
        kind_(kind),
        conflicts_(std::move(conflicts)),
        missing_objects_(std::move(missing_objects)) {}

  Kind kind() const { return kind_; }
  const ConflictReport& conflicts() const { return conflicts_; }
  const std::vector<std::string>& missing_objects() const { return missing_objects_; }

 private:
  Kind kind_;
  ConflictReport conflicts_;
  std::vector<std::string> missing_objects_;
};

/// Checks a proposed plan: conflict-free and covering every requested
/// object. Throws PlanError(kValidation).
void validate_plan(const PlanRequest& req, const PlanResponse& resp);

/// Parses a response body. Throws PlanError(kMalformed).
PlanResponse parse_plan_response(const std::string& body);

/// POSTs the request and validates the returned plan before returning it.
PlanResponse remote_plan(const PlanRequest& req, const EndpointConfig& endpoint);

}  // namespace layoutgen
