#include "layoutgen/planner.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <set>

#include "httplib.h"

#include "layoutgen/error.hpp"
#include "layoutgen/random.hpp"

namespace layoutgen {

using nlohmann::json;

namespace {

constexpr char kTimeoutEnv[] = "LAYOUTGEN_PLAN_TIMEOUT";
constexpr char kPlanPath[] = "/plan";

// A relation between two archetype tags. swap places tag_b as the subject.
struct Choice {
  RelationType relation;
  bool swap = false;
};

struct Rule {
  std::string_view scene;
  std::string_view tag_a;
  std::string_view tag_b;
  std::vector<Choice> variants;
};

const std::vector<Rule>& template_rules() {
  using R = RelationType;
  static const std::vector<Rule> rules = {
      {"bedroom", "lamp", "nightstand", {{R::kCloseTo}}},
      {"bedroom", "lamp", "bed", {{R::kCloseTo}}},
      {"bedroom", "nightstand", "bed", {{R::kLeftOf}, {R::kLeftOf, true}}},
      {"bedroom", "wardrobe", "bed", {{R::kAwayFrom}}},
      {"bedroom", "plant", "bed", {{R::kAwayFrom}}},
      {"living_room", "sofa", "coffee_table", {{R::kTopOf}}},
      {"living_room", "armchair", "sofa", {{R::kLeftOf}, {R::kLeftOf, true}}},
      {"living_room", "armchair", "coffee_table", {{R::kCloseTo}}},
      {"living_room", "tv_stand", "sofa", {{R::kAwayFrom}}},
      {"living_room", "plant", "sofa", {{R::kCloseTo}}},
      {"billiard_room", "cue_rack", "billiard_table", {{R::kTopOf}}},
      {"billiard_room", "bar_stool", "billiard_table", {{R::kLeftOf}, {R::kLeftOf, true}}},
      {"billiard_room", "plant", "billiard_table", {{R::kAwayFrom}}},
      {"garage", "bicycle", "workbench", {{R::kLeftOf}, {R::kLeftOf, true}}},
      {"garage", "tool_chest", "workbench", {{R::kCloseTo}}},
      {"garage", "bicycle", "tool_chest", {{R::kAwayFrom}}},
  };
  return rules;
}

std::string normalize_label(std::string_view label) {
  std::string out;
  for (char c : label) {
    if (c == ' ' || c == '-') {
      out += '_';
    } else {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  return out;
}

SizeInches midpoint(const Archetype& a) {
  return {0.5 * (a.size_min.width + a.size_max.width),
          0.5 * (a.size_min.length + a.size_max.length),
          0.5 * (a.size_min.height + a.size_max.height)};
}

std::string phrase(const RelationEdge& e) {
  const std::string& a = e.subject;
  const std::string& b = e.object;
  switch (e.relation) {
    case RelationType::kInScene: return "the " + a + " is fully inside the scene";
    case RelationType::kRightInScene: return "the " + a + " is in the right half of the scene";
    case RelationType::kLeftInScene: return "the " + a + " is in the left half of the scene";
    case RelationType::kIn: return "the " + a + " is inside the " + b;
    case RelationType::kLeftOf: return "the " + a + " is to the left of the " + b;
    case RelationType::kTopOf: return "the " + a + " is above the " + b;
    case RelationType::kCloseTo: return "the " + a + " is close to the " + b;
    case RelationType::kAwayFrom: return "the " + a + " is far away from the " + b;
    case RelationType::kOverlapping: return "the " + a + " overlaps the " + b;
    case RelationType::kInFrontOf: return "the " + a + " is in front of the " + b;
  }
  return {};
}

std::string display_label(const std::string& label) {
  std::string out = label;
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

}  // namespace

void PlanRequest::validate() const {
  if (objects.empty()) throw InvalidArgument("plan request has no objects");
  std::set<std::string> seen;
  for (const auto& o : objects) {
    if (o.id.empty() || o.id == kSceneSentinel) {
      throw InvalidArgument("invalid object id '" + o.id + "'");
    }
    if (!seen.insert(o.id).second) throw InvalidArgument("duplicate object id '" + o.id + "'");
    if (o.size && (!(o.size->width > 0) || !(o.size->length > 0) || !(o.size->height > 0))) {
      throw InvalidArgument("object '" + o.id + "' needs positive dimensions");
    }
  }
  if (!(canvas.width > 0) || !(canvas.height > 0)) {
    throw InvalidArgument("canvas dimensions must be positive");
  }
}

json plan_request_to_json(const PlanRequest& req) {
  json objects = json::array();
  for (const auto& o : req.objects) {
    json obj = {{"id", o.id}, {"attributes", o.attributes}};
    if (o.size) obj["size_in"] = {o.size->width, o.size->length, o.size->height};
    objects.push_back(std::move(obj));
  }
  return {{"scene_label", req.scene_label},
          {"canvas", {{"width", req.canvas.width}, {"height", req.canvas.height}}},
          {"objects", std::move(objects)},
          {"edges", json::array()}};
}

PlanRequest plan_request_from_json(const json& doc) {
  PlanRequest req;
  try {
    if (!doc.is_object()) throw InvalidArgument("plan request must be an object");
    req.scene_label = doc.value("scene_label", std::string());
    if (auto it = doc.find("canvas"); it != doc.end()) {
      req.canvas = {it->at("width").get<double>(), it->at("height").get<double>()};
    }
    for (const auto& o : doc.at("objects")) {
      PlanObject obj;
      obj.id = o.at("id").get<std::string>();
      if (auto it = o.find("size_in"); it != o.end() && !it->is_null()) {
        if (!it->is_array() || it->size() != 3) {
          throw InvalidArgument("'size_in' must be [w, l, h]");
        }
        obj.size = SizeInches{(*it)[0].get<double>(), (*it)[1].get<double>(),
                              (*it)[2].get<double>()};
      }
      obj.attributes = o.value("attributes", std::vector<std::string>{});
      req.objects.push_back(std::move(obj));
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed plan request: ") + e.what());
  }
  req.validate();
  return req;
}

PlanRequest load_plan_request(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
  return plan_request_from_json(doc);
}

json plan_response_to_json(const PlanResponse& resp) {
  json doc = graph_to_json(resp.graph);
  doc["refined_prompt"] = resp.refined_prompt;
  return doc;
}

std::string object_tag(const PlanObject& obj, const std::vector<Archetype>& table) {
  for (const auto& a : obj.attributes) {
    if (find_archetype(table, a) != nullptr) return a;
  }
  std::string tag = obj.id;
  while (!tag.empty() && (std::isdigit(static_cast<unsigned char>(tag.back())) ||
                          tag.back() == '_' || tag.back() == '-')) {
    tag.pop_back();
  }
  return tag;
}

std::string refined_prompt(const SceneGraph& g) {
  std::string out = "A " + (g.scene_label.empty() ? std::string("scene")
                                                  : display_label(g.scene_label)) +
                    " with ";
  for (std::size_t i = 0; i < g.objects.size(); ++i) {
    if (i > 0) out += (i + 1 == g.objects.size()) ? " and " : ", ";
    out += "a " + g.objects[i].id;
  }
  out += ".";
  for (const auto& e : g.edges) {
    std::string p = phrase(e);
    p[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(p[0])));
    out += " " + p + ".";
  }
  return out;
}

PlanResponse mock_plan(const PlanRequest& req, std::uint64_t seed,
                       const std::vector<Archetype>& table) {
  req.validate();
  Rng rng(seed);
  SceneGraph g;
  g.scene_label = req.scene_label;
  g.canvas = req.canvas;
  std::vector<std::string> tags;
  for (const auto& o : req.objects) {
    ObjectSpec spec;
    spec.id = o.id;
    spec.attributes = o.attributes;
    const std::string tag = object_tag(o, table);
    if (o.size) {
      spec.size = *o.size;
    } else if (const Archetype* a = find_archetype(table, tag)) {
      spec.size = midpoint(*a);
    } else {
      throw UnresolvableSize(o.id);
    }
    tags.push_back(tag);
    g.objects.push_back(std::move(spec));
  }

  for (const auto& o : g.objects) {
    g.edges.push_back({RelationType::kInScene, o.id, std::string(kSceneSentinel)});
  }
  const std::string scene = normalize_label(req.scene_label);
  for (std::size_t i = 0; i < g.objects.size(); ++i) {
    for (std::size_t j = i + 1; j < g.objects.size(); ++j) {
      for (const Rule& rule : template_rules()) {
        if (rule.scene != scene) continue;
        bool forward = tags[i] == rule.tag_a && tags[j] == rule.tag_b;
        bool backward = tags[i] == rule.tag_b && tags[j] == rule.tag_a;
        if (!forward && !backward) continue;
        const std::size_t pick =
            rule.variants.size() == 1
                ? 0
                : std::uniform_int_distribution<std::size_t>(0, rule.variants.size() - 1)(rng);
        const Choice& c = rule.variants[pick];
        // a and b are the objects carrying tag_a and tag_b.
        const std::string& a = forward ? g.objects[i].id : g.objects[j].id;
        const std::string& b = forward ? g.objects[j].id : g.objects[i].id;
        g.edges.push_back({c.relation, c.swap ? b : a, c.swap ? a : b});
        break;  // one binary edge per pair keeps the graph conflict-free
      }
    }
  }
  g = canonicalize(std::move(g));
  validate(g);
  PlanResponse resp{std::move(g), {}};
  resp.refined_prompt = refined_prompt(resp.graph);
  return resp;
}

EndpointConfig EndpointConfig::from_env(std::string url) {
  EndpointConfig cfg;
  cfg.url = std::move(url);
  if (const char* env = std::getenv(kTimeoutEnv)) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end == env || *end != '\0' || !(v > 0.0) || !std::isfinite(v)) {
      throw InvalidArgument(std::string(kTimeoutEnv) + " must be a positive number");
    }
    cfg.timeout_seconds = v;
  }
  return cfg;
}

void validate_plan(const PlanRequest& req, const PlanResponse& resp) {
  const ConflictReport conflicts = detect_conflicts(resp.graph);
  std::vector<std::string> missing;
  for (const auto& o : req.objects) {
    if (resp.graph.find(o.id) == nullptr) missing.push_back(o.id);
  }
  if (conflicts.empty() && missing.empty()) return;
  std::string msg = "planner returned an invalid graph:";
  for (const auto& c : conflicts.conflicts) {
    msg += " conflict " + to_string(c.first) + " vs " + to_string(c.second) + ";";
  }
  for (const auto& id : missing) msg += " missing object '" + id + "';";
  msg.pop_back();
  throw PlanError(PlanError::Kind::kValidation, msg, conflicts, missing);
}

PlanResponse parse_plan_response(const std::string& body) {
  PlanResponse resp;
  try {
    resp.graph = parse_graph(body);
    const json doc = json::parse(body);
    const auto it = doc.find("refined_prompt");
    if (it == doc.end() || !it->is_string()) {
      throw PlanError(PlanError::Kind::kMalformed,
                      "plan response lacks a string 'refined_prompt'");
    }
    resp.refined_prompt = it->get<std::string>();
  } catch (const ParseError& e) {
    throw PlanError(PlanError::Kind::kMalformed,
                    std::string("malformed plan response: ") + e.what());
  } catch (const json::exception& e) {
    throw PlanError(PlanError::Kind::kMalformed,
                    std::string("malformed plan response: ") + e.what());
  }
  return resp;
}

PlanResponse remote_plan(const PlanRequest& req, const EndpointConfig& endpoint) {
  req.validate();
  static const std::regex url_re(R"(^(http://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(endpoint.url, m, url_re)) {
    throw InvalidArgument("endpoint must be an http:// URL, got '" + endpoint.url + "'");
  }
  std::string path = m[2].matched ? m[2].str() : std::string();
  while (!path.empty() && path.back() == '/') path.pop_back();
  if (path.size() < 5 || path.substr(path.size() - 5) != kPlanPath) path += kPlanPath;

  httplib::Client client(m[1].str());
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(endpoint.timeout_seconds));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const auto res = client.Post(path, plan_request_to_json(req).dump(), "application/json");
  if (!res) {
    throw PlanError(PlanError::Kind::kTransport,
                    "request to " + endpoint.url + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw PlanError(PlanError::Kind::kTransport,
                    "planner answered HTTP " + std::to_string(res->status));
  }
  PlanResponse resp = parse_plan_response(res->body);
  validate_plan(req, resp);
  return resp;
}

}  // namespace layoutgen
