#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "layoutgen/model.hpp"
#include "layoutgen/relations.hpp"
#include "layoutgen/sampler.hpp"
#include "layoutgen/scene.hpp"
#include "layoutgen/schedule.hpp"

namespace layoutgen {

enum class IouMode {
  /// prod_d min(p_d, t_d) / prod_d max(p_d, t_d)
  kVolumetric,
  /// mean_d min(p_d, t_d) / max(p_d, t_d)
  kPerAxisMean,
};

/// Size agreement in [0, 1]. Throws InvalidArgument on non-positive dims.
double size_iou(const SizeInches& predicted, const SizeInches& truth,
                IouMode mode = IouMode::kVolumetric);

/// One graph of a suite, optionally with true object sizes keyed by id.
struct SuiteEntry {
  std::string name;
  SceneGraph graph;
  std::map<std::string, SizeInches> true_sizes;
};

struct Suite {
  std::string name;
  std::vector<SuiteEntry> entries;
};

Suite make_suite(std::string name, std::vector<SceneGraph> graphs);

/// Reads every *.json graph in dir (sorted by file name). An optional
/// sizes.json maps graph file stems to {object id: size} truth tables.
Suite load_suite(const std::string& dir);

/// Aggregates for one method over one suite.
struct SuiteReport {
  std::string suite;
  std::string method;
  /// False for a method that could not run at all (no checkpoint).
  bool present = true;
  std::size_t graphs = 0;
  std::size_t samples_requested = 0;
  std::size_t samples = 0;
  std::size_t failures = 0;
  double rel_cov = 0.0;
  double deg = 0.0;
  /// Fraction of graphs with at least one conflict.
  double conf = 0.0;
  double pos_score = 0.0;
  std::optional<double> size_iou;
  double success_rate = 0.0;
  double seconds = 0.0;
  std::vector<std::string> failure_messages;
};

struct EvalConfig {
  int samples_per_graph = 3;
  std::uint64_t seed = 0;
  SamplerConfig sampler;
  RuleConfig rules;
  IouMode iou_mode = IouMode::kVolumetric;
  /// Gradient-descent knobs of the greedy baseline.
  int greedy_steps = 400;
  double greedy_step_size = 0.02;

  void validate() const;
};

/// Produces one layout for a graph from a seed; may throw to signal failure.
using Placer = std::function<Layout(const SceneGraph&, std::uint64_t)>;

/// Seed of sample j of graph i.
std::uint64_t eval_sample_seed(std::uint64_t base, std::size_t graph,
                               std::size_t sample);

/// Generic evaluation loop. Placer errors count as failures and do not abort
/// the suite.
SuiteReport evaluate_placer(const Suite& suite, const std::string& method,
                            const Placer& placer, const EvalConfig& cfg);

/// Compositional-diffusion evaluation of a suite. Each graph is sampled as
/// one batch, so a sampler error fails all samples of that graph.
SuiteReport evaluate_suite(const Suite& suite, const TrainedModel& model,
                           const NoiseSchedule& sched, const EvalConfig& cfg);

enum class Method { kRandomPlacer, kGreedyEnergyDescent, kCompositionalDiffusion };

std::string_view method_name(Method m);
Method method_from_name(std::string_view name);
inline constexpr Method kAllMethods[] = {Method::kRandomPlacer,
                                         Method::kGreedyEnergyDescent,
                                         Method::kCompositionalDiffusion};

/// Uniform centers on the unit square.
Layout random_placement(const SceneGraph& g, std::uint64_t seed);

/// Plain gradient descent on the analytic soft energy from the sampler's
/// initial distribution.
Layout greedy_placement(const SceneGraph& g, std::uint64_t seed,
                        const EvalConfig& cfg);

/// One row per method. The diffusion row is marked absent when model is null.
std::vector<SuiteReport> compare_methods(const Suite& suite,
                                         std::span<const Method> methods,
                                         const TrainedModel* model,
                                         const NoiseSchedule& sched,
                                         const EvalConfig& cfg);

/// Aligned plain-text table with columns rel_cov deg conf pos_score size_iou
/// success_rate.
std::string format_report(std::span<const SuiteReport> rows);
nlohmann::json report_to_json(std::span<const SuiteReport> rows);

}  // namespace layoutgen
