// Acceptance gate: prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "checks.hpp"
#include "cli_runner.hpp"
#include "grad_check.hpp"
#include "layoutgen/checkpoint.hpp"
#include "layoutgen/error.hpp"
#include "layoutgen/eval.hpp"
#include "layoutgen/graph.hpp"
#include "layoutgen/planner.hpp"
#include "layoutgen/random.hpp"
#include "layoutgen/sampler.hpp"
#include "layoutgen/synth.hpp"
#include "layoutgen/train.hpp"
#include "oracle/box_scorer.hpp"

using namespace layoutgen;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// 1. Predicate oracle equivalence.
Outcome predicate_oracle() {
  const auto start = Clock::now();
  std::size_t checks = 0, disagreements = 0;
  std::string worst;
  for (RelationType r : kAllRelations) {
    const auto stats = testutil::oracle_grid_agreement(r);
    checks += stats.checks;
    disagreements += stats.disagreements;
    if (stats.disagreements > 0) worst += " " + std::string(relation_name(r));
  }
  const double secs = seconds_since(start);
  const double agreement = 100.0 * static_cast<double>(checks - disagreements) / checks;
  return {disagreements == 0 && checks == 10u * 83521u && secs < 10.0,
          std::to_string(checks) + " checks over 10 relations, agreement " +
              fmt("%.4f", agreement) + "%" + (worst.empty() ? "" : " (disagree:" + worst + ")") +
              ", " + fmt("%.2f", secs) + " s (limit 10 s)"};
}

// 2. Conflict detection soundness and completeness.
Outcome conflict_detection() {
  const int mismatches = testutil::conflict_injection_mismatches(1000, 2024);
  return {mismatches == 0, "1000 graphs with 0..5 injected conflicts, " +
                               std::to_string(mismatches) + " miscounted"};
}

// 3. Gradient checks.
Outcome gradient_checks() {
  const auto start = Clock::now();
  const double energy = testutil::energy_gradient_worst(100, 99);
  const auto sched = make_schedule();
  GeneratorConfig gen;
  gen.max_objects = 3;
  double loss_worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    auto c = testutil::make_grad_case(gen, 8, 2, 1000 + static_cast<std::uint64_t>(i));
    std::vector<std::size_t> all(c.params.values().size());
    std::iota(all.begin(), all.end(), 0);
    loss_worst = std::max(loss_worst, testutil::worst_loss_gradient_error(c, sched, all));
  }
  const double secs = seconds_since(start);
  return {energy <= 1e-3 && loss_worst <= 1e-3 && secs < 60.0,
          "worst relative error: energy " + fmt("%.2e", energy) + ", loss " +
              fmt("%.2e", loss_worst) + " (limit 1e-3), " + fmt("%.1f", secs) +
              " s (limit 60 s)"};
}

// 4. Schedule sanity.
Outcome schedule_sanity() {
  const NoiseSchedule s = make_schedule();
  bool decreasing = true;
  for (int t = 1; t < s.steps; ++t) decreasing &= s.alpha_bar[t] < s.alpha_bar[t - 1];
  const bool first = s.alpha_bar[0] == 1.0 - s.beta[0];
  return {decreasing && first && s.steps == 1000,
          std::string("T=") + std::to_string(s.steps) + ", strictly decreasing " +
              (decreasing ? "yes" : "no") + ", alpha_bar[0] = 1 - beta_0 " +
              (first ? "exactly" : "NOT exactly")};
}

// 5. Dataset validity.
Outcome dataset_validity() {
  const auto start = Clock::now();
  const GeneratorConfig cfg;
  const auto records = generate_dataset(cfg, 300, 300);
  int perfect = 0;
  for (const auto& rec : records) {
    perfect += oracle::score(rec.graph, rec.layout, cfg.rules.close_threshold,
                             cfg.rules.away_threshold) == 1.0;
  }
  const double secs = seconds_since(start);
  return {perfect == 300 && secs < 120.0,
          std::to_string(perfect) + "/300 records score 1.0 under the independent scorer, " +
              fmt("%.2f", secs) + " s (limit 120 s)"};
}

// 6. Training convergence at desk scale.
Outcome training_convergence() {
  GeneratorConfig gen;
  gen.min_objects = gen.max_objects = 2;
  gen.min_binary_edges = gen.max_binary_edges = 1;
  gen.relation_weights = {{RelationType::kLeftOf, 1.0},
                          {RelationType::kCloseTo, 1.0},
                          {RelationType::kTopOf, 1.0}};
  const auto data = generate_dataset(gen, 300, 6);
  const auto sched = make_schedule();
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 32;
  cfg.seed = 6;

  // The starting point is the initialized network, which a zero-rate run
  // returns unchanged.
  TrainConfig frozen = cfg;
  frozen.learning_rate = 0.0;
  frozen.epochs = 1;
  const double initial = evaluation_loss(data, train(data, frozen, sched).model, sched, 66);

  const auto start = Clock::now();
  const TrainResult a = train(data, cfg, sched);
  const double secs = seconds_since(start);
  const TrainResult b = train(data, cfg, sched);
  const double final_loss = evaluation_loss(data, a.model, sched, 66);
  const bool deterministic =
      a.step_loss == b.step_loss && a.model.params.values() == b.model.params.values();
  const double ratio = final_loss / initial;
  return {ratio <= 0.25 && secs <= 900.0 && deterministic,
          "held-out-noise loss " + fmt("%.4f", initial) + " -> " + fmt("%.4f", final_loss) +
              " (ratio " + fmt("%.3f", ratio) + ", limit 0.25) in " + fmt("%.1f", secs) +
              " s (limit 900 s), repeat run " + (deterministic ? "bit-identical" : "DIFFERS")};
}

SceneGraph single_relation_graph(RelationType r) {
  SceneGraph g;
  g.scene_label = "bedroom";
  g.objects = {testutil::object("nightstand", 20, 16, 24), testutil::object("wardrobe", 48, 24, 72)};
  g.edges = {testutil::edge(RelationType::kInScene, "nightstand"),
             testutil::edge(RelationType::kInScene, "wardrobe")};
  if (r == RelationType::kInScene) return g;
  g.edges.push_back(is_unary(r) ? testutil::edge(r, "nightstand")
                                : testutil::edge(r, "nightstand", "wardrobe"));
  return g;
}

// Share of samples satisfying the edges of the named relation only.
double relation_only_score(const SceneGraph& g, RelationType r, const BatchSamples& b) {
  SceneGraph only = g;
  std::erase_if(only.edges, [&](const RelationEdge& e) { return e.relation != r; });
  double sum = 0.0;
  for (const auto& layout : b.layouts) sum += position_score(only, layout);
  return sum / static_cast<double>(b.layouts.size());
}

// 7. Single-relation satisfy rate.
Outcome single_relation(const Checkpoint& ck) {
  const int n = 200;
  bool pass = true;
  std::string detail;
  for (RelationType r : kAllRelations) {
    if (!ck.model.trained_relations.contains(r)) continue;
    const SceneGraph g = single_relation_graph(r);
    double mean[2];
    double edge_only = 0.0;
    for (int s = 0; s < 2; ++s) {
      SamplerConfig cfg;
      cfg.seed = 700 + static_cast<std::uint64_t>(s);
      const BatchSamples b = sample_batch(g, ck.model, ck.schedule, cfg, n);
      mean[s] = b.summary.mean;
      if (s == 0) edge_only = relation_only_score(g, r, b);
    }
    const bool ok = mean[0] >= 0.90 && std::abs(mean[1] - mean[0]) <= 0.03;
    pass &= ok;
    detail += "\n      " + std::string(relation_name(r)) + ": " + fmt("%.3f", mean[0]) +
              " (second seed " + fmt("%.3f", mean[1]) + ", relation edge alone " +
              fmt("%.3f", edge_only) + ")" + (ok ? "" : "  <-- below 0.90 or unstable");
  }
  return {pass, std::to_string(ck.model.trained_relations.size()) +
                    " trained relations, mean position_score over 200 samples >= 0.90 and "
                    "seed spread <= 0.03:" + detail};
}

// Satisfiable graphs drawn from gen, with a ground-truth layout as witness.
Suite satisfiable_suite(const std::string& name, const GeneratorConfig& gen, int count,
                        std::uint64_t seed) {
  std::vector<SceneGraph> graphs;
  for (std::uint64_t i = 0; static_cast<int>(graphs.size()) < count; ++i) {
    SceneGraph g = sample_graph(gen, derive_seed(seed, i));
    try {
      sample_layout(g, gen, derive_seed(seed, i + 1000000));
    } catch (const UnsatisfiableGraph&) {
      continue;
    }
    graphs.push_back(std::move(g));
  }
  return make_suite(name, std::move(graphs));
}

GeneratorConfig trained_mix(const Checkpoint& ck, int objects, int binary_edges) {
  GeneratorConfig gen;
  gen.min_objects = gen.max_objects = objects;
  gen.min_binary_edges = gen.max_binary_edges = binary_edges;
  gen.relation_weights.clear();
  for (RelationType r : ck.model.trained_relations) {
    if (!is_unary(r)) gen.relation_weights[r] = 1.0;
  }
  return gen;
}

struct SuitePair {
  double diffusion = 0.0;
  double random = 0.0;
};

SuitePair diffusion_and_random(const Suite& suite, const Checkpoint& ck, std::uint64_t seed) {
  EvalConfig cfg;
  cfg.seed = seed;
  cfg.samples_per_graph = 8;
  const SuiteReport d = evaluate_suite(suite, ck.model, ck.schedule, cfg);
  cfg.samples_per_graph = 400;
  const SuiteReport r = evaluate_placer(suite, "random-placer", random_placement, cfg);
  return {d.pos_score, r.pos_score};
}

// 8. Compositional generalization to unseen 3-object, 3-edge graphs.
Outcome compositional(const Checkpoint& ck) {
  const Suite suite = satisfiable_suite("three-by-three", trained_mix(ck, 3, 3), 25, 8);
  const SuitePair p = diffusion_and_random(suite, ck, 88);
  const double margin = p.diffusion - p.random;
  return {p.diffusion >= 0.70 && margin >= 0.2,
          "25 graphs x 8 samples: diffusion " + fmt("%.3f", p.diffusion) +
              " (limit 0.70), random placer " + fmt("%.3f", p.random) + ", margin " +
              fmt("%.3f", margin) + " (limit 0.20)"};
}

// 9. Degradation from 2-object to 4-object suites.
Outcome degradation(const Checkpoint& ck) {
  const Suite two = satisfiable_suite("two-objects", trained_mix(ck, 2, 1), 25, 9);
  const Suite four = satisfiable_suite("four-objects", trained_mix(ck, 4, 3), 25, 10);
  const SuitePair a = diffusion_and_random(two, ck, 90);
  const SuitePair b = diffusion_and_random(four, ck, 91);
  const double drop_d = a.diffusion - b.diffusion;
  const double drop_r = a.random - b.random;
  return {drop_d <= 0.15 && drop_r > drop_d,
          "diffusion " + fmt("%.3f", a.diffusion) + " -> " + fmt("%.3f", b.diffusion) +
              " (drop " + fmt("%.3f", drop_d) + ", limit 0.15); random placer " +
              fmt("%.3f", a.random) + " -> " + fmt("%.3f", b.random) + " (drop " +
              fmt("%.3f", drop_r) + ", must exceed the diffusion drop)"};
}

// 10. Sampler determinism and throughput.
Outcome sampler_throughput(const Checkpoint& ck) {
  SceneGraph g;
  g.scene_label = "bedroom";
  g.objects = {testutil::object("bed", 80, 60, 24), testutil::object("lamp", 8, 8, 24),
               testutil::object("nightstand", 20, 16, 24), testutil::object("plant", 14, 14, 36)};
  for (const auto& o : g.objects) g.edges.push_back(testutil::edge(RelationType::kInScene, o.id));
  const RelationType wanted[] = {RelationType::kCloseTo, RelationType::kLeftOf,
                                 RelationType::kAwayFrom};
  const char* subjects[] = {"lamp", "nightstand", "plant"};
  for (int i = 0; i < 3; ++i) {
    if (ck.model.trained_relations.contains(wanted[i])) {
      g.edges.push_back(testutil::edge(wanted[i], subjects[i], "bed"));
    }
  }
  SamplerConfig cfg;
  cfg.seed = 1010;
  const auto t0 = Clock::now();
  const Layout a = sample(g, ck.model, ck.schedule, cfg);
  const double first = seconds_since(t0);
  const auto t1 = Clock::now();
  const Layout b = sample(g, ck.model, ck.schedule, cfg);
  const double second = seconds_since(t1);
  const double worst = std::max(first, second);
  return {a == b && worst <= 5.0 && cfg.steps_per_level == 2 && ck.schedule.steps == 1000,
          std::string("4-object scene, K=2, T=1000: repeat ") +
              (a == b ? "bit-identical" : "DIFFERS") + ", " + fmt("%.2f", worst) +
              " s per scene (limit 5 s)"};
}

// 11. plan -> sample -> score -> render through the CLI on every fixture.
Outcome end_to_end(const std::string& ckpt, const fs::path& work) {
  using testutil::run_cli;
  using testutil::shell_quote;
  const std::string fixtures = LAYOUTGEN_TEST_FIXTURES;
  bool pass = true;
  std::string detail;
  for (const char* scene : {"bedroom", "living_room", "billiard_room", "garage"}) {
    const fs::path dir = work / scene;
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string graph = (dir / "graph.json").string();
    std::string failed;
    auto step = [&](const std::string& name, const std::string& args) {
      if (!failed.empty()) return;
      const auto r = run_cli(args);
      if (r.status != 0) failed = name + " exit " + std::to_string(r.status) + ": " + r.output;
    };
    step("plan", "plan --seed 1 --request " +
                     shell_quote(fixtures + "/" + scene + ".request.json") + " --out " +
                     shell_quote((dir / "plan.json").string()) + " --graph-out " +
                     shell_quote(graph));
    step("check-graph", "check-graph " + shell_quote(graph));
    step("sample", "sample --n 3 --seed 1 --graph " + shell_quote(graph) + " --ckpt " +
                       shell_quote(ckpt) + " --out " + shell_quote((dir / "samples").string()));
    for (int i = 0; i < 3; ++i) {
      const std::string layout = (dir / "samples" / ("layout_00" + std::to_string(i) + ".json")).string();
      step("score", "score --graph " + shell_quote(graph) + " --layout " + shell_quote(layout));
      step("render", "render --annotate --graph " + shell_quote(graph) + " --layout " +
                         shell_quote(layout) + " --out " +
                         shell_quote((dir / ("layout_00" + std::to_string(i) + ".svg")).string()));
    }
    bool conflict_free = false;
    if (failed.empty()) conflict_free = detect_conflicts(load_graph(graph)).empty();
    const bool ok = failed.empty() && conflict_free;
    pass &= ok;
    detail += std::string(" ") + scene + "=" + (ok ? "ok" : "FAILED");
    if (!failed.empty()) detail += " (" + failed + ")";
  }
  return {pass, "all steps exit 0 with conflict-free graphs:" + detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string ckpt = argc > 1 ? argv[1] : LAYOUTGEN_REFERENCE_CKPT;
  const fs::path work = fs::path(argc > 2 ? argv[2] : "acceptance_work");
  fs::create_directories(work);

  std::optional<Checkpoint> reference;
  std::string load_error;
  try {
    reference = load_checkpoint(ckpt);
  } catch (const std::exception& e) {
    load_error = e.what();
  }

  struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> run;
    bool needs_reference;
  };
  const std::vector<Criterion> criteria = {
      {1, "predicate oracle equivalence", predicate_oracle, false},
      {2, "conflict detection soundness and completeness", conflict_detection, false},
      {3, "energy and loss gradient checks", gradient_checks, false},
      {4, "schedule sanity", schedule_sanity, false},
      {5, "dataset validity", dataset_validity, false},
      {6, "training convergence", training_convergence, false},
      {7, "single-relation satisfy rate", [&] { return single_relation(*reference); }, true},
      {8, "compositional generalization", [&] { return compositional(*reference); }, true},
      {9, "object-count degradation trend", [&] { return degradation(*reference); }, true},
      {10, "sampler determinism and throughput", [&] { return sampler_throughput(*reference); },
       true},
      {11, "end-to-end pipeline", [&] { return end_to_end(ckpt, work); }, true},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto start = Clock::now();
    if (c.needs_reference && !reference) {
      o = {false, "reference checkpoint unavailable: " + load_error};
    } else {
      try {
        o = c.run();
      } catch (const std::exception& e) {
        o = {false, std::string("error: ") + e.what()};
      }
    }
    failures += o.pass ? 0 : 1;
    std::printf("[%s] %2d %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title,
                seconds_since(start), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu acceptance criteria passed\n",
              static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
