// layoutgen: command-line entry point for data generation, training,
// sampling, scoring, evaluation, rendering and planning.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "layoutgen/checkpoint.hpp"
#include "layoutgen/error.hpp"
#include "layoutgen/eval.hpp"
#include "layoutgen/graph.hpp"
#include "layoutgen/planner.hpp"
#include "layoutgen/relations.hpp"
#include "layoutgen/render.hpp"
#include "layoutgen/sampler.hpp"
#include "layoutgen/synth.hpp"
#include "layoutgen/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace layoutgen;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

// Thrown by subcommands that finished their work but report a domain failure.
struct DomainFailure {
  std::string message;
};

json read_json_file(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

// Accepts a plain graph document or a dataset record wrapping one.
SceneGraph load_graph_or_record(const std::string& path) {
  const std::string text = read_text_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error&) {
    return parse_graph(text);  // reports line and column
  }
  if (doc.is_object() && doc.contains("graph") && !doc.contains("objects")) {
    return graph_from_json(doc.at("graph"));
  }
  return parse_graph(text);
}

std::string format_score(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  std::string s = buf;
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw IoError("cannot create directory '" + parent.string() + "'");
}

struct GenDataArgs {
  std::string config;
  int n = 300;
  std::uint64_t seed = 0;
  std::string out;
};

int run_gen_data(const GenDataArgs& a) {
  const GeneratorConfig cfg = a.config.empty()
                                  ? GeneratorConfig{}
                                  : generator_config_from_json(read_json_file(a.config));
  ensure_parent(a.out);
  generate_dataset_to_file(cfg, a.n, a.seed, a.out);
  std::cout << "wrote " << a.n << " records to " << a.out << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string data;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  TrainConfig cfg;
  if (!a.config.empty()) cfg = train_config_from_json(read_json_file(a.config));
  if (a.seed) cfg.seed = *a.seed;
  const auto dataset = read_dataset(a.data);
  const NoiseSchedule sched = make_schedule();
  const TrainResult result = train(dataset, cfg, sched, [&](int epoch, double loss) {
    if (!a.quiet) std::cout << "epoch " << epoch << " loss " << loss << "\n";
  });
  ensure_parent(a.out);
  save_checkpoint(a.out, result.model, sched, cfg.seed);
  std::string curve = "epoch,loss\n";
  for (std::size_t i = 0; i < result.epoch_loss.size(); ++i) {
    char line[64];
    std::snprintf(line, sizeof line, "%zu,%.9g\n", i, result.epoch_loss[i]);
    curve += line;
  }
  write_text_file(a.out + ".loss.csv", curve);
  std::cout << "saved checkpoint " << a.out << " (final loss "
            << (result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back()) << ")\n";
  return kExitOk;
}

struct SamplerArgs {
  int steps_per_level = SamplerConfig{}.steps_per_level;
  double step_size = SamplerConfig{}.step_size;
  double noise_scale = SamplerConfig{}.noise_scale;
  bool no_clip = false;
  bool diagnostic = false;
  double close_threshold = 0.25;
  double away_threshold = 0.50;

  SamplerConfig config(std::uint64_t seed) const {
    SamplerConfig c;
    c.steps_per_level = steps_per_level;
    c.step_size = step_size;
    c.noise_scale = noise_scale;
    c.clip_to_canvas = !no_clip;
    c.seed = seed;
    c.source = diagnostic ? ScoreSource::kAnalyticEnergy : ScoreSource::kLearned;
    c.rules = {close_threshold, away_threshold};
    return c;
  }
};

void add_sampler_flags(CLI::App* app, SamplerArgs& s) {
  app->add_option("--steps-per-level", s.steps_per_level, "Langevin steps per noise level");
  app->add_option("--step-size", s.step_size, "Step size at the least-noisy level");
  app->add_option("--noise", s.noise_scale, "Noise multiplier (0 for plain descent)");
  app->add_flag("--no-clip", s.no_clip, "Do not clip centers to the canvas");
  app->add_flag("--diagnostic", s.diagnostic, "Use the analytic energy gradient as the score");
  app->add_option("--close", s.close_threshold, "close-to threshold (canvas widths)");
  app->add_option("--away", s.away_threshold, "away-from threshold (canvas widths)");
}

struct SampleArgs {
  std::string graph;
  std::string ckpt;
  int n = 1;
  std::uint64_t seed = 0;
  std::string out;
  SamplerArgs sampler;
};

int run_sample(const SampleArgs& a) {
  const SceneGraph g = load_graph_or_record(a.graph);
  TrainedModel model;
  NoiseSchedule sched = make_schedule();
  if (!a.ckpt.empty()) {
    Checkpoint ck = load_checkpoint(a.ckpt);
    model = std::move(ck.model);
    sched = std::move(ck.schedule);
  } else if (!a.sampler.diagnostic) {
    throw InvalidArgument("--ckpt is required unless --diagnostic is given");
  }
  const SamplerConfig cfg = a.sampler.config(a.seed);
  const BatchSamples batch = sample_batch(g, model, sched, cfg, a.n);

  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw IoError("cannot create directory '" + a.out + "'");
  json scores = json::array();
  for (std::size_t i = 0; i < batch.layouts.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "layout_%03zu.json", i);
    save_layout(batch.layouts[i], (fs::path(a.out) / name).string());
    scores.push_back({{"file", name},
                      {"seed", batch_sample_seed(a.seed, i)},
                      {"position_score", batch.scores[i]}});
  }
  const json summary = {{"samples", scores},
                        {"mean", batch.summary.mean},
                        {"min", batch.summary.min},
                        {"max", batch.summary.max}};
  write_text_file((fs::path(a.out) / "scores.json").string(), summary.dump(2) + "\n");
  std::cout << "samples " << a.n << " mean " << format_score(batch.summary.mean) << " min "
            << format_score(batch.summary.min) << " max " << format_score(batch.summary.max)
            << "\n";
  return kExitOk;
}

struct ScoreArgs {
  std::string graph;
  std::string layout;
  double close_threshold = 0.25;
  double away_threshold = 0.50;
};

int run_score(const ScoreArgs& a) {
  const SceneGraph g = load_graph_or_record(a.graph);
  const Layout layout = load_layout(a.layout.empty() ? a.graph : a.layout);
  const RuleConfig rules{a.close_threshold, a.away_threshold};
  for (const auto& e : canonicalize(g).edges) {
    std::cout << (holds(e, layout, rules) ? "PASS " : "FAIL ") << to_string(e) << "\n";
  }
  std::cout << "position_score " << format_score(position_score(g, layout, rules)) << "\n";
  return kExitOk;
}

struct CheckArgs {
  std::string graph;
  bool strict = false;
};

int run_check_graph(const CheckArgs& a) {
  const SceneGraph g = load_graph_or_record(a.graph);
  const ConflictReport report = detect_conflicts(g, {a.strict});
  std::cout << "objects " << g.objects.size() << " edges " << g.edges.size() << "\n";
  std::cout << "coverage " << format_score(relationship_coverage(g)) << "\n";
  std::cout << "degree " << format_score(g.objects.empty() ? 0.0 : mean_degree(g)) << "\n";
  std::cout << "conflicts " << report.size() << "\n";
  for (const auto& c : report.conflicts) {
    std::cout << "  " << conflict_kind_name(c.kind) << ": " << to_string(c.first) << " vs "
              << to_string(c.second) << "\n";
  }
  return report.empty() ? kExitOk : kExitDomain;
}

struct EvalArgs {
  std::string suite;
  std::string ckpt;
  std::string out;
  int samples_per_graph = 3;
  std::uint64_t seed = 0;
  std::vector<std::string> methods;
  SamplerArgs sampler;
};

int run_eval(const EvalArgs& a) {
  const Suite suite = load_suite(a.suite);
  std::optional<Checkpoint> ck;
  if (!a.ckpt.empty()) ck = load_checkpoint(a.ckpt);
  EvalConfig cfg;
  cfg.samples_per_graph = a.samples_per_graph;
  cfg.seed = a.seed;
  cfg.sampler = a.sampler.config(a.seed);
  cfg.rules = cfg.sampler.rules;
  std::vector<Method> methods;
  if (a.methods.empty()) {
    methods.assign(std::begin(kAllMethods), std::end(kAllMethods));
  } else {
    for (const auto& m : a.methods) methods.push_back(method_from_name(m));
  }
  const NoiseSchedule sched = ck ? ck->schedule : make_schedule();
  const auto rows = compare_methods(suite, methods, ck ? &ck->model : nullptr, sched, cfg);
  const std::string text = format_report(rows);
  std::cout << text;
  ensure_parent(a.out);
  write_text_file(a.out, report_to_json(rows).dump(2) + "\n");
  write_text_file(fs::path(a.out).replace_extension(".txt").string(), text);
  return kExitOk;
}

struct RenderArgs {
  std::string graph;
  std::string layout;
  std::string out;
  bool annotate = false;
};

int run_render(const RenderArgs& a) {
  const SceneGraph g = load_graph_or_record(a.graph);
  const Layout layout = load_layout(a.layout.empty() ? a.graph : a.layout);
  RenderOptions opt;
  opt.annotate_edges = a.annotate;
  ensure_parent(a.out);
  write_text_file(a.out, render_svg(g, layout, opt));
  std::cout << "wrote " << a.out << "\n";
  return kExitOk;
}

struct PlanArgs {
  std::string request;
  std::string endpoint;
  std::uint64_t seed = 0;
  std::string out;
  std::string graph_out;
};

int run_plan(const PlanArgs& a) {
  const PlanRequest req = load_plan_request(a.request);
  const PlanResponse resp = a.endpoint.empty()
                                ? mock_plan(req, a.seed)
                                : remote_plan(req, EndpointConfig::from_env(a.endpoint));
  const std::string doc = plan_response_to_json(resp).dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << doc;
  } else {
    ensure_parent(a.out);
    write_text_file(a.out, doc);
    std::cout << resp.refined_prompt << "\n";
  }
  if (!a.graph_out.empty()) {
    ensure_parent(a.graph_out);
    save_graph(resp.graph, a.graph_out);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene layout generation with compositional diffusion"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_cmd->add_option("--config", gen.config, "Generator config file");
  gen_cmd->add_option("--n", gen.n, "Number of records")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Base seed");
  gen_cmd->add_option("--out", gen.out, "Output dataset file")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the relation denoisers");
  train_cmd->add_option("--data", tr.data, "Dataset file")->required();
  train_cmd->add_option("--config", tr.config, "Training config file");
  train_cmd->add_option("--out", tr.out, "Output checkpoint")->required();
  train_cmd->add_option("--seed", tr.seed, "Override the config seed");
  train_cmd->add_flag("--quiet", tr.quiet, "Do not print per-epoch losses");

  SampleArgs sa;
  auto* sample_cmd = app.add_subcommand("sample", "Sample layouts for a graph");
  sample_cmd->add_option("--graph", sa.graph, "Scene graph file")->required();
  sample_cmd->add_option("--ckpt", sa.ckpt, "Checkpoint file");
  sample_cmd->add_option("--n", sa.n, "Number of samples")->check(CLI::PositiveNumber);
  sample_cmd->add_option("--seed", sa.seed, "Base seed");
  sample_cmd->add_option("--out", sa.out, "Output directory")->required();
  add_sampler_flags(sample_cmd, sa.sampler);

  ScoreArgs sc;
  auto* score_cmd = app.add_subcommand("score", "Score a layout against its graph");
  score_cmd->add_option("--graph", sc.graph, "Scene graph or dataset record")->required();
  score_cmd->add_option("--layout", sc.layout, "Layout file (defaults to the record)");
  score_cmd->add_option("--close", sc.close_threshold, "close-to threshold (canvas widths)");
  score_cmd->add_option("--away", sc.away_threshold, "away-from threshold (canvas widths)");

  CheckArgs ch;
  auto* check_cmd = app.add_subcommand("check-graph", "Report conflicts, coverage and degree");
  check_cmd->add_option("graph", ch.graph, "Scene graph file")->required();
  check_cmd->add_flag("--strict", ch.strict, "Also flag top-of in both directions");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate methods over a suite");
  eval_cmd->add_option("--suite", ev.suite, "Suite directory")->required();
  eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint (diffusion row absent without it)");
  eval_cmd->add_option("--out", ev.out, "Report file (JSON; a .txt table is written beside it)")
      ->required();
  eval_cmd->add_option("--samples-per-graph", ev.samples_per_graph, "Samples per graph")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", ev.seed, "Base seed");
  eval_cmd->add_option("--methods", ev.methods, "Subset of methods to run");
  add_sampler_flags(eval_cmd, ev.sampler);

  RenderArgs rd;
  auto* render_cmd = app.add_subcommand("render", "Render a layout as SVG");
  render_cmd->add_option("--graph", rd.graph, "Scene graph or dataset record")->required();
  render_cmd->add_option("--layout", rd.layout, "Layout file (defaults to the record)");
  render_cmd->add_option("--out", rd.out, "Output SVG file")->required();
  render_cmd->add_flag("--annotate", rd.annotate, "Draw binary edges as arrows");

  PlanArgs pl;
  auto* plan_cmd = app.add_subcommand("plan", "Plan a scene graph from a request");
  plan_cmd->add_option("--request", pl.request, "Plan request file")->required();
  plan_cmd->add_option("--endpoint", pl.endpoint, "Remote planner base URL");
  plan_cmd->add_option("--seed", pl.seed, "Mock planner seed");
  plan_cmd->add_option("--out", pl.out, "Write the response here instead of stdout");
  plan_cmd->add_option("--graph-out", pl.graph_out, "Also write the planned graph");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return run_gen_data(gen);
    if (train_cmd->parsed()) return run_train(tr);
    if (sample_cmd->parsed()) return run_sample(sa);
    if (score_cmd->parsed()) return run_score(sc);
    if (check_cmd->parsed()) return run_check_graph(ch);
    if (eval_cmd->parsed()) return run_eval(ev);
    if (render_cmd->parsed()) return run_render(rd);
    if (plan_cmd->parsed()) return run_plan(pl);
  } catch (const UnsatisfiableGraph& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const MissingDenoiser& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const UnresolvableSize& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const PlanError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == PlanError::Kind::kTransport ? kExitIo : kExitDomain;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitUsage;
}
