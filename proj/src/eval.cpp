#include "layoutgen/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "layoutgen/error.hpp"
#include "layoutgen/graph.hpp"
#include "layoutgen/random.hpp"

namespace layoutgen {

namespace {

constexpr char kSizesFile[] = "sizes.json";

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

SizeInches size_from_json(const nlohmann::json& doc) {
  return SizeInches{doc.at("width").get<double>(), doc.at("length").get<double>(),
                    doc.at("height").get<double>()};
}

// Mean size agreement over the objects that have a truth entry.
std::optional<double> entry_size_iou(const SuiteEntry& entry, IouMode mode) {
  double sum = 0.0;
  int count = 0;
  for (const auto& [id, truth] : entry.true_sizes) {
    const ObjectSpec* spec = entry.graph.find(id);
    if (spec == nullptr) {
      throw InvalidArgument("size truth names unknown object '" + id + "'");
    }
    sum += size_iou(spec->size, truth, mode);
    ++count;
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

}  // namespace

double size_iou(const SizeInches& predicted, const SizeInches& truth,
                IouMode mode) {
  const double p[] = {predicted.width, predicted.length, predicted.height};
  const double t[] = {truth.width, truth.length, truth.height};
  for (int d = 0; d < 3; ++d) {
    if (!(p[d] > 0.0) || !(t[d] > 0.0)) {
      throw InvalidArgument("size_iou needs positive dimensions");
    }
  }
  if (mode == IouMode::kVolumetric) {
    double num = 1.0;
    double den = 1.0;
    for (int d = 0; d < 3; ++d) {
      num *= std::min(p[d], t[d]);
      den *= std::max(p[d], t[d]);
    }
    return num / den;
  }
  double sum = 0.0;
  for (int d = 0; d < 3; ++d) sum += std::min(p[d], t[d]) / std::max(p[d], t[d]);
  return sum / 3.0;
}

Suite make_suite(std::string name, std::vector<SceneGraph> graphs) {
  Suite suite;
  suite.name = std::move(name);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    suite.entries.push_back({"graph_" + std::to_string(i), std::move(graphs[i]), {}});
  }
  return suite;
}

Suite load_suite(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("suite directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& item : fs::directory_iterator(dir)) {
    if (item.path().extension() == ".json" && item.path().filename() != kSizesFile) {
      files.push_back(item.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InvalidArgument("suite directory has no graphs: " + dir);

  nlohmann::json sizes = nlohmann::json::object();
  const fs::path sizes_path = fs::path(dir) / kSizesFile;
  if (fs::exists(sizes_path)) {
    try {
      sizes = nlohmann::json::parse(read_text_file(sizes_path.string()));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(sizes_path.string() + ": " + e.what());
    }
  }

  Suite suite;
  suite.name = fs::path(dir).filename().string();
  if (suite.name.empty()) suite.name = fs::path(dir).parent_path().filename().string();
  for (const auto& file : files) {
    SuiteEntry entry;
    entry.name = file.stem().string();
    entry.graph = load_graph(file.string());
    if (sizes.contains(entry.name)) {
      try {
        for (const auto& [id, size] : sizes.at(entry.name).items()) {
          entry.true_sizes[id] = size_from_json(size);
        }
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(sizes_path.string() + ": " + e.what());
      }
    }
    suite.entries.push_back(std::move(entry));
  }
  return suite;
}

void EvalConfig::validate() const {
  if (samples_per_graph < 1) throw InvalidArgument("samples_per_graph must be >= 1");
  if (greedy_steps < 0) throw InvalidArgument("greedy_steps must be >= 0");
  if (!(greedy_step_size > 0.0)) throw InvalidArgument("greedy_step_size must be > 0");
  sampler.validate();
  rules.validate();
}

std::uint64_t eval_sample_seed(std::uint64_t base, std::size_t graph,
                               std::size_t sample) {
  return batch_sample_seed(derive_seed(base, graph), sample);
}

namespace {

// Produces every sample of one graph; an exception fails all of them.
using GraphSampler =
    std::function<std::vector<Layout>(const SceneGraph&, std::size_t graph_index)>;

SuiteReport evaluate_with(const Suite& suite, const std::string& method,
                          const GraphSampler& draw, const EvalConfig& cfg) {
  if (suite.entries.empty()) throw InvalidArgument("suite is empty");
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();

  SuiteReport report;
  report.suite = suite.name;
  report.method = method;
  report.graphs = suite.entries.size();
  const auto per_graph = static_cast<std::size_t>(cfg.samples_per_graph);
  report.samples_requested = per_graph * report.graphs;

  double score_sum = 0.0;
  double iou_sum = 0.0;
  int iou_count = 0;
  std::size_t conflicted = 0;
  for (std::size_t i = 0; i < suite.entries.size(); ++i) {
    const SuiteEntry& entry = suite.entries[i];
    const SceneGraph& g = entry.graph;
    report.rel_cov += relationship_coverage(g);
    report.deg += g.objects.empty() ? 0.0 : mean_degree(g);
    if (!detect_conflicts(g).empty()) ++conflicted;
    if (const auto iou = entry_size_iou(entry, cfg.iou_mode)) {
      iou_sum += *iou;
      ++iou_count;
    }
    try {
      const std::vector<Layout> layouts = draw(g, i);
      for (const Layout& layout : layouts) {
        score_sum += position_score(g, layout, cfg.rules);
        ++report.samples;
      }
      report.failures += per_graph - layouts.size();
    } catch (const std::exception& e) {
      report.failures += per_graph;
      report.failure_messages.push_back(entry.name + ": " + e.what());
    }
  }
  const auto n = static_cast<double>(report.graphs);
  report.rel_cov /= n;
  report.deg /= n;
  report.conf = static_cast<double>(conflicted) / n;
  report.pos_score =
      report.samples > 0 ? score_sum / static_cast<double>(report.samples) : 0.0;
  if (iou_count > 0) report.size_iou = iou_sum / iou_count;
  report.success_rate = static_cast<double>(report.samples) /
                        static_cast<double>(report.samples_requested);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace

SuiteReport evaluate_placer(const Suite& suite, const std::string& method,
                            const Placer& placer, const EvalConfig& cfg) {
  // Placer errors are isolated per sample rather than per graph.
  std::vector<std::string> sample_errors;
  const GraphSampler draw = [&](const SceneGraph& g, std::size_t i) {
    std::vector<Layout> out;
    std::string first_error;
    for (int j = 0; j < cfg.samples_per_graph; ++j) {
      try {
        out.push_back(placer(g, eval_sample_seed(cfg.seed, i, static_cast<std::size_t>(j))));
      } catch (const std::exception& e) {
        if (first_error.empty()) first_error = e.what();
      }
    }
    if (out.empty() && !first_error.empty()) throw InvalidArgument(first_error);
    if (!first_error.empty()) {
      sample_errors.push_back(suite.entries[i].name + ": " + first_error);
    }
    return out;
  };
  SuiteReport report = evaluate_with(suite, method, draw, cfg);
  report.failure_messages.insert(report.failure_messages.end(), sample_errors.begin(),
                                 sample_errors.end());
  return report;
}

SuiteReport evaluate_suite(const Suite& suite, const TrainedModel& model,
                           const NoiseSchedule& sched, const EvalConfig& cfg) {
  // All samples of a graph advance together; sample j of graph i uses
  // eval_sample_seed(cfg.seed, i, j).
  const GraphSampler draw = [&](const SceneGraph& g, std::size_t i) {
    SamplerConfig sc = cfg.sampler;
    sc.seed = derive_seed(cfg.seed, i);
    sc.rules = cfg.rules;
    return sample_batch(g, model, sched, sc, cfg.samples_per_graph).layouts;
  };
  return evaluate_with(suite, std::string(method_name(Method::kCompositionalDiffusion)),
                       draw, cfg);
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kRandomPlacer: return "random-placer";
    case Method::kGreedyEnergyDescent: return "greedy-energy-descent";
    case Method::kCompositionalDiffusion: return "compositional-diffusion";
  }
  return "unknown";
}

Method method_from_name(std::string_view name) {
  for (Method m : kAllMethods) {
    if (method_name(m) == name) return m;
  }
  throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

Layout random_placement(const SceneGraph& g, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> x(2 * g.objects.size());
  for (double& v : x) v = unit(rng);
  return make_layout(g, x);
}

Layout greedy_placement(const SceneGraph& g, std::uint64_t seed,
                        const EvalConfig& cfg) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.5, 0.25);
  std::vector<double> x(2 * g.objects.size());
  for (double& v : x) v = std::clamp(normal(rng), 0.0, 1.0);
  std::vector<double> grad(x.size());
  for (int step = 0; step < cfg.greedy_steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    total_energy(g, x, grad, cfg.rules, cfg.sampler.energy);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = std::clamp(x[i] - cfg.greedy_step_size * grad[i], 0.0, 1.0);
    }
  }
  return make_layout(g, x);
}

std::vector<SuiteReport> compare_methods(const Suite& suite,
                                         std::span<const Method> methods,
                                         const TrainedModel* model,
                                         const NoiseSchedule& sched,
                                         const EvalConfig& cfg) {
  if (suite.entries.empty()) throw InvalidArgument("suite is empty");
  std::vector<SuiteReport> rows;
  for (Method m : methods) {
    switch (m) {
      case Method::kRandomPlacer:
        rows.push_back(evaluate_placer(suite, std::string(method_name(m)),
                                       random_placement, cfg));
        break;
      case Method::kGreedyEnergyDescent:
        rows.push_back(evaluate_placer(
            suite, std::string(method_name(m)),
            [&](const SceneGraph& g, std::uint64_t seed) {
              return greedy_placement(g, seed, cfg);
            },
            cfg));
        break;
      case Method::kCompositionalDiffusion:
        if (model == nullptr) {
          SuiteReport absent;
          absent.suite = suite.name;
          absent.method = std::string(method_name(m));
          absent.present = false;
          absent.graphs = suite.entries.size();
          rows.push_back(std::move(absent));
        } else {
          rows.push_back(evaluate_suite(suite, *model, sched, cfg));
        }
        break;
    }
  }
  return rows;
}

std::string format_report(std::span<const SuiteReport> rows) {
  const std::vector<std::string> header = {"suite",     "method",   "rel_cov",
                                           "deg",       "conf",     "pos_score",
                                           "size_iou",  "success_rate", "samples"};
  std::vector<std::vector<std::string>> table = {header};
  for (const auto& r : rows) {
    if (!r.present) {
      table.push_back({r.suite, r.method, "absent", "-", "-", "-", "-", "-", "0"});
      continue;
    }
    table.push_back({r.suite, r.method, fixed(r.rel_cov, 3), fixed(r.deg, 3),
                     fixed(r.conf, 3), fixed(r.pos_score, 3),
                     r.size_iou ? fixed(*r.size_iou, 3) : "-",
                     fixed(r.success_rate, 3),
                     std::to_string(r.samples) + "/" + std::to_string(r.samples_requested)});
  }
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream out;
  for (const auto& row : table) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out << "  ";
      // Text columns left-aligned, numeric columns right-aligned.
      if (c < 2) {
        out << row[c] << std::string(widths[c] - row[c].size(), ' ');
      } else {
        out << std::string(widths[c] - row[c].size(), ' ') << row[c];
      }
    }
    out << "\n";
  }
  return out.str();
}

nlohmann::json report_to_json(std::span<const SuiteReport> rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row = {{"suite", r.suite}, {"method", r.method}, {"present", r.present},
                          {"graphs", r.graphs}};
    if (r.present) {
      row["samples_requested"] = r.samples_requested;
      row["samples"] = r.samples;
      row["failures"] = r.failures;
      row["rel_cov"] = r.rel_cov;
      row["deg"] = r.deg;
      row["conf"] = r.conf;
      row["pos_score"] = r.pos_score;
      row["size_iou"] = r.size_iou ? nlohmann::json(*r.size_iou) : nlohmann::json(nullptr);
      row["success_rate"] = r.success_rate;
      row["seconds"] = r.seconds;
      row["failure_messages"] = r.failure_messages;
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace layoutgen
