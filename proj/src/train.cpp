#include "layoutgen/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "layoutgen/error.hpp"
#include "layoutgen/random.hpp"

namespace layoutgen {

using nlohmann::json;

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kFixedNoiseStream = 2;
constexpr std::uint64_t kBatchStreamBase = 1ull << 32;

std::vector<double> clean_centers(const DatasetRecord& rec) {
  return centers_of(rec.graph, rec.layout);
}

double l2_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

std::string diverged_message(const ModelParams& params, std::uint64_t batch_seed,
                             int epoch, int step) {
  std::ostringstream os;
  os << "non-finite loss at epoch " << epoch << ", step " << step
     << " (batch seed " << batch_seed << "); parameter norms:";
  for (std::size_t i = 0; i < params.entries().size(); ++i) {
    os << ' ' << params.entry(i).name << '=' << l2_norm(params.data(i));
  }
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs <= 0) throw InvalidArgument("epochs must be > 0");
  if (batch_size <= 0) throw InvalidArgument("batch_size must be > 0");
  if (!(learning_rate >= 0.0)) throw InvalidArgument("learning_rate must be >= 0");
  if (!(final_lr_fraction >= 0.0) || final_lr_fraction > 1.0) {
    throw InvalidArgument("final_lr_fraction must lie in [0, 1]");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidArgument("Adam moment coefficients must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw InvalidArgument("adam_epsilon must be > 0");
  if (!(clip_norm > 0.0)) throw InvalidArgument("clip_norm must be > 0");
  model.validate();
}

TrainConfig train_config_from_json(const json& doc) {
  TrainConfig cfg;
  try {
    cfg.epochs = doc.value("epochs", cfg.epochs);
    cfg.batch_size = doc.value("batch_size", cfg.batch_size);
    cfg.learning_rate = doc.value("learning_rate", cfg.learning_rate);
    cfg.final_lr_fraction = doc.value("final_lr_fraction", cfg.final_lr_fraction);
    cfg.beta1 = doc.value("beta1", cfg.beta1);
    cfg.beta2 = doc.value("beta2", cfg.beta2);
    cfg.adam_epsilon = doc.value("adam_epsilon", cfg.adam_epsilon);
    cfg.clip_norm = doc.value("clip_norm", cfg.clip_norm);
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.model.width = doc.value("width", cfg.model.width);
    cfg.model.position_frequencies =
        doc.value("position_frequencies", cfg.model.position_frequencies);
    const std::string agg = doc.value("aggregation", std::string("mean"));
    if (agg == "mean") {
      cfg.model.aggregation = Aggregation::kMean;
    } else if (agg == "sum") {
      cfg.model.aggregation = Aggregation::kSum;
    } else {
      throw InvalidArgument("aggregation must be 'mean' or 'sum'");
    }
    if (doc.contains("fixed_timestep") && !doc["fixed_timestep"].is_null()) {
      cfg.fixed_timestep = doc["fixed_timestep"].get<int>();
    }
    cfg.fixed_noise = doc.value("fixed_noise", cfg.fixed_noise);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("train config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json train_config_to_json(const TrainConfig& cfg) {
  json doc = {{"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"learning_rate", cfg.learning_rate},
              {"final_lr_fraction", cfg.final_lr_fraction},
              {"beta1", cfg.beta1},
              {"beta2", cfg.beta2},
              {"adam_epsilon", cfg.adam_epsilon},
              {"clip_norm", cfg.clip_norm},
              {"seed", cfg.seed},
              {"width", cfg.model.width},
              {"position_frequencies", cfg.model.position_frequencies},
              {"aggregation",
               cfg.model.aggregation == Aggregation::kMean ? "mean" : "sum"},
              {"fixed_noise", cfg.fixed_noise}};
  doc["fixed_timestep"] =
      cfg.fixed_timestep ? json(*cfg.fixed_timestep) : json(nullptr);
  return doc;
}

TrainResult train(std::span<const DatasetRecord> dataset,
                  const TrainConfig& cfg, const NoiseSchedule& sched,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (dataset.empty()) throw InvalidArgument("training needs a nonempty dataset");
  if (cfg.fixed_timestep &&
      (*cfg.fixed_timestep < 0 || *cfg.fixed_timestep >= sched.steps)) {
    throw InvalidArgument("fixed_timestep outside the schedule");
  }

  std::vector<ScenePlan> plans;
  std::vector<std::vector<double>> cleans;
  plans.reserve(dataset.size());
  TrainResult result;
  result.model.config = cfg.model;
  for (const auto& rec : dataset) {
    plans.push_back(ScenePlan::from_graph(rec.graph));
    cleans.push_back(clean_centers(rec));
    for (const auto& e : rec.graph.edges) {
      result.model.trained_relations.insert(e.relation);
    }
  }
  ModelParams& params = result.model.params;
  params = init_params(cfg.model, derive_seed(cfg.seed, kInitStream));
  std::vector<float> m(params.values().size(), 0.0f);
  std::vector<float> v(params.values().size(), 0.0f);

  std::vector<std::vector<double>> fixed_noise;
  if (cfg.fixed_noise) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      Rng rng(derive_seed(cfg.seed, kFixedNoiseStream + (i << 8)));
      std::vector<double> n(cleans[i].size());
      for (double& x : n) x = normal(rng);
      fixed_noise.push_back(std::move(n));
    }
  }

  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t steps_per_epoch = (dataset.size() + batch - 1) / batch;
  const double total_steps =
      static_cast<double>(steps_per_epoch) * static_cast<double>(cfg.epochs);
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle_rng(derive_seed(cfg.seed, kShuffleStream));
  std::uniform_int_distribution<int> pick_t(0, sched.steps - 1);

  std::uint64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch, ++step) {
      const std::uint64_t batch_seed =
          derive_seed(cfg.seed, kBatchStreamBase + step);
      Rng rng(batch_seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<NoisedExample> examples;
      examples.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        NoisedExample ex;
        ex.plan = &plans[i];
        ex.clean = cleans[i];
        ex.timestep = cfg.fixed_timestep ? *cfg.fixed_timestep : pick_t(rng);
        if (cfg.fixed_noise) {
          ex.noise = fixed_noise[i];
        } else {
          ex.noise.resize(ex.clean.size());
          for (double& x : ex.noise) x = normal(rng);
        }
        examples.push_back(std::move(ex));
      }
      LossResult<float> lr =
          loss_with_noise<float>(examples, cfg.model, params, sched, true);
      if (!std::isfinite(lr.loss)) {
        throw TrainingDiverged(
            diverged_message(params, batch_seed, epoch, static_cast<int>(step)));
      }
      result.step_loss.push_back(lr.loss);
      epoch_sum += lr.loss;

      auto& g = lr.grads.values();
      double norm2 = 0.0;
      for (float x : g) norm2 += static_cast<double>(x) * static_cast<double>(x);
      const double norm = std::sqrt(norm2);
      if (!std::isfinite(norm)) {
        throw TrainingDiverged(
            diverged_message(params, batch_seed, epoch, static_cast<int>(step)));
      }
      const float clip =
          norm > cfg.clip_norm ? static_cast<float>(cfg.clip_norm / norm) : 1.0f;

      const double progress = static_cast<double>(step) / total_steps;
      const double lr_now =
          cfg.learning_rate *
          (cfg.final_lr_fraction + (1.0 - cfg.final_lr_fraction) * 0.5 *
                                       (1.0 + std::cos(std::numbers::pi * progress)));
      const double t = static_cast<double>(step + 1);
      const float bc1 = static_cast<float>(1.0 - std::pow(cfg.beta1, t));
      const float bc2 = static_cast<float>(1.0 - std::pow(cfg.beta2, t));
      const float b1 = static_cast<float>(cfg.beta1);
      const float b2 = static_cast<float>(cfg.beta2);
      const float step_size = static_cast<float>(lr_now);
      const float eps = static_cast<float>(cfg.adam_epsilon);
      auto& p = params.values();
      for (std::size_t i = 0; i < p.size(); ++i) {
        const float gi = g[i] * clip;
        m[i] = b1 * m[i] + (1.0f - b1) * gi;
        v[i] = b2 * v[i] + (1.0f - b2) * gi * gi;
        const float mhat = m[i] / bc1;
        const float vhat = v[i] / bc2;
        p[i] -= step_size * mhat / (std::sqrt(vhat) + eps);
      }
    }
    const double mean = epoch_sum / static_cast<double>(steps_per_epoch);
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return result;
}

LossResult<float> record_loss(std::span<const DatasetRecord> batch,
                              const TrainedModel& model,
                              const NoiseSchedule& sched, std::mt19937_64& rng) {
  std::vector<ScenePlan> plans;
  plans.reserve(batch.size());
  std::vector<PlannedExample> examples;
  for (const auto& rec : batch) plans.push_back(ScenePlan::from_graph(rec.graph));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    examples.push_back({&plans[i], clean_centers(batch[i])});
  }
  return loss(examples, model.config, model.params, sched, rng);
}

double evaluation_loss(std::span<const DatasetRecord> dataset,
                       const TrainedModel& model, const NoiseSchedule& sched,
                       std::uint64_t seed, int draws_per_record) {
  if (dataset.empty()) throw InvalidArgument("evaluation needs records");
  std::vector<ScenePlan> plans;
  plans.reserve(dataset.size());
  for (const auto& rec : dataset) plans.push_back(ScenePlan::from_graph(rec.graph));
  Rng rng(seed);
  std::uniform_int_distribution<int> pick_t(0, sched.steps - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  double weighted = 0.0;
  double coords = 0.0;
  std::vector<NoisedExample> chunk;
  auto flush = [&] {
    if (chunk.empty()) return;
    double n = 0.0;
    for (const auto& ex : chunk) n += static_cast<double>(ex.clean.size());
    const auto r = loss_with_noise<float>(chunk, model.config, model.params,
                                          sched, false);
    weighted += r.loss * n;
    coords += n;
    chunk.clear();
  };
  for (int d = 0; d < draws_per_record; ++d) {
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      NoisedExample ex;
      ex.plan = &plans[i];
      ex.clean = clean_centers(dataset[i]);
      ex.timestep = pick_t(rng);
      ex.noise.resize(ex.clean.size());
      for (double& x : ex.noise) x = normal(rng);
      chunk.push_back(std::move(ex));
      if (chunk.size() == 128) flush();
    }
  }
  flush();
  return weighted / coords;
}

}  // namespace layoutgen
