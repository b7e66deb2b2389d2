#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

#include "layoutgen/model.hpp"
#include "layoutgen/schedule.hpp"
#include "layoutgen/synth.hpp"

namespace layoutgen {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-3;
  /// Cosine decay from learning_rate to learning_rate * final_lr_fraction.
  double final_lr_fraction = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
  ModelConfig model;
  /// Test knobs: pin the timestep and/or reuse one noise draw per record.
  std::optional<int> fixed_timestep;
  bool fixed_noise = false;

  void validate() const;
};

TrainConfig train_config_from_json(const nlohmann::json& doc);
nlohmann::json train_config_to_json(const TrainConfig& cfg);

struct TrainResult {
  TrainedModel model;
  std::vector<double> epoch_loss;
  std::vector<double> step_loss;
};

/// Called after every epoch with (epoch index, mean loss).
using EpochCallback = std::function<void(int, double)>;

/// Minibatch Adam on the composed denoising loss. Single-threaded and
/// deterministic for a given seed. Throws TrainingDiverged on a
/// non-finite loss.
TrainResult train(std::span<const DatasetRecord> dataset,
                  const TrainConfig& cfg, const NoiseSchedule& sched,
                  const EpochCallback& on_epoch = {});

/// Composed denoising loss over dataset records with noise drawn from rng.
LossResult<float> record_loss(std::span<const DatasetRecord> batch,
                              const TrainedModel& model,
                              const NoiseSchedule& sched, std::mt19937_64& rng);

/// Loss on a fixed set of noise draws (seeded), without gradients. Used to
/// compare parameter sets on identical inputs.
double evaluation_loss(std::span<const DatasetRecord> dataset,
                       const TrainedModel& model, const NoiseSchedule& sched,
                       std::uint64_t seed, int draws_per_record = 4);

}  // namespace layoutgen
