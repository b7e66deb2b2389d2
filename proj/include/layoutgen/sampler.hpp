#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "layoutgen/model.hpp"
#include "layoutgen/relations.hpp"
#include "layoutgen/scene.hpp"
#include "layoutgen/schedule.hpp"

namespace layoutgen {

enum class ScoreSource {
  kLearned,
  /// Diagnostic mode: the negative gradient of the analytic soft energy
  /// replaces the learned score.
  kAnalyticEnergy,
};

struct SamplerConfig {
  int steps_per_level = 2;
  /// Step size at the least-noisy level, normalized units squared.
  double step_size = 2e-4;
  /// Multiplier on the injected Gaussian noise; 0 gives plain descent.
  double noise_scale = 1.0;
  bool clip_to_canvas = true;
  std::uint64_t seed = 0;
  ScoreSource source = ScoreSource::kLearned;
  RuleConfig rules;
  EnergyOptions energy;

  void validate() const;
};

/// Langevin step size at level t: step_size * (1 - alpha_bar[t]) /
/// (1 - alpha_bar[0]).
double step_size_at(const SamplerConfig& cfg, const NoiseSchedule& sched, int t);

/// Observer invoked after every update with (t, inner step, centers).
using SampleObserver =
    std::function<void(int, int, std::span<const double>)>;

/// Annealed unadjusted Langevin sampling from T-1 down to 0. Throws
/// MissingDenoiser for relations the model was not trained on and
/// UnsatisfiableGraph for conflicting graphs.
Layout sample(const SceneGraph& g, const TrainedModel& model,
              const NoiseSchedule& sched, const SamplerConfig& cfg,
              const SampleObserver& observer = {});

struct ScoreSummary {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct BatchSamples {
  std::vector<Layout> layouts;
  std::vector<double> scores;
  ScoreSummary summary;
};

/// Seed of the i-th sample in a batch.
std::uint64_t batch_sample_seed(std::uint64_t base, std::size_t i);

/// n independent samples with counter-derived seeds. Chains advance in
/// lockstep in fixed-size chunks; chunks may run on separate threads.
BatchSamples sample_batch(const SceneGraph& g, const TrainedModel& model,
                          const NoiseSchedule& sched, const SamplerConfig& cfg,
                          int n);

}  // namespace layoutgen
