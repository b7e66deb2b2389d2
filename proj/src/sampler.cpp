#include "layoutgen/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include "layoutgen/error.hpp"
#include "layoutgen/graph.hpp"
#include "layoutgen/random.hpp"

namespace layoutgen {

namespace {

constexpr double kInitMean = 0.5;
constexpr double kInitStddev = 0.25;

void check_graph(const SceneGraph& g, const TrainedModel* model) {
  validate(g);
  const ConflictReport conflicts = detect_conflicts(g);
  if (!conflicts.empty()) {
    const auto& c = conflicts.conflicts.front();
    throw UnsatisfiableGraph({to_string(c.first), to_string(c.second)},
                             "graph has conflicting edges: " + to_string(c.first) +
                                 " vs " + to_string(c.second));
  }
  if (model == nullptr) return;
  for (const auto& e : g.edges) {
    if (!model->trained_relations.contains(e.relation)) {
      throw MissingDenoiser(std::string(relation_name(e.relation)));
    }
  }
}

constexpr std::size_t kChainsPerChunk = 64;

// Evaluates the composed noise estimate for a fixed graph structure on
// several chains at once, stacked as independent scenes of one batch.
class LearnedScore {
 public:
  LearnedScore(const SceneGraph& g, const TrainedModel& model, std::size_t chains)
      : scene_(ScenePlan::from_graph(g)),
        plan_(make_plan(scene_, chains)),
        net_(model.config, model.params),
        pos_(plan_.object_count(), 2),
        timesteps_(chains, 0) {}

  // x holds chains back to back, each interleaved (cx, cy) per object.
  void eps(std::span<const double> x, int t, std::span<double> out) {
    for (int i = 0; i < plan_.object_count(); ++i) {
      pos_(i, 0) = static_cast<float>(x[2 * static_cast<std::size_t>(i)]);
      pos_(i, 1) = static_cast<float>(x[2 * static_cast<std::size_t>(i) + 1]);
    }
    std::fill(timesteps_.begin(), timesteps_.end(), t);
    const auto e = net_.forward(plan_, pos_, timesteps_, nullptr);
    for (int i = 0; i < plan_.object_count(); ++i) {
      out[2 * static_cast<std::size_t>(i)] = e(i, 0);
      out[2 * static_cast<std::size_t>(i) + 1] = e(i, 1);
    }
  }

 private:
  static BatchPlan make_plan(const ScenePlan& scene, std::size_t chains) {
    std::vector<const ScenePlan*> scenes(chains, &scene);
    return BatchPlan::from_scenes(scenes);
  }

  ScenePlan scene_;
  BatchPlan plan_;
  Network<float> net_;
  Network<float>::Matrix pos_;
  std::vector<int> timesteps_;
};

// Runs one Langevin chain per seed in lockstep. Each chain draws from its own
// generator, so its noise sequence does not depend on the other chains.
std::vector<std::vector<double>> run_chains(const SceneGraph& g,
                                            const TrainedModel& model,
                                            const NoiseSchedule& sched,
                                            const SamplerConfig& cfg,
                                            std::span<const std::uint64_t> seeds,
                                            const SampleObserver& observer) {
  const std::size_t chains = seeds.size();
  const std::size_t dims = 2 * g.objects.size();
  std::vector<Rng> rngs;
  rngs.reserve(chains);
  for (std::uint64_t s : seeds) rngs.emplace_back(s);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> x(chains * dims);
  for (std::size_t c = 0; c < chains; ++c) {
    for (std::size_t i = 0; i < dims; ++i) {
      x[c * dims + i] =
          std::clamp(kInitMean + kInitStddev * normal(rngs[c]), 0.0, 1.0);
    }
  }

  std::optional<LearnedScore> learned;
  if (cfg.source == ScoreSource::kLearned) learned.emplace(g, model, chains);
  std::vector<double> direction(chains * dims);

  for (int t = sched.steps - 1; t >= 0; --t) {
    const double eta = step_size_at(cfg, sched, t);
    const double noise_sd = std::sqrt(eta) * cfg.noise_scale;
    const double inv_sigma =
        1.0 / std::sqrt(1.0 - sched.alpha_bar[static_cast<std::size_t>(t)]);
    for (int k = 0; k < cfg.steps_per_level; ++k) {
      // direction holds the score estimate.
      if (learned) {
        learned->eps(x, t, direction);
        for (double& d : direction) d *= -inv_sigma;
      } else {
        std::fill(direction.begin(), direction.end(), 0.0);
        for (std::size_t c = 0; c < chains; ++c) {
          const std::span<const double> xc(x.data() + c * dims, dims);
          const std::span<double> dc(direction.data() + c * dims, dims);
          total_energy(g, xc, dc, cfg.rules, cfg.energy);
        }
        for (double& d : direction) d = -d;
      }
      for (std::size_t c = 0; c < chains; ++c) {
        for (std::size_t i = c * dims; i < (c + 1) * dims; ++i) {
          x[i] += 0.5 * eta * direction[i];
          if (noise_sd > 0.0) x[i] += noise_sd * normal(rngs[c]);
          if (cfg.clip_to_canvas) x[i] = std::clamp(x[i], 0.0, 1.0);
        }
      }
      if (observer) observer(t, k, x);
    }
  }

  std::vector<std::vector<double>> out(chains);
  for (std::size_t c = 0; c < chains; ++c) {
    out[c].assign(x.begin() + static_cast<std::ptrdiff_t>(c * dims),
                  x.begin() + static_cast<std::ptrdiff_t>((c + 1) * dims));
  }
  return out;
}

}  // namespace

void SamplerConfig::validate() const {
  if (steps_per_level < 1) throw InvalidArgument("steps_per_level must be >= 1");
  if (!(step_size > 0.0)) throw InvalidArgument("step_size must be > 0");
  if (!(noise_scale >= 0.0)) throw InvalidArgument("noise_scale must be >= 0");
  rules.validate();
}

double step_size_at(const SamplerConfig& cfg, const NoiseSchedule& sched,
                    int t) {
  const double floor_var = 1.0 - sched.alpha_bar.front();
  return cfg.step_size * (1.0 - sched.alpha_bar[static_cast<std::size_t>(t)]) /
         floor_var;
}

Layout sample(const SceneGraph& g, const TrainedModel& model,
              const NoiseSchedule& sched, const SamplerConfig& cfg,
              const SampleObserver& observer) {
  cfg.validate();
  check_graph(g, cfg.source == ScoreSource::kLearned ? &model : nullptr);
  const std::uint64_t seeds[] = {cfg.seed};
  return make_layout(g, run_chains(g, model, sched, cfg, seeds, observer).front());
}

std::uint64_t batch_sample_seed(std::uint64_t base, std::size_t i) {
  return derive_seed(base, static_cast<std::uint64_t>(i));
}

BatchSamples sample_batch(const SceneGraph& g, const TrainedModel& model,
                          const NoiseSchedule& sched, const SamplerConfig& cfg,
                          int n) {
  if (n < 1) throw InvalidArgument("sample_batch needs n >= 1");
  cfg.validate();
  check_graph(g, cfg.source == ScoreSource::kLearned ? &model : nullptr);

  BatchSamples out;
  const auto total = static_cast<std::size_t>(n);
  out.layouts.resize(total);
  out.scores.resize(total);
  // Fixed-size chunks keep results independent of the worker count.
  const std::size_t chunks = (total + kChainsPerChunk - 1) / kChainsPerChunk;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t chunk = next.fetch_add(1);
      if (chunk >= chunks) return;
      try {
        const std::size_t begin = chunk * kChainsPerChunk;
        const std::size_t end = std::min(total, begin + kChainsPerChunk);
        std::vector<std::uint64_t> seeds;
        for (std::size_t i = begin; i < end; ++i) {
          seeds.push_back(batch_sample_seed(cfg.seed, i));
        }
        const auto xs = run_chains(g, model, sched, cfg, seeds, {});
        for (std::size_t i = begin; i < end; ++i) {
          out.layouts[i] = make_layout(g, xs[i - begin]);
          out.scores[i] = position_score(g, out.layouts[i], cfg.rules);
        }
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const auto workers = static_cast<unsigned>(std::min<std::size_t>(hw, chunks));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  out.summary.min = *std::min_element(out.scores.begin(), out.scores.end());
  out.summary.max = *std::max_element(out.scores.begin(), out.scores.end());
  double sum = 0.0;
  for (double s : out.scores) sum += s;
  out.summary.mean = sum / static_cast<double>(n);
  return out;
}

}  // namespace layoutgen
