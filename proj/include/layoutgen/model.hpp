#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "layoutgen/scene.hpp"
#include "layoutgen/schedule.hpp"

namespace layoutgen {

// How per-object denoiser outputs are combined before decoding.
enum class Aggregation { kMean, kSum };

struct ModelConfig {
  /// Shared latent width of encoders, time embedding and denoisers.
  int width = 256;
  Aggregation aggregation = Aggregation::kMean;
  /// Octaves of sin/cos features added to each center coordinate before the
  /// position encoder; 0 feeds the raw pair only.
  int position_frequencies = 6;

  /// Input width of the position encoder: 2 + 4 * position_frequencies.
  int position_features() const { return 2 + 4 * position_frequencies; }

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Named row-major arrays packed into one contiguous buffer. Every array
/// starts on a 64-byte boundary so vectorized kernels see the same alignment
/// on every run, which keeps floating-point results bit-reproducible.
template <typename Scalar>
class ParamStore {
 public:
  using Storage = std::vector<Scalar, Eigen::aligned_allocator<Scalar>>;

  struct Entry {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::size_t offset = 0;

    std::size_t size() const {
      return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    }
  };

  std::size_t add(std::string name, int rows, int cols) {
    constexpr std::size_t kAlign = 64 / sizeof(Scalar);
    const std::size_t offset = (values_.size() + kAlign - 1) / kAlign * kAlign;
    Entry e{std::move(name), rows, cols, offset};
    values_.resize(offset + e.size(), Scalar(0));
    count_ += e.size();
    entries_.push_back(std::move(e));
    return entries_.size() - 1;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }
  /// Index of the named entry; throws FormatError when absent.
  std::size_t find(const std::string& name) const;

  std::span<Scalar> data(std::size_t i) {
    return {values_.data() + entries_[i].offset, entries_[i].size()};
  }
  std::span<const Scalar> data(std::size_t i) const {
    return {values_.data() + entries_[i].offset, entries_[i].size()};
  }

  /// Whole buffer including alignment padding, which stays zero unless
  /// written directly.
  Storage& values() { return values_; }
  const Storage& values() const { return values_; }
  /// Number of parameters, padding excluded.
  std::size_t size() const { return count_; }

  /// Same layout, values zeroed.
  ParamStore zeros_like() const {
    ParamStore out = *this;
    std::fill(out.values_.begin(), out.values_.end(), Scalar(0));
    return out;
  }

  template <typename Other>
  ParamStore<Other> cast() const {
    ParamStore<Other> out;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      out.add(e.name, e.rows, e.cols);
      const auto src = data(i);
      const auto dst = out.data(i);
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] = static_cast<Other>(src[k]);
    }
    return out;
  }

 private:
  std::vector<Entry> entries_;
  Storage values_;
  std::size_t count_ = 0;
};

/// Stored parameters are 32-bit.
using ModelParams = ParamStore<float>;

/// Parameter layout for cfg with zero values.
template <typename Scalar>
ParamStore<Scalar> make_param_layout(const ModelConfig& cfg);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Closed-form parameter count for the declared layer shapes.
std::size_t analytic_param_count(const ModelConfig& cfg);

struct TrainedModel {
  ModelConfig config;
  ModelParams params;
  /// Relations that appeared in the training data.
  std::set<RelationType> trained_relations;
};

/// Per-graph structure consumed by the network: normalized sizes and
/// deduplicated edges grouped by relation, in canonical order.
struct ScenePlan {
  struct Edge {
    int subject = 0;
    int object = -1;  // -1 for the scene token
  };

  std::vector<std::array<double, 3>> sizes;
  std::array<std::vector<Edge>, kRelationCount> edges;

  std::size_t object_count() const { return sizes.size(); }
  /// Throws InvalidArgument when an object appears in no edge.
  static ScenePlan from_graph(const SceneGraph& g);
};

/// Several scenes stacked into one set of GEMMs.
struct BatchPlan {
  struct Edge {
    int subject = 0;
    int object = -1;
    int scene = 0;
  };

  int scene_count = 0;
  std::vector<std::array<double, 3>> sizes;
  std::vector<int> degree;
  std::array<std::vector<Edge>, kRelationCount> edges;

  static BatchPlan from_scenes(std::span<const ScenePlan* const> scenes);
  int object_count() const { return static_cast<int>(sizes.size()); }
};

/// Compute engine over a borrowed parameter store. Forward caches
/// activations for a subsequent backward pass.
template <typename Scalar>
class Network {
 public:
  using Matrix =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  struct MlpCache {
    std::vector<Matrix> inputs;  // input of each layer
    std::vector<Matrix> pre;     // pre-activation of each layer
  };

  struct Cache {
    MlpCache size_enc;
    MlpCache pos_enc;
    MlpCache offset_enc;
    MlpCache time_mlp;
    std::array<MlpCache, kRelationCount> denoisers;
    MlpCache decoder;
    std::vector<int> degree;
  };

  Network(const ModelConfig& cfg, const ParamStore<Scalar>& params);

  /// positions: object_count x 2; timesteps: one per scene. Returns the
  /// per-object noise estimate (object_count x 2).
  Matrix forward(const BatchPlan& plan, const Matrix& positions,
                 std::span<const int> timesteps, Cache* cache) const;

  /// Accumulates parameter gradients of sum(d_eps .* eps_hat) into grads.
  void backward(const BatchPlan& plan, const Cache& cache,
                const Matrix& d_eps, ParamStore<Scalar>& grads) const;

  const ModelConfig& config() const { return cfg_; }

 private:
  struct Linear {
    std::size_t weight = 0;
    std::size_t bias = 0;
    int in = 0;
    int out = 0;
  };
  using Mlp = std::vector<Linear>;

  Matrix mlp_forward(const Mlp& mlp, Matrix x, MlpCache* cache) const;
  Matrix mlp_backward(const Mlp& mlp, const MlpCache& cache, Matrix dy,
                      ParamStore<Scalar>& grads) const;
  Matrix time_features(std::span<const int> timesteps) const;
  Matrix position_features(const Matrix& positions) const;

  ModelConfig cfg_;
  const ParamStore<Scalar>* params_;
  Mlp size_enc_;
  Mlp pos_enc_;
  Mlp offset_enc_;
  Mlp time_mlp_;
  std::array<Mlp, kRelationCount> denoisers_;
  Mlp decoder_;
  std::size_t scene_token_ = 0;
};

extern template class Network<float>;
extern template class Network<double>;

/// Composed per-object noise estimate for one graph at timestep t.
/// centers are interleaved (cx, cy) in the graph's object order; the result
/// has the same shape. Duplicate edges and edge order do not affect it.
std::vector<double> predict_eps_composed(const SceneGraph& g,
                                         std::span<const double> centers, int t,
                                         const TrainedModel& model,
                                         const NoiseSchedule& sched);

/// One training example with its noise draw fixed.
struct NoisedExample {
  const ScenePlan* plan = nullptr;
  std::vector<double> clean;  // interleaved centers
  std::vector<double> noise;  // same length
  int timestep = 0;
};

template <typename Scalar>
struct LossResult {
  double loss = 0.0;
  ParamStore<Scalar> grads;
};

/// Mean squared error per coordinate between the drawn noise and the
/// composed prediction on the noised centers, with gradients.
template <typename Scalar>
LossResult<Scalar> loss_with_noise(std::span<const NoisedExample> batch,
                                   const ModelConfig& cfg,
                                   const ParamStore<Scalar>& params,
                                   const NoiseSchedule& sched,
                                   bool want_grads = true);

/// Draws t ~ U{0..T-1} and standard-normal noise per example, then defers
/// to loss_with_noise.
struct PlannedExample {
  const ScenePlan* plan = nullptr;
  std::vector<double> clean;
};

LossResult<float> loss(std::span<const PlannedExample> batch,
                       const ModelConfig& cfg, const ModelParams& params,
                       const NoiseSchedule& sched, std::mt19937_64& rng);

}  // namespace layoutgen
