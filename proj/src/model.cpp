#include "layoutgen/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "layoutgen/error.hpp"

namespace layoutgen {

namespace {

int output_parts(RelationType r) { return is_unary(r) ? 1 : 2; }

// Binary denoisers read (subject, object, offset, time) latents; unary ones
// read (subject, scene token, time).
int input_parts(RelationType r) { return is_unary(r) ? 3 : 4; }

std::string relation_key(RelationType r) {
  std::string s(relation_name(r));
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

template <typename Scalar>
void add_linear(ParamStore<Scalar>& p, const std::string& name, int in,
                int out) {
  p.add(name + ".weight", out, in);
  p.add(name + ".bias", 1, out);
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

}  // namespace

void ModelConfig::validate() const {
  if (width < 2 || width % 2 != 0) {
    throw InvalidArgument("model width must be even and >= 2");
  }
  if (position_frequencies < 0 || position_frequencies > 16) {
    throw InvalidArgument("position_frequencies must be in [0, 16]");
  }
}

template <typename Scalar>
std::size_t ParamStore<Scalar>::find(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  throw FormatError("parameter '" + name + "' not found");
}

template class ParamStore<float>;
template class ParamStore<double>;

template <typename Scalar>
ParamStore<Scalar> make_param_layout(const ModelConfig& cfg) {
  cfg.validate();
  const int w = cfg.width;
  ParamStore<Scalar> p;
  add_linear(p, "size_encoder.0", 3, w);
  add_linear(p, "size_encoder.1", w, w);
  add_linear(p, "position_encoder.0", cfg.position_features(), w);
  add_linear(p, "position_encoder.1", w, w);
  add_linear(p, "offset_encoder.0", cfg.position_features(), w);
  add_linear(p, "offset_encoder.1", w, w);
  add_linear(p, "time_embedding.0", w, w);
  add_linear(p, "time_embedding.1", w, w);
  p.add("scene_token", 1, w);
  for (RelationType r : kAllRelations) {
    const std::string base = "denoiser." + relation_key(r);
    add_linear(p, base + ".0", input_parts(r) * w, w);
    add_linear(p, base + ".1", w, w);
    add_linear(p, base + ".2", w, output_parts(r) * w);
  }
  add_linear(p, "position_decoder.0", w, w);
  add_linear(p, "position_decoder.1", w, 2);
  return p;
}

template ParamStore<float> make_param_layout<float>(const ModelConfig&);
template ParamStore<double> make_param_layout<double>(const ModelConfig&);

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = make_param_layout<float>(cfg);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < p.entries().size(); ++i) {
    const auto& e = p.entry(i);
    double bound = 1.0;
    if (e.name != "scene_token") {
      // Biases share the fan-in of their weight matrix.
      const std::string wname =
          e.name.ends_with(".bias")
              ? e.name.substr(0, e.name.size() - 5) + ".weight"
              : e.name;
      bound = 1.0 / std::sqrt(static_cast<double>(p.entry(p.find(wname)).cols));
    }
    std::uniform_real_distribution<double> u(-bound, bound);
    for (float& v : p.data(i)) v = static_cast<float>(u(rng));
  }
  return p;
}

std::size_t analytic_param_count(const ModelConfig& cfg) {
  const std::size_t w = static_cast<std::size_t>(cfg.width);
  auto linear = [](std::size_t in, std::size_t out) { return in * out + out; };
  std::size_t n = 0;
  n += linear(3, w) + linear(w, w);          // size encoder
  n += linear(static_cast<std::size_t>(cfg.position_features()), w) +
       linear(w, w);                         // position encoder
  n += linear(static_cast<std::size_t>(cfg.position_features()), w) +
       linear(w, w);                         // offset encoder
  n += 2 * linear(w, w);                     // time embedding
  n += w;                                    // scene token
  std::size_t unary = 0;
  for (RelationType r : kAllRelations) unary += is_unary(r) ? 1 : 0;
  const std::size_t binary = kRelationCount - unary;
  n += unary * (linear(3 * w, w) + linear(w, w) + linear(w, w));
  n += binary * (linear(4 * w, w) + linear(w, w) + linear(w, 2 * w));
  n += linear(w, w) + linear(w, 2);          // decoder
  return n;
}

ScenePlan ScenePlan::from_graph(const SceneGraph& g) {
  ScenePlan plan;
  const double ppi = auto_ppi(g.objects, g.canvas);
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < g.objects.size(); ++i) {
    plan.sizes.push_back(normalized_size(g.objects[i], g.canvas, ppi));
    index[g.objects[i].id] = static_cast<int>(i);
  }
  std::vector<RelationEdge> edges = g.edges;
  std::sort(edges.begin(), edges.end(), canonical_less);
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::vector<int> degree(g.objects.size(), 0);
  for (const auto& e : edges) {
    auto s = index.find(e.subject);
    if (s == index.end()) {
      throw InvalidArgument("edge " + to_string(e) + " has unknown subject");
    }
    Edge pe{s->second, -1};
    ++degree[static_cast<std::size_t>(s->second)];
    if (!is_unary(e.relation)) {
      auto o = index.find(e.object);
      if (o == index.end()) {
        throw InvalidArgument("edge " + to_string(e) + " has unknown object");
      }
      pe.object = o->second;
      ++degree[static_cast<std::size_t>(o->second)];
    }
    plan.edges[relation_index(e.relation)].push_back(pe);
  }
  for (std::size_t i = 0; i < degree.size(); ++i) {
    if (degree[i] == 0) {
      throw InvalidArgument("object '" + g.objects[i].id +
                            "' appears in no edge");
    }
  }
  return plan;
}

BatchPlan BatchPlan::from_scenes(std::span<const ScenePlan* const> scenes) {
  BatchPlan b;
  b.scene_count = static_cast<int>(scenes.size());
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const ScenePlan& sp = *scenes[s];
    const int offset = static_cast<int>(b.sizes.size());
    b.sizes.insert(b.sizes.end(), sp.sizes.begin(), sp.sizes.end());
    b.degree.resize(b.sizes.size(), 0);
    for (std::size_t r = 0; r < kRelationCount; ++r) {
      for (const auto& e : sp.edges[r]) {
        const int obj = e.object < 0 ? -1 : e.object + offset;
        b.edges[r].push_back({e.subject + offset, obj, static_cast<int>(s)});
        ++b.degree[static_cast<std::size_t>(e.subject + offset)];
        if (obj >= 0) ++b.degree[static_cast<std::size_t>(obj)];
      }
    }
  }
  return b;
}

template <typename Scalar>
Network<Scalar>::Network(const ModelConfig& cfg,
                         const ParamStore<Scalar>& params)
    : cfg_(cfg), params_(&params) {
  cfg_.validate();
  const int w = cfg_.width;
  auto linear = [&](const std::string& name, int in, int out) {
    Linear l{params.find(name + ".weight"), params.find(name + ".bias"), in,
             out};
    const auto& we = params.entry(l.weight);
    if (we.rows != out || we.cols != in) {
      throw FormatError("parameter '" + we.name + "' has shape " +
                        std::to_string(we.rows) + "x" +
                        std::to_string(we.cols) + ", expected " +
                        std::to_string(out) + "x" + std::to_string(in));
    }
    return l;
  };
  size_enc_ = {linear("size_encoder.0", 3, w), linear("size_encoder.1", w, w)};
  pos_enc_ = {linear("position_encoder.0", cfg.position_features(), w),
              linear("position_encoder.1", w, w)};
  offset_enc_ = {linear("offset_encoder.0", cfg.position_features(), w),
                 linear("offset_encoder.1", w, w)};
  time_mlp_ = {linear("time_embedding.0", w, w),
               linear("time_embedding.1", w, w)};
  scene_token_ = params.find("scene_token");
  for (RelationType r : kAllRelations) {
    const std::string base = "denoiser." + relation_key(r);
    denoisers_[relation_index(r)] = {
        linear(base + ".0", input_parts(r) * w, w), linear(base + ".1", w, w),
        linear(base + ".2", w, output_parts(r) * w)};
  }
  decoder_ = {linear("position_decoder.0", w, w),
              linear("position_decoder.1", w, 2)};
}

template <typename Scalar>
typename Network<Scalar>::Matrix Network<Scalar>::mlp_forward(
    const Mlp& mlp, Matrix x, MlpCache* cache) const {
  using ConstMap = Eigen::Map<const Matrix>;
  using RowMap = Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>;
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  for (std::size_t l = 0; l < mlp.size(); ++l) {
    const Linear& lin = mlp[l];
    ConstMap weight(params_->data(lin.weight).data(), lin.out, lin.in);
    RowMap bias(params_->data(lin.bias).data(), lin.out);
    Matrix z(x.rows(), lin.out);
    z.noalias() = x * weight.transpose();
    z.rowwise() += bias;
    if (cache != nullptr) {
      cache->inputs.push_back(std::move(x));
      cache->pre.push_back(z);
    }
    if (l + 1 < mlp.size()) {
      x = z.unaryExpr([](Scalar v) { return v * sigmoid(v); });
    } else {
      x = std::move(z);
    }
  }
  return x;
}

template <typename Scalar>
typename Network<Scalar>::Matrix Network<Scalar>::mlp_backward(
    const Mlp& mlp, const MlpCache& cache, Matrix dy,
    ParamStore<Scalar>& grads) const {
  using ConstMap = Eigen::Map<const Matrix>;
  using MutMap = Eigen::Map<Matrix>;
  using RowMutMap = Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>;
  for (std::size_t li = mlp.size(); li-- > 0;) {
    const Linear& lin = mlp[li];
    if (li + 1 < mlp.size()) {
      // SiLU'(z) = s(z) * (1 + z * (1 - s(z)))
      const Matrix& z = cache.pre[li];
      dy.array() *= z.unaryExpr([](Scalar v) {
                        const Scalar s = sigmoid(v);
                        return s * (Scalar(1) + v * (Scalar(1) - s));
                      }).array();
    }
    MutMap dw(grads.data(lin.weight).data(), lin.out, lin.in);
    RowMutMap db(grads.data(lin.bias).data(), lin.out);
    dw.noalias() += dy.transpose() * cache.inputs[li];
    db += dy.colwise().sum();
    ConstMap weight(params_->data(lin.weight).data(), lin.out, lin.in);
    Matrix dx(dy.rows(), lin.in);
    dx.noalias() = dy * weight;
    dy = std::move(dx);
  }
  return dy;
}

template <typename Scalar>
typename Network<Scalar>::Matrix Network<Scalar>::time_features(
    std::span<const int> timesteps) const {
  const int half = cfg_.width / 2;
  Matrix out(static_cast<Eigen::Index>(timesteps.size()), cfg_.width);
  for (std::size_t s = 0; s < timesteps.size(); ++s) {
    for (int i = 0; i < half; ++i) {
      const double freq =
          std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
      const double arg = static_cast<double>(timesteps[s]) * freq;
      out(static_cast<Eigen::Index>(s), i) = static_cast<Scalar>(std::sin(arg));
      out(static_cast<Eigen::Index>(s), half + i) =
          static_cast<Scalar>(std::cos(arg));
    }
  }
  return out;
}

template <typename Scalar>
typename Network<Scalar>::Matrix Network<Scalar>::position_features(
    const Matrix& positions) const {
  const int octaves = cfg_.position_frequencies;
  Matrix out(positions.rows(), cfg_.position_features());
  for (Eigen::Index i = 0; i < positions.rows(); ++i) {
    for (int d = 0; d < 2; ++d) {
      const Scalar v = positions(i, d);
      out(i, d) = v;
      for (int k = 0; k < octaves; ++k) {
        const Scalar arg = static_cast<Scalar>(std::ldexp(M_PI, k)) * v;
        out(i, 2 + 4 * k + 2 * d) = std::sin(arg);
        out(i, 3 + 4 * k + 2 * d) = std::cos(arg);
      }
    }
  }
  return out;
}

template <typename Scalar>
typename Network<Scalar>::Matrix Network<Scalar>::forward(
    const BatchPlan& plan, const Matrix& positions,
    std::span<const int> timesteps, Cache* cache) const {
  const int n = plan.object_count();
  const int w = cfg_.width;
  if (positions.rows() != n || positions.cols() != 2) {
    throw InvalidArgument("positions must be object_count x 2");
  }
  if (static_cast<int>(timesteps.size()) != plan.scene_count) {
    throw InvalidArgument("one timestep per scene required");
  }
  Matrix sizes(n, 3);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      sizes(i, k) = static_cast<Scalar>(plan.sizes[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]);
    }
  }
  Matrix latent = mlp_forward(size_enc_, std::move(sizes),
                              cache ? &cache->size_enc : nullptr);
  latent += mlp_forward(pos_enc_, position_features(positions),
                        cache ? &cache->pos_enc : nullptr);
  const Matrix time_latent = mlp_forward(time_mlp_, time_features(timesteps),
                                         cache ? &cache->time_mlp : nullptr);
  Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> scene(
      params_->data(scene_token_).data(), w);

  // Center offsets of every binary edge, grouped by relation in plan order,
  // go through the offset encoder in one pass.
  Eigen::Index binary_rows = 0;
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    if (!is_unary(kAllRelations[r])) binary_rows += static_cast<Eigen::Index>(plan.edges[r].size());
  }
  Matrix offsets(binary_rows, 2);
  Eigen::Index next = 0;
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    if (is_unary(kAllRelations[r])) continue;
    for (const auto& edge : plan.edges[r]) {
      offsets.row(next++) = positions.row(edge.subject) - positions.row(edge.object);
    }
  }
  const Matrix offset_latent = mlp_forward(offset_enc_, position_features(offsets),
                                           cache ? &cache->offset_enc : nullptr);

  Matrix agg = Matrix::Zero(n, w);
  next = 0;
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    const auto& edges = plan.edges[r];
    if (edges.empty()) continue;
    const auto rows = static_cast<Eigen::Index>(edges.size());
    const int parts = input_parts(kAllRelations[r]);
    Matrix x(rows, parts * w);
    for (Eigen::Index e = 0; e < rows; ++e) {
      const auto& edge = edges[static_cast<std::size_t>(e)];
      x.row(e).segment(0, w) = latent.row(edge.subject);
      if (edge.object >= 0) {
        x.row(e).segment(w, w) = latent.row(edge.object);
        x.row(e).segment(2 * w, w) = offset_latent.row(next++);
      } else {
        x.row(e).segment(w, w) = scene;
      }
      x.row(e).segment((parts - 1) * w, w) = time_latent.row(edge.scene);
    }
    const Matrix out = mlp_forward(denoisers_[r], std::move(x),
                                   cache ? &cache->denoisers[r] : nullptr);
    for (Eigen::Index e = 0; e < rows; ++e) {
      const auto& edge = edges[static_cast<std::size_t>(e)];
      agg.row(edge.subject) += out.row(e).segment(0, w);
      if (edge.object >= 0) agg.row(edge.object) += out.row(e).segment(w, w);
    }
  }
  if (cfg_.aggregation == Aggregation::kMean) {
    for (int i = 0; i < n; ++i) {
      const int d = plan.degree[static_cast<std::size_t>(i)];
      if (d > 0) agg.row(i) /= static_cast<Scalar>(d);
    }
  }
  if (cache != nullptr) cache->degree = plan.degree;
  return mlp_forward(decoder_, std::move(agg), cache ? &cache->decoder : nullptr);
}

template <typename Scalar>
void Network<Scalar>::backward(const BatchPlan& plan, const Cache& cache,
                               const Matrix& d_eps,
                               ParamStore<Scalar>& grads) const {
  const int n = plan.object_count();
  const int w = cfg_.width;
  Matrix d_agg = mlp_backward(decoder_, cache.decoder, d_eps, grads);
  if (cfg_.aggregation == Aggregation::kMean) {
    for (int i = 0; i < n; ++i) {
      const int d = cache.degree[static_cast<std::size_t>(i)];
      if (d > 0) d_agg.row(i) /= static_cast<Scalar>(d);
    }
  }
  Matrix d_latent = Matrix::Zero(n, w);
  Matrix d_time = Matrix::Zero(plan.scene_count, w);
  Matrix d_offset(cache.offset_enc.inputs.front().rows(), w);
  Eigen::Index next = 0;
  Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> d_scene(
      grads.data(scene_token_).data(), w);
  for (std::size_t r = 0; r < kRelationCount; ++r) {
    const auto& edges = plan.edges[r];
    if (edges.empty()) continue;
    const auto rows = static_cast<Eigen::Index>(edges.size());
    const int parts = output_parts(kAllRelations[r]);
    const int in_parts = input_parts(kAllRelations[r]);
    Matrix d_out(rows, parts * w);
    for (Eigen::Index e = 0; e < rows; ++e) {
      const auto& edge = edges[static_cast<std::size_t>(e)];
      d_out.row(e).segment(0, w) = d_agg.row(edge.subject);
      if (edge.object >= 0) d_out.row(e).segment(w, w) = d_agg.row(edge.object);
    }
    const Matrix dx =
        mlp_backward(denoisers_[r], cache.denoisers[r], std::move(d_out), grads);
    for (Eigen::Index e = 0; e < rows; ++e) {
      const auto& edge = edges[static_cast<std::size_t>(e)];
      d_latent.row(edge.subject) += dx.row(e).segment(0, w);
      if (edge.object >= 0) {
        d_latent.row(edge.object) += dx.row(e).segment(w, w);
        d_offset.row(next++) = dx.row(e).segment(2 * w, w);
      } else {
        d_scene += dx.row(e).segment(w, w);
      }
      d_time.row(edge.scene) += dx.row(e).segment((in_parts - 1) * w, w);
    }
  }
  mlp_backward(offset_enc_, cache.offset_enc, std::move(d_offset), grads);
  mlp_backward(time_mlp_, cache.time_mlp, std::move(d_time), grads);
  mlp_backward(size_enc_, cache.size_enc, d_latent, grads);
  mlp_backward(pos_enc_, cache.pos_enc, std::move(d_latent), grads);
}

template class Network<float>;
template class Network<double>;

std::vector<double> predict_eps_composed(const SceneGraph& g,
                                         std::span<const double> centers, int t,
                                         const TrainedModel& model,
                                         const NoiseSchedule& sched) {
  if (t < 0 || t >= sched.steps) throw InvalidArgument("timestep out of range");
  if (centers.size() != 2 * g.objects.size()) {
    throw InvalidArgument("center vector length does not match object count");
  }
  const ScenePlan scene = ScenePlan::from_graph(g);
  const ScenePlan* scenes[] = {&scene};
  const BatchPlan plan = BatchPlan::from_scenes(scenes);
  Network<float> net(model.config, model.params);
  Network<float>::Matrix pos(plan.object_count(), 2);
  for (int i = 0; i < plan.object_count(); ++i) {
    pos(i, 0) = static_cast<float>(centers[2 * static_cast<std::size_t>(i)]);
    pos(i, 1) = static_cast<float>(centers[2 * static_cast<std::size_t>(i) + 1]);
  }
  const int ts[] = {t};
  const auto eps = net.forward(plan, pos, ts, nullptr);
  std::vector<double> out(centers.size());
  for (int i = 0; i < plan.object_count(); ++i) {
    out[2 * static_cast<std::size_t>(i)] = eps(i, 0);
    out[2 * static_cast<std::size_t>(i) + 1] = eps(i, 1);
  }
  return out;
}

template <typename Scalar>
LossResult<Scalar> loss_with_noise(std::span<const NoisedExample> batch,
                                   const ModelConfig& cfg,
                                   const ParamStore<Scalar>& params,
                                   const NoiseSchedule& sched,
                                   bool want_grads) {
  if (batch.empty()) throw InvalidArgument("loss needs a nonempty batch");
  using Matrix = typename Network<Scalar>::Matrix;
  std::vector<const ScenePlan*> scenes;
  std::vector<int> timesteps;
  for (const auto& ex : batch) {
    if (ex.plan == nullptr || ex.clean.size() != 2 * ex.plan->object_count() ||
        ex.noise.size() != ex.clean.size()) {
      throw InvalidArgument("example shape mismatch");
    }
    if (ex.timestep < 0 || ex.timestep >= sched.steps) {
      throw InvalidArgument("timestep out of range");
    }
    scenes.push_back(ex.plan);
    timesteps.push_back(ex.timestep);
  }
  const BatchPlan plan = BatchPlan::from_scenes(scenes);
  const int n = plan.object_count();
  Matrix noisy(n, 2);
  Matrix target(n, 2);
  int row = 0;
  for (const auto& ex : batch) {
    const auto noised = forward_noise(ex.clean, ex.timestep, ex.noise, sched);
    for (std::size_t i = 0; i < ex.plan->object_count(); ++i, ++row) {
      for (int k = 0; k < 2; ++k) {
        noisy(row, k) = static_cast<Scalar>(noised[2 * i + static_cast<std::size_t>(k)]);
        target(row, k) = static_cast<Scalar>(ex.noise[2 * i + static_cast<std::size_t>(k)]);
      }
    }
  }
  Network<Scalar> net(cfg, params);
  typename Network<Scalar>::Cache cache;
  const Matrix pred = net.forward(plan, noisy, timesteps, want_grads ? &cache : nullptr);
  const Matrix diff = pred - target;
  const double count = 2.0 * static_cast<double>(n);
  LossResult<Scalar> result;
  double sq = 0.0;
  for (Eigen::Index i = 0; i < diff.size(); ++i) {
    const double d = static_cast<double>(diff.data()[i]);
    sq += d * d;
  }
  result.loss = sq / count;
  if (want_grads) {
    result.grads = params.zeros_like();
    const Matrix d_pred = diff * static_cast<Scalar>(2.0 / count);
    net.backward(plan, cache, d_pred, result.grads);
  }
  return result;
}

template LossResult<float> loss_with_noise<float>(std::span<const NoisedExample>,
                                                  const ModelConfig&,
                                                  const ParamStore<float>&,
                                                  const NoiseSchedule&, bool);
template LossResult<double> loss_with_noise<double>(
    std::span<const NoisedExample>, const ModelConfig&,
    const ParamStore<double>&, const NoiseSchedule&, bool);

LossResult<float> loss(std::span<const PlannedExample> batch,
                       const ModelConfig& cfg, const ModelParams& params,
                       const NoiseSchedule& sched, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick_t(0, sched.steps - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<NoisedExample> noised;
  noised.reserve(batch.size());
  for (const auto& ex : batch) {
    NoisedExample ne;
    ne.plan = ex.plan;
    ne.clean = ex.clean;
    ne.timestep = pick_t(rng);
    ne.noise.resize(ex.clean.size());
    for (double& v : ne.noise) v = normal(rng);
    noised.push_back(std::move(ne));
  }
  return loss_with_noise<float>(noised, cfg, params, sched, true);
}

}  // namespace layoutgen
