// Copyright 2026 The mvkd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mvkd/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "mvkd/error.hpp"
#include "mvkd/ops.hpp"

namespace mvkd {

template <typename T>
void adam_update(std::span<T> param, std::span<const double> grad, std::span<T> m, std::span<T> v,
                 int64_t step, const AdamConfig& c) {
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  for (size_t i = 0; i < param.size(); ++i) {
    const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
    const double vi = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    param[i] = static_cast<T>(param[i] - c.lr * (mi / bc1) / (std::sqrt(vi / bc2) + c.eps));
  }
}

template void adam_update<float>(std::span<float>, std::span<const double>, std::span<float>,
                                 std::span<float>, int64_t, const AdamConfig&);
template void adam_update<double>(std::span<double>, std::span<const double>, std::span<double>,
                                  std::span<double>, int64_t, const AdamConfig&);

namespace {

std::vector<CameraModel> checked_cameras(std::vector<CameraModel> cams) {
  if (cams.size() < 2) throw ValidationError("model: at least 2 views required");
  for (const auto& c : cams) {
    if (c.width() != cams[0].width() || c.height() != cams[0].height()) {
      throw ValidationError("model: all views must share one image size");
    }
  }
  return cams;
}

}  // namespace

Model::Model(std::vector<CameraModel> cams, const TrainConfig& cfg)
    : cams_(checked_cameras(std::move(cams))),
      cfg_(cfg),
      lifter_(build_grid(cfg.grid_center, cfg.volume_side, cfg.grid_resolution), cams_,
              cfg.heatmap_size, cfg.heatmap_size, cfg.projection()) {
  cfg_.validate();
}

EdgeConfig Model::edge_config() const {
  return {cfg_.edge_sigma, cfg_.raster_size, cfg_.raster_size};
}

ForwardPass Model::forward(const ParamSet& params, const Batch& batch,
                           const LengthState& lengths) const {
  const int views = static_cast<int>(cams_.size());
  if (params.views != views) throw ValidationError("forward: parameter view count mismatch");
  if (static_cast<int>(batch.targets.size()) != views) {
    throw ValidationError("forward: one target per view required");
  }
  const int J = params.joints;
  const size_t plane = static_cast<size_t>(params.hm_h) * params.hm_w;
  const EdgeConfig ec = edge_config();

  ForwardPass pass;
  pass.t0 = batch.t0;
  pass.t1 = batch.t1;
  Tape& tape = pass.tape;
  pass.edge_leaf = tape.leaf("edge_weights", params.edges.values());
  if (params.use_affine) {
    pass.scale_leaf = tape.leaf("volume_scale", params.affine.scale);
    pass.bias_leaf = tape.leaf("volume_bias", params.affine.bias);
  }
  std::array<Tape::Id, 2> points{};
  for (int i = 0; i < 2; ++i) {
    const int t = i == 0 ? batch.t0 : batch.t1;
    std::vector<Tape::Id> hms;
    for (int v = 0; v < views; ++v) {
      const auto table = params.table(t, v);
      const Tape::Id leaf = tape.leaf("logits", std::vector<double>(table.begin(), table.end()));
      pass.logit_leaves[i].push_back(leaf);
      hms.push_back(ops::softmax2d(tape, leaf, plane));
    }
    points[i] = ops::lift(tape, lifter_, hms, J, pass.scale_leaf, pass.bias_leaf, cfg_.tau);
    pass.keypoints[i] = ops::as_points3(tape.value(points[i]));
  }

  std::vector<Tape::Id> recon_terms;
  for (int v = 0; v < views; ++v) {
    const Mat34& P = cams_[v].P();
    std::array<Tape::Id, 2> maps{};
    for (int i = 0; i < 2; ++i) {
      const Tape::Id uv =
          ops::project(tape, points[i], P, cams_[v].width(), cams_[v].height(), cfg_.projection());
      maps[i] = ops::edges(tape, uv, pass.edge_leaf, J, ec);
    }
    const Tape::Id pred = ops::combine(tape, maps[0], maps[1]);
    recon_terms.push_back(ops::recon_view(tape, pred, batch.targets[v], ec.height, ec.width));
  }
  const Tape::Id recon = ops::sum(tape, recon_terms);
  // Length and separation both see grid-normalized coordinates.
  const std::array<Tape::Id, 2> unit = {ops::normalize(tape, points[0], lifter_.grid()),
                                        ops::normalize(tape, points[1], lifter_.grid())};
  const std::array<Tape::Id, 2> len_terms = {ops::length(tape, unit[0], params.edges, lengths),
                                             ops::length(tape, unit[1], params.edges, lengths)};
  const Tape::Id len = ops::sum(tape, len_terms);
  const std::array<Tape::Id, 2> sep_terms = {ops::separation(tape, unit[0], cfg_.sep_sigma),
                                             ops::separation(tape, unit[1], cfg_.sep_sigma)};
  const Tape::Id sep = ops::sum(tape, sep_terms);
  pass.loss = ops::objective(tape, batch.epoch, recon, len, sep, cfg_.objective());
  pass.parts = {tape.scalar(recon), tape.scalar(len), tape.scalar(sep)};
  pass.total = tape.scalar(pass.loss);
  return pass;
}

namespace {

std::vector<double> grad_or_zero(Tape& tape, Tape::Id id) {
  if (id < 0) return {};
  if (!tape.has_grad(id)) return std::vector<double>(tape.value(id).size(), 0.0);
  const auto g = tape.grad(id);
  return {g.begin(), g.end()};
}

}  // namespace

Gradients Model::backward(ForwardPass& pass) const {
  pass.tape.backward(pass.loss);
  Gradients g;
  for (int i = 0; i < 2; ++i) {
    for (Tape::Id leaf : pass.logit_leaves[i]) g.logits[i].push_back(grad_or_zero(pass.tape, leaf));
  }
  g.edges = grad_or_zero(pass.tape, pass.edge_leaf);
  g.scale = grad_or_zero(pass.tape, pass.scale_leaf);
  g.bias = grad_or_zero(pass.tape, pass.bias_leaf);
  return g;
}

std::vector<std::vector<double>> Model::heatmaps(const ParamSet& params, int t) const {
  if (t < 0 || t >= params.frames) throw ValidationError("frame index out of range");
  const size_t plane = static_cast<size_t>(params.hm_h) * params.hm_w;
  std::vector<std::vector<double>> out;
  for (int v = 0; v < params.views; ++v) {
    const auto table = params.table(t, v);
    const std::vector<double> logits(table.begin(), table.end());
    out.push_back(ops::softmax_planes(logits, plane));
  }
  return out;
}

Keypoints3D Model::infer(const ParamSet& params, int t) const {
  const auto hms = heatmaps(params, t);
  std::vector<std::span<const double>> planes(hms.begin(), hms.end());
  const VolumeAffine affine =
      params.use_affine ? params.affine : VolumeAffine::identity(params.joints);
  auto cache = lifter_.forward(planes, params.joints, affine, cfg_.tau);
  return {std::move(cache.points), t};
}

ParamSet init_params(const Model& model, int frames, const TrainConfig& cfg) {
  if (frames < 2) throw ValidationError("init: at least 2 frames required");
  ParamSet p;
  p.views = static_cast<int>(model.cameras().size());
  p.frames = frames;
  p.joints = cfg.joints;
  p.hm_h = cfg.heatmap_size;
  p.hm_w = cfg.heatmap_size;
  p.edges = EdgeWeights(cfg.joints, cfg.edge_weight_init);
  p.use_affine = cfg.volume_affine;
  p.affine = VolumeAffine::identity(cfg.joints);
  if (p.use_affine) std::fill(p.affine.scale.begin(), p.affine.scale.end(), cfg.volume_scale_init);

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  std::vector<Vec3> seeds(cfg.joints);
  for (auto& s : seeds) {
    s = cfg.grid_center + cfg.init_spread * cfg.volume_side * Vec3(unit(rng), unit(rng), unit(rng));
  }
  // One template table per view, copied to every frame.
  std::vector<std::vector<float>> templates(p.views, std::vector<float>(p.table_size(), 0.0f));
  const double r2 = 2.0 * cfg.init_radius * cfg.init_radius;
  for (int v = 0; v < p.views; ++v) {
    const auto& cam = model.cameras()[v];
    for (int j = 0; j < cfg.joints; ++j) {
      if (depth(cam.P(), seeds[j], cfg.projection()) <= 0.0) continue;
      const Vec2 px = project(cam.P(), seeds[j], cfg.projection());
      const double xh = (px.x() + 0.5) * p.hm_w / cam.width() - 0.5;
      const double yh = (px.y() + 0.5) * p.hm_h / cam.height() - 0.5;
      for (int y = 0; y < p.hm_h; ++y) {
        for (int x = 0; x < p.hm_w; ++x) {
          const double d2 = (x - xh) * (x - xh) + (y - yh) * (y - yh);
          templates[v][(static_cast<size_t>(j) * p.hm_h + y) * p.hm_w + x] =
              static_cast<float>(cfg.init_amplitude * std::exp(-d2 / r2));
        }
      }
    }
  }
  p.logits.resize(p.table_size() * frames * p.views);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::mt19937_64 noise_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  for (int t = 0; t < frames; ++t) {
    for (int v = 0; v < p.views; ++v) {
      auto dst = p.table(t, v);
      std::copy(templates[v].begin(), templates[v].end(), dst.begin());
      if (cfg.init_noise > 0.0) {
        for (auto& x : dst) x += static_cast<float>(cfg.init_noise * noise(noise_rng));
      }
    }
  }
  return p;
}

OptimizerState init_optimizer(const ParamSet& params) {
  OptimizerState o;
  o.logit_m.assign(params.logits.size(), 0.0f);
  o.logit_v.assign(params.logits.size(), 0.0f);
  o.table_steps.assign(static_cast<size_t>(params.frames) * params.views, 0);
  o.edge_m.assign(params.edges.pairs(), 0.0);
  o.edge_v.assign(params.edges.pairs(), 0.0);
  o.affine_m.assign(2 * static_cast<size_t>(params.joints), 0.0);
  o.affine_v.assign(2 * static_cast<size_t>(params.joints), 0.0);
  return o;
}

void apply_gradients(ParamSet& params, OptimizerState& opt, const Gradients& g, int t0, int t1,
                     const TrainConfig& cfg) {
  AdamConfig base{cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  AdamConfig logit = base;
  logit.lr = cfg.lr * cfg.logit_lr_multiplier;
  const size_t n = params.table_size();
  for (int i = 0; i < 2; ++i) {
    const int t = i == 0 ? t0 : t1;
    for (int v = 0; v < params.views; ++v) {
      const size_t idx = params.table_index(t, v);
      const int64_t step = ++opt.table_steps[idx];
      adam_update<float>(params.table(t, v), g.logits[i][v],
                         std::span<float>(opt.logit_m.data() + idx * n, n),
                         std::span<float>(opt.logit_v.data() + idx * n, n), step, logit);
    }
  }
  ++opt.edge_steps;
  adam_update<double>(params.edges.values(), g.edges, opt.edge_m, opt.edge_v, opt.edge_steps, base);
  if (params.use_affine) {
    const size_t J = params.joints;
    std::vector<double> flat(2 * J), grad(2 * J);
    for (size_t c = 0; c < J; ++c) {
      flat[c] = params.affine.scale[c];
      flat[J + c] = params.affine.bias[c];
      grad[c] = g.scale[c];
      grad[J + c] = g.bias[c];
    }
    ++opt.affine_steps;
    adam_update<double>(flat, grad, opt.affine_m, opt.affine_v, opt.affine_steps, base);
    for (size_t c = 0; c < J; ++c) {
      params.affine.scale[c] = flat[c];
      params.affine.bias[c] = flat[J + c];
    }
  }
}

void write_loss_csv(const std::string& path, std::span<const LossRow> rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write loss log: " + path);
  out << "epoch,step,L_recon,L_length,L_sep,total\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%lld,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                  static_cast<long long>(r.step), r.parts.recon, r.parts.length,
                  r.parts.separation, r.total);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<LossRow> read_loss_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read loss log: " + path);
  std::string line;
  std::getline(in, line);
  std::vector<LossRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LossRow r;
    long long step = 0;
    if (std::sscanf(line.c_str(), "%d,%lld,%lf,%lf,%lf,%lf", &r.epoch, &step, &r.parts.recon,
                    &r.parts.length, &r.parts.separation, &r.total) != 6) {
      throw IoError("malformed loss log line in " + path + ": " + line);
    }
    r.step = step;
    rows.push_back(r);
  }
  return rows;
}

std::vector<std::pair<int, int>> training_pairs(std::span<const Segment> segments, int frame_gap) {
  std::vector<std::pair<int, int>> out;
  for (const auto& s : segments) {
    for (int t = s.begin; t + frame_gap < s.end; ++t) out.emplace_back(t, t + frame_gap);
  }
  return out;
}

std::vector<size_t> epoch_order(size_t n, uint64_t seed, int epoch) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                    static_cast<uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  // Fisher-Yates with an explicit draw so the order does not depend on the
  // standard library's shuffle.
  for (size_t i = n; i > 1; --i) {
    const size_t j = static_cast<size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

TrainState init_train_state(const Model& model, int frames, const TrainConfig& cfg) {
  TrainState s;
  s.params = init_params(model, frames, cfg);
  s.opt = init_optimizer(s.params);
  s.lengths = LengthState(s.params.edges.pairs(), cfg.ema_decay);
  return s;
}

void train(TrainState& state, const Model& model, const TargetSet& targets,
           std::span<const std::pair<int, int>> pairs, const TrainConfig& cfg,
           const TrainHooks& hooks) {
  if (pairs.empty()) throw ValidationError("train: no frame pairs (frame gap too large?)");
  for (const auto& [t0, t1] : pairs) {
    if (!targets.has(t0)) throw ValidationError("train: missing target for frame " + std::to_string(t0));
    if (t1 >= state.params.frames) throw ValidationError("train: pair beyond parameter frames");
  }
  const size_t n = pairs.size();
  int cached_epoch = 0;
  std::vector<size_t> order;
  while (state.step < cfg.steps) {
    const int epoch = static_cast<int>(state.step / static_cast<int64_t>(n)) + 1;
    if (epoch != cached_epoch) {
      order = epoch_order(n, cfg.seed, epoch);
      cached_epoch = epoch;
    }
    const auto [t0, t1] = pairs[order[state.step % static_cast<int64_t>(n)]];
    Batch batch{t0, t1, epoch, targets.by_frame[t0]};
    ForwardPass pass;
    Gradients grads;
    try {
      pass = model.forward(state.params, batch, state.lengths);
      grads = model.backward(pass);
    } catch (const NonFiniteError&) {
      if (hooks.on_divergence) hooks.on_divergence(state);
      throw;
    }
    const EdgeWeights used = state.params.edges;
    apply_gradients(state.params, state.opt, grads, t0, t1, cfg);
    const double inv_side = 1.0 / model.lifter().grid().side_length();
    for (int i = 0; i < 2; ++i) {
      auto l = edge_lengths(pass.keypoints[i], used);
      for (double& x : l) x *= inv_side;
      update_length_state(state.lengths, l, used);
    }
    ++state.step;
    state.log.push_back({epoch, state.step, pass.parts, pass.total});
    if (hooks.on_step) hooks.on_step(state);
  }
}

namespace {

constexpr char kMagic[8] = {'M', 'V', 'K', 'D', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  template <typename T>
  void array(const std::vector<T>& v) {
    pod<uint64_t>(v.size());
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  }
  void string(const std::string& s) { array(std::vector<char>(s.begin(), s.end())); }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw IoError("truncated checkpoint: " + path_);
    return v;
  }
  template <typename T>
  std::vector<T> array(size_t expected = SIZE_MAX) {
    const auto n = pod<uint64_t>();
    if (expected != SIZE_MAX && n != expected) throw IoError("checkpoint array size mismatch: " + path_);
    if (n > (uint64_t{1} << 34)) throw IoError("corrupt checkpoint: " + path_);
    std::vector<T> v(n);
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
    if (!in_) throw IoError("truncated checkpoint: " + path_);
    return v;
  }
  std::string string() {
    const auto c = array<char>();
    return {c.begin(), c.end()};
  }

 private:
  std::istream& in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::string& path, const TrainState& s, const std::string& config_hash) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + tmp);
    Writer w(out);
    out.write(kMagic, sizeof(kMagic));
    w.pod<uint32_t>(kCheckpointVersion);
    w.string(config_hash);
    const auto& p = s.params;
    w.pod<int32_t>(p.views);
    w.pod<int32_t>(p.frames);
    w.pod<int32_t>(p.joints);
    w.pod<int32_t>(p.hm_h);
    w.pod<int32_t>(p.hm_w);
    w.pod<int64_t>(s.step);
    w.pod<uint8_t>(p.use_affine ? 1 : 0);
    w.array(p.logits);
    w.array(p.edges.values());
    w.array(p.affine.scale);
    w.array(p.affine.bias);
    w.array(s.opt.logit_m);
    w.array(s.opt.logit_v);
    w.array(s.opt.table_steps);
    w.array(s.opt.edge_m);
    w.array(s.opt.edge_v);
    w.pod<int64_t>(s.opt.edge_steps);
    w.array(s.opt.affine_m);
    w.array(s.opt.affine_v);
    w.pod<int64_t>(s.opt.affine_steps);
    w.pod<double>(s.lengths.decay);
    w.array(s.lengths.average);
    w.array(s.lengths.initialized);
    w.pod<uint64_t>(s.log.size());
    for (const auto& r : s.log) {
      w.pod<int32_t>(r.epoch);
      w.pod<int64_t>(r.step);
      w.pod<double>(r.parts.recon);
      w.pod<double>(r.parts.length);
      w.pod<double>(r.parts.separation);
      w.pod<double>(r.total);
    }
    if (!out) throw IoError("checkpoint write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::string& path, const std::string& expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, kMagic)) throw IoError("not a checkpoint: " + path);
  Reader r(in, path);
  const auto version = r.pod<uint32_t>();
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version) + ": " + path);
  }
  const std::string hash = r.string();
  if (!expected_hash.empty() && hash != expected_hash) {
    throw ValidationError("checkpoint config hash " + hash + " does not match config " + expected_hash);
  }
  TrainState s;
  auto& p = s.params;
  p.views = r.pod<int32_t>();
  p.frames = r.pod<int32_t>();
  p.joints = r.pod<int32_t>();
  p.hm_h = r.pod<int32_t>();
  p.hm_w = r.pod<int32_t>();
  if (p.views < 1 || p.frames < 1 || p.joints < 2 || p.hm_h < 1 || p.hm_w < 1) {
    throw IoError("corrupt checkpoint header: " + path);
  }
  s.step = r.pod<int64_t>();
  p.use_affine = r.pod<uint8_t>() != 0;
  p.logits = r.array<float>(p.table_size() * p.frames * p.views);
  p.edges = EdgeWeights(p.joints, 0.0);
  p.edges.values() = r.array<double>(p.edges.pairs());
  p.affine.scale = r.array<double>(p.joints);
  p.affine.bias = r.array<double>(p.joints);
  s.opt.logit_m = r.array<float>(p.logits.size());
  s.opt.logit_v = r.array<float>(p.logits.size());
  s.opt.table_steps = r.array<int64_t>(static_cast<size_t>(p.frames) * p.views);
  s.opt.edge_m = r.array<double>(p.edges.pairs());
  s.opt.edge_v = r.array<double>(p.edges.pairs());
  s.opt.edge_steps = r.pod<int64_t>();
  s.opt.affine_m = r.array<double>(2 * static_cast<size_t>(p.joints));
  s.opt.affine_v = r.array<double>(2 * static_cast<size_t>(p.joints));
  s.opt.affine_steps = r.pod<int64_t>();
  s.lengths.decay = r.pod<double>();
  s.lengths.average = r.array<double>(p.edges.pairs());
  s.lengths.initialized = r.array<uint8_t>(p.edges.pairs());
  const auto rows = r.pod<uint64_t>();
  if (rows != static_cast<uint64_t>(s.step)) throw IoError("checkpoint log length mismatch: " + path);
  s.log.resize(rows);
  for (auto& row : s.log) {
    row.epoch = r.pod<int32_t>();
    row.step = r.pod<int64_t>();
    row.parts.recon = r.pod<double>();
    row.parts.length = r.pod<double>();
    row.parts.separation = r.pod<double>();
    row.total = r.pod<double>();
  }
  return s;
}

}  // namespace mvkd
