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

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mvkd/camera.hpp"
#include "mvkd/config.hpp"
#include "mvkd/edge_render.hpp"
#include "mvkd/losses.hpp"
#include "mvkd/synth.hpp"
#include "mvkd/tape.hpp"
#include "mvkd/voxel.hpp"

namespace mvkd {

// Trainable parameters: one J x hm_h x hm_w logit table per (frame, view),
// the pairwise edge weights and a per-channel volume affine.
struct ParamSet {
  int views = 0;
  int frames = 0;
  int joints = 0;
  int hm_h = 0;
  int hm_w = 0;
  std::vector<float> logits;
  EdgeWeights edges;
  bool use_affine = false;
  VolumeAffine affine;

  size_t table_size() const { return static_cast<size_t>(joints) * hm_h * hm_w; }
  size_t table_index(int t, int v) const { return static_cast<size_t>(t) * views + v; }
  std::span<float> table(int t, int v) {
    return {logits.data() + table_index(t, v) * table_size(), table_size()};
  }
  std::span<const float> table(int t, int v) const {
    return {logits.data() + table_index(t, v) * table_size(), table_size()};
  }
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One Adam update; step is the 1-based count including this update.
template <typename T>
void adam_update(std::span<T> param, std::span<const double> grad, std::span<T> m, std::span<T> v,
                 int64_t step, const AdamConfig& c);

// Logit tables keep their own step counts: a table only sees gradient when
// its frame is part of the sampled pair.
struct OptimizerState {
  std::vector<float> logit_m;
  std::vector<float> logit_v;
  std::vector<int64_t> table_steps;
  std::vector<double> edge_m;
  std::vector<double> edge_v;
  int64_t edge_steps = 0;
  std::vector<double> affine_m;  // scale then bias
  std::vector<double> affine_v;
  int64_t affine_steps = 0;
};

// Frame pair (t0, t1 = t0 + k) with one target raster per view.
struct Batch {
  int t0 = 0;
  int t1 = 0;
  int epoch = 1;
  std::vector<std::vector<double>> targets;
};

struct Gradients {
  // logits[i][v] for pair member i (0 -> t0, 1 -> t1).
  std::array<std::vector<std::vector<double>>, 2> logits;
  std::vector<double> edges;
  std::vector<double> scale;
  std::vector<double> bias;
};

struct ForwardPass {
  Tape tape;
  int t0 = 0;
  int t1 = 0;
  LossParts parts;
  double total = 0.0;
  Tape::Id loss = -1;
  std::array<std::vector<Tape::Id>, 2> logit_leaves;
  Tape::Id edge_leaf = -1;
  Tape::Id scale_leaf = -1;
  Tape::Id bias_leaf = -1;
  std::array<std::vector<Vec3>, 2> keypoints;
};

class Model {
 public:
  Model(std::vector<CameraModel> cams, const TrainConfig& cfg);

  // Errors: NonFiniteError naming the op where a NaN appeared.
  ForwardPass forward(const ParamSet& params, const Batch& batch, const LengthState& lengths) const;
  Gradients backward(ForwardPass& pass) const;
  // Uses the logit tables of frame t only.
  Keypoints3D infer(const ParamSet& params, int t) const;
  std::vector<std::vector<double>> heatmaps(const ParamSet& params, int t) const;

  const VolumetricLifter& lifter() const { return lifter_; }
  const std::vector<CameraModel>& cameras() const { return cams_; }
  const TrainConfig& config() const { return cfg_; }
  EdgeConfig edge_config() const;

 private:
  std::vector<CameraModel> cams_;
  TrainConfig cfg_;
  VolumetricLifter lifter_;
};

// Random Gaussian bumps at the projections of random points near the grid
// center, identical for every frame, plus optional seeded noise.
ParamSet init_params(const Model& model, int frames, const TrainConfig& cfg);
OptimizerState init_optimizer(const ParamSet& params);
void apply_gradients(ParamSet& params, OptimizerState& opt, const Gradients& g, int t0, int t1,
                     const TrainConfig& cfg);

struct LossRow {
  int epoch = 0;
  int64_t step = 0;
  LossParts parts;
  double total = 0.0;
};

void write_loss_csv(const std::string& path, std::span<const LossRow> rows);
std::vector<LossRow> read_loss_csv(const std::string& path);

// Per-view target rasters indexed by the first frame of each pair.
struct TargetSet {
  int frame_gap = 0;
  int height = 0;
  int width = 0;
  std::vector<std::vector<std::vector<double>>> by_frame;  // [t][view]
  bool has(int t) const {
    return t >= 0 && t < static_cast<int>(by_frame.size()) && !by_frame[t].empty();
  }
};

// All (t, t+k) pairs with both frames in the same segment.
std::vector<std::pair<int, int>> training_pairs(std::span<const Segment> segments, int frame_gap);
// Seeded permutation of [0, n) for a 1-based epoch.
std::vector<size_t> epoch_order(size_t n, uint64_t seed, int epoch);

struct TrainState {
  ParamSet params;
  OptimizerState opt;
  LengthState lengths;
  int64_t step = 0;
  std::vector<LossRow> log;
};

TrainState init_train_state(const Model& model, int frames, const TrainConfig& cfg);

struct TrainHooks {
  // Called after every completed step.
  std::function<void(const TrainState&)> on_step;
  // Called with the state reached before a divergence is rethrown.
  std::function<void(const TrainState&)> on_divergence;
};

// Runs steps until state.step == cfg.steps. One step = one frame pair; an
// epoch is one pass over training_pairs in epoch_order. Throws NonFiniteError
// on divergence after calling hooks.on_divergence.
void train(TrainState& state, const Model& model, const TargetSet& targets,
           std::span<const std::pair<int, int>> pairs, const TrainConfig& cfg,
           const TrainHooks& hooks = {});

inline constexpr uint32_t kCheckpointVersion = 1;
void save_checkpoint(const std::string& path, const TrainState& state, const std::string& config_hash);
// Throws IoError on a bad container and ValidationError on a hash mismatch
// when expected_hash is non-empty.
TrainState load_checkpoint(const std::string& path, const std::string& expected_hash = {});

}  // namespace mvkd
