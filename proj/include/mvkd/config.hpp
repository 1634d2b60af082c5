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

#include <cstdint>
#include <string>

#include "json.hpp"
#include "mvkd/camera.hpp"
#include "mvkd/losses.hpp"
#include "mvkd/sstd.hpp"
#include "mvkd/synth.hpp"

namespace mvkd {

struct TrainConfig {
  // Discovery model.
  int joints = 15;
  int grid_resolution = 64;
  double volume_side = 7500.0;  // mm
  Vec3 grid_center = Vec3::Zero();
  int heatmap_size = 32;
  int raster_size = 64;  // edge map / target raster; must divide the image size
  double edge_sigma = 0.02;
  double tau = 1.0;
  bool volume_affine = true;
  double volume_scale_init = 1.0;
  double edge_weight_init = kEdgeWeightInit;

  // Objective.
  double sep_sigma = 0.08;
  double w_length = 0.1;
  double w_sep = 0.01;
  int curriculum_epochs = 2;
  double ema_decay = 0.9;
  int frame_gap = 20;
  bool normalize_target = true;
  int ssim_window = 11;
  double ssim_sigma = 1.5;

  // Optimization.
  double lr = 1e-3;
  double logit_lr_multiplier = 10.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int steps = 2000;
  uint64_t seed = 0;

  // Heatmap logit initialization: one Gaussian bump per channel at the
  // projection of a random point drawn from a cube of side init_spread * L.
  double init_spread = 0.2;
  double init_amplitude = 6.0;
  double init_radius = 1.5;  // heatmap cells
  double init_noise = 0.0;

  bool negative_depth_in_front = false;
  int threads = 0;  // 0 = runtime default

  ObjectiveWeights objective() const { return {curriculum_epochs, w_length, w_sep}; }
  DissimilarityOptions dissimilarity() const {
    DissimilarityOptions o;
    o.window.size = ssim_window;
    o.window.sigma = ssim_sigma;
    o.normalize = normalize_target;
    return o;
  }
  ProjectOptions projection() const {
    ProjectOptions o;
    o.negative_depth_in_front = negative_depth_in_front;
    return o;
  }
  // Throws ValidationError naming the offending field.
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
// Missing fields keep their defaults; unknown fields are rejected.
void from_json(const nlohmann::json& j, TrainConfig& c);

// Hash of the canonical JSON form; ignores the thread count.
std::string config_hash(const TrainConfig& c);

struct RunConfig {
  TrainConfig train;
  SceneConfig scene;
  std::string dataset_dir;
  std::string run_dir;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);
RunConfig load_run_config(const std::string& path);

}  // namespace mvkd
