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

#include "mvkd/config.hpp"

#include <fstream>
#include <set>

#include "mvkd/hash.hpp"

namespace mvkd {

using nlohmann::json;

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ValidationError(std::string("config: ") + name + " must be positive");
  };
  if (joints < 2) throw ValidationError("config: joints must be >= 2");
  if (grid_resolution < 2) throw ValidationError("config: grid_resolution must be >= 2");
  if (heatmap_size < 2) throw ValidationError("config: heatmap_size must be >= 2");
  if (raster_size < 1) throw ValidationError("config: raster_size must be >= 1");
  positive(volume_side, "volume_side");
  positive(edge_sigma, "edge_sigma");
  positive(tau, "tau");
  positive(sep_sigma, "sep_sigma");
  positive(lr, "lr");
  positive(logit_lr_multiplier, "logit_lr_multiplier");
  if (w_length < 0.0 || w_sep < 0.0) throw ValidationError("config: loss weights must be >= 0");
  if (curriculum_epochs < 0) throw ValidationError("config: curriculum_epochs must be >= 0");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw ValidationError("config: ema_decay must be in (0,1)");
  if (frame_gap < 1) throw ValidationError("config: frame_gap must be >= 1");
  if (steps < 0) throw ValidationError("config: steps must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ValidationError("config: adam betas must be in [0,1)");
  }
  if (threads < 0) throw ValidationError("config: threads must be >= 0");
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"joints", c.joints},
           {"grid_resolution", c.grid_resolution},
           {"volume_side", c.volume_side},
           {"grid_center", {c.grid_center.x(), c.grid_center.y(), c.grid_center.z()}},
           {"heatmap_size", c.heatmap_size},
           {"raster_size", c.raster_size},
           {"edge_sigma", c.edge_sigma},
           {"tau", c.tau},
           {"volume_affine", c.volume_affine},
           {"volume_scale_init", c.volume_scale_init},
           {"edge_weight_init", c.edge_weight_init},
           {"sep_sigma", c.sep_sigma},
           {"w_length", c.w_length},
           {"w_sep", c.w_sep},
           {"curriculum_epochs", c.curriculum_epochs},
           {"ema_decay", c.ema_decay},
           {"frame_gap", c.frame_gap},
           {"normalize_target", c.normalize_target},
           {"ssim_window", c.ssim_window},
           {"ssim_sigma", c.ssim_sigma},
           {"lr", c.lr},
           {"logit_lr_multiplier", c.logit_lr_multiplier},
           {"adam_beta1", c.adam_beta1},
           {"adam_beta2", c.adam_beta2},
           {"adam_eps", c.adam_eps},
           {"steps", c.steps},
           {"seed", c.seed},
           {"init_spread", c.init_spread},
           {"init_amplitude", c.init_amplitude},
           {"init_radius", c.init_radius},
           {"init_noise", c.init_noise},
           {"negative_depth_in_front", c.negative_depth_in_front},
           {"threads", c.threads}};
}

void from_json(const json& j, TrainConfig& c) {
  const json defaults = TrainConfig{};
  for (const auto& [key, _] : j.items()) {
    if (!defaults.contains(key)) throw ValidationError("config: unknown train field '" + key + "'");
  }
  json merged = defaults;
  merged.update(j);
  try {
    c.joints = merged.at("joints");
    c.grid_resolution = merged.at("grid_resolution");
    c.volume_side = merged.at("volume_side");
    const auto gc = merged.at("grid_center").get<std::vector<double>>();
    if (gc.size() != 3) throw ValidationError("config: grid_center needs 3 numbers");
    c.grid_center = Vec3(gc[0], gc[1], gc[2]);
    c.heatmap_size = merged.at("heatmap_size");
    c.raster_size = merged.at("raster_size");
    c.edge_sigma = merged.at("edge_sigma");
    c.tau = merged.at("tau");
    c.volume_affine = merged.at("volume_affine");
    c.volume_scale_init = merged.at("volume_scale_init");
    c.edge_weight_init = merged.at("edge_weight_init");
    c.sep_sigma = merged.at("sep_sigma");
    c.w_length = merged.at("w_length");
    c.w_sep = merged.at("w_sep");
    c.curriculum_epochs = merged.at("curriculum_epochs");
    c.ema_decay = merged.at("ema_decay");
    c.frame_gap = merged.at("frame_gap");
    c.normalize_target = merged.at("normalize_target");
    c.ssim_window = merged.at("ssim_window");
    c.ssim_sigma = merged.at("ssim_sigma");
    c.lr = merged.at("lr");
    c.logit_lr_multiplier = merged.at("logit_lr_multiplier");
    c.adam_beta1 = merged.at("adam_beta1");
    c.adam_beta2 = merged.at("adam_beta2");
    c.adam_eps = merged.at("adam_eps");
    c.steps = merged.at("steps");
    c.seed = merged.at("seed");
    c.init_spread = merged.at("init_spread");
    c.init_amplitude = merged.at("init_amplitude");
    c.init_radius = merged.at("init_radius");
    c.init_noise = merged.at("init_noise");
    c.negative_depth_in_front = merged.at("negative_depth_in_front");
    c.threads = merged.at("threads");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

std::string config_hash(const TrainConfig& c) {
  json j = c;
  j.erase("threads");
  return sha256_hex(j.dump());
}

void to_json(json& j, const RunConfig& c) {
  j = json{{"train", c.train}, {"scene", c.scene}, {"dataset_dir", c.dataset_dir}, {"run_dir", c.run_dir}};
}

void from_json(const json& j, RunConfig& c) {
  static const std::set<std::string> known = {"train", "scene", "dataset_dir", "run_dir"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ValidationError("config: unknown top-level field '" + key + "'");
  }
  c.train = j.value("train", json::object()).get<TrainConfig>();
  c.scene = j.value("scene", json::object()).get<SceneConfig>();
  c.dataset_dir = j.value("dataset_dir", std::string());
  c.run_dir = j.value("run_dir", std::string());
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  try {
    return json::parse(in).get<RunConfig>();
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

}  // namespace mvkd
