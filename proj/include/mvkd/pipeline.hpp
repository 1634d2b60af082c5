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

#include <functional>
#include <string>
#include <vector>

#include "mvkd/config.hpp"
#include "mvkd/dataset.hpp"
#include "mvkd/engine.hpp"
#include "mvkd/evaluation.hpp"

namespace mvkd {

// Explicit flag, then $MVKD_CACHE_DIR, then empty (no caching).
std::string resolve_cache_dir(const std::string& flag);

struct TrainRunOptions {
  bool resume = false;
  int checkpoint_every = 250;  // steps; 0 = only at the end
  std::string cache_dir;
  std::function<void(const TrainState&)> on_step;
};

struct TrainRunResult {
  TrainState state;
  std::string config_hash;
  bool up_to_date = false;  // finished run found, nothing trained
  bool resumed = false;
  double seconds = 0.0;
};

// Files in a run directory.
std::string run_config_path(const std::string& run_dir);
std::string run_checkpoint_path(const std::string& run_dir);
std::string run_loss_path(const std::string& run_dir);

// Trains rc.train on rc.dataset_dir into rc.run_dir. Writes the resolved
// config and its hash first; refuses a run dir holding another config.
TrainRunResult run_training(const RunConfig& rc, const TrainRunOptions& opt = {});

// Loads the resolved config stored in a run directory.
RunConfig load_run_dir_config(const std::string& run_dir);

std::vector<KeypointRecord> infer_all(const Model& model, const ParamSet& params);

// Train on every segment but the last, test on the last one.
struct Split {
  std::vector<int> train;
  std::vector<int> test;
};
Split split_by_segment(const std::vector<Segment>& segments);
Split split_at(int frames, int test_from);

EvalReport evaluate_split(const std::vector<Pose>& disc, const std::vector<Pose>& gt,
                          const Split& split, const EvalOptions& opt = {});

}  // namespace mvkd
