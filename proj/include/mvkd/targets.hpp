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

#include <span>
#include <string>
#include <utility>

#include "mvkd/dataset.hpp"
#include "mvkd/engine.hpp"
#include "mvkd/sstd.hpp"

namespace mvkd {

struct TargetOptions {
  int raster = 64;  // must divide the image size
  DissimilarityOptions dissimilarity;
  std::string cache_dir;  // empty disables caching
};

// Cache key: SHA-256 over both frames' pixels and every target parameter.
std::string target_key(const Frame& a, const Frame& b, const TargetOptions& opt);

// Dissimilarity of (t0, t1) in one view, box-downsampled to the raster and
// rounded to float32 so cached and fresh targets agree bitwise. Reads and
// fills the cache when opt.cache_dir is set.
DissimilarityMap pair_target(const Dataset& ds, int view, int t0, int t1, const TargetOptions& opt,
                             bool* cache_hit = nullptr);

struct TargetStats {
  size_t computed = 0;
  size_t cached = 0;
};

TargetSet build_targets(const Dataset& ds, std::span<const std::pair<int, int>> pairs,
                        const TargetOptions& opt, TargetStats* stats = nullptr);

}  // namespace mvkd
