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

#include "mvkd/targets.hpp"

#include <cstring>
#include <filesystem>

#include "mvkd/error.hpp"
#include "mvkd/hash.hpp"
#include "mvkd/heatmap_io.hpp"

namespace mvkd {

namespace fs = std::filesystem;

namespace {

int raster_factor(int image, int raster) {
  if (raster < 1 || image % raster != 0) {
    throw ValidationError("raster size " + std::to_string(raster) + " does not divide image size " +
                          std::to_string(image));
  }
  return image / raster;
}

void append(std::string& buf, const void* p, size_t n) {
  buf.append(static_cast<const char*>(p), n);
}

}  // namespace

std::string target_key(const Frame& a, const Frame& b, const TargetOptions& opt) {
  std::string buf = "mvkd-target-v1";
  for (const Frame* f : {&a, &b}) {
    append(buf, &f->height, sizeof(int));
    append(buf, &f->width, sizeof(int));
    append(buf, f->values.data(), f->values.size() * sizeof(double));
  }
  const auto& d = opt.dissimilarity;
  append(buf, &opt.raster, sizeof(int));
  append(buf, &d.window.size, sizeof(int));
  for (double x : {d.window.sigma, d.window.c1, d.window.c2, d.eps}) append(buf, &x, sizeof(double));
  const char norm = d.normalize ? 1 : 0;
  append(buf, &norm, 1);
  return sha256_hex(buf);
}

DissimilarityMap pair_target(const Dataset& ds, int view, int t0, int t1, const TargetOptions& opt,
                             bool* cache_hit) {
  if (cache_hit) *cache_hit = false;
  const int fy = raster_factor(ds.height, opt.raster);
  const int fx = raster_factor(ds.width, opt.raster);
  if (fx != fy) throw ValidationError("targets: square raster needs a square image");
  const Frame a = ds.load_frame(view, t0);
  const Frame b = ds.load_frame(view, t1);
  std::string cache_path;
  if (!opt.cache_dir.empty()) {
    cache_path = (fs::path(opt.cache_dir) / (target_key(a, b, opt) + ".mvkd")).string();
    if (fs::exists(cache_path)) {
      const auto stored = read_heatmap(cache_path);
      const auto& hm = stored.heatmap;
      if (hm.height == opt.raster && hm.width == opt.raster && hm.channels == 1) {
        if (cache_hit) *cache_hit = true;
        return {hm.height, hm.width, view, t0, t1, hm.values};
      }
    }
  }
  DissimilarityMap map = downsample(dissimilarity_target(a, b, opt.dissimilarity), fx);
  for (double& v : map.values) v = static_cast<double>(static_cast<float>(v));
  map.view_index = view;
  map.t0 = t0;
  map.t1 = t1;
  if (!cache_path.empty()) {
    fs::create_directories(opt.cache_dir);
    Heatmap2D hm(map.height, map.width, 1, view);
    hm.values = map.values;
    const std::string tmp = cache_path + ".tmp";
    write_heatmap(tmp, hm, t0);
    fs::rename(tmp, cache_path);
  }
  return map;
}

TargetSet build_targets(const Dataset& ds, std::span<const std::pair<int, int>> pairs,
                        const TargetOptions& opt, TargetStats* stats) {
  TargetSet set;
  set.height = opt.raster;
  set.width = opt.raster;
  set.by_frame.resize(ds.frames);
  for (const auto& [t0, t1] : pairs) {
    if (set.frame_gap == 0) set.frame_gap = t1 - t0;
    if (t1 - t0 != set.frame_gap) throw ValidationError("targets: pairs must share one frame gap");
    auto& views = set.by_frame[t0];
    views.clear();
    for (int v = 0; v < ds.views; ++v) {
      bool hit = false;
      auto map = pair_target(ds, v, t0, t1, opt, &hit);
      if (stats) ++(hit ? stats->cached : stats->computed);
      views.push_back(std::move(map.values));
    }
  }
  return set;
}

}  // namespace mvkd
