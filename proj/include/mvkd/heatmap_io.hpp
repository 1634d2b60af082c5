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

#include "mvkd/voxel.hpp"

namespace mvkd {

// Binary heatmap container, little endian:
//   char[4] "MVKD", uint32 version (=1), uint32 H, uint32 W, uint32 C,
//   int32 view_index, int32 frame_index, then C*H*W float32 in C,H,W order.
inline constexpr uint32_t kHeatmapFormatVersion = 1;

struct StoredHeatmap {
  Heatmap2D heatmap;
  int frame_index = 0;
};

void write_heatmap(const std::string& path, const Heatmap2D& hm, int frame_index);
// Accepts the MVKD container or a .npy array of float32/float64 with shape
// (C, H, W) or (H, W), C order. NPY files carry no view/frame indices.
StoredHeatmap read_heatmap(const std::string& path);
void write_heatmap_npy(const std::string& path, const Heatmap2D& hm);

}  // namespace mvkd
