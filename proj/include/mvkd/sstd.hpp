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

#include <string>
#include <vector>

#include "mvkd/frame.hpp"

namespace mvkd {

struct SsimWindow {
  int size = 11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};

struct DissimilarityOptions {
  SsimWindow window;
  // Min-max normalize each target when its maximum exceeds eps.
  bool normalize = true;
  double eps = 1e-6;
};

struct DissimilarityMap {
  int height = 0;
  int width = 0;
  int view_index = 0;
  int t0 = 0;
  int t1 = 0;
  std::vector<double> values;

  double at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
};

// Per-pixel SSIM of the luma of a and b over a Gaussian window. Near the
// border the window is truncated to the image and renormalized.
std::vector<double> local_ssim_map(const Frame& a, const Frame& b, const SsimWindow& window = {});

// (1 - SSIM) / 2, then min-max normalized per pair (see DissimilarityOptions).
DissimilarityMap dissimilarity_target(const Frame& a, const Frame& b,
                                      const DissimilarityOptions& opt = {});

// Box-filter downsampling by an integer factor in each axis.
DissimilarityMap downsample(const DissimilarityMap& map, int factor);

}  // namespace mvkd
