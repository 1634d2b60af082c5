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

#include <vector>

#include "mvkd/error.hpp"

namespace mvkd {

// H x W x channels image with values in [0, 1] (interleaved channels).
struct Frame {
  int height = 0;
  int width = 0;
  int channels = 1;
  int view_index = 0;
  int timestamp = 0;
  std::vector<double> values;

  Frame() = default;
  Frame(int h, int w, int c = 1, double fill = 0.0)
      : height(h), width(w), channels(c), values(static_cast<size_t>(h) * w * c, fill) {}

  double& at(int y, int x, int c = 0) {
    return values[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c = 0) const {
    return values[(static_cast<size_t>(y) * width + x) * channels + c];
  }
};

// Rec. 601 luma for 3/4-channel frames, identity for grayscale. Values are
// clamped to [0, 1].
Frame to_luma(const Frame& f);

}  // namespace mvkd
