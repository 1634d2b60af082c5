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

#include "mvkd/frame.hpp"

#include <algorithm>

namespace mvkd {

Frame to_luma(const Frame& f) {
  if (f.channels != 1 && f.channels != 3 && f.channels != 4) {
    throw ValidationError("frame: unsupported channel count " + std::to_string(f.channels));
  }
  Frame out(f.height, f.width, 1);
  out.view_index = f.view_index;
  out.timestamp = f.timestamp;
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      double v = f.channels == 1
                     ? f.at(y, x)
                     : 0.299 * f.at(y, x, 0) + 0.587 * f.at(y, x, 1) + 0.114 * f.at(y, x, 2);
      out.at(y, x) = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace mvkd
