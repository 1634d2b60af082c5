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

#include "mvkd/frame.hpp"

namespace mvkd {

// Reads 8/16-bit PNG (gray, gray+alpha, RGB, RGBA) or binary PGM (P5).
Frame read_image(const std::string& path);

// Grayscale writers; values are clamped to [0, 1] and quantized to 8 bits.
// write_png writes only the first channel when given a multi-channel frame.
void write_png(const std::string& path, const Frame& frame);
void write_pgm(const std::string& path, const Frame& frame);
// Picks the format from the extension (.png or .pgm).
void write_image(const std::string& path, const Frame& frame);

}  // namespace mvkd
