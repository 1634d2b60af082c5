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
#include <vector>

#include "mvkd/camera.hpp"

namespace mvkd {

struct Observation {
  int view_index = 0;
  Vec2 point2d = Vec2::Zero();
  double weight = 1.0;
};

struct Triangulation {
  Vec3 point = Vec3::Zero();
  // smallest / second-smallest singular value of the DLT system.
  double singular_ratio = 0.0;
  bool degenerate = false;
  std::string warning;
};

// Ratio above which the DLT solution is flagged as degenerate geometry.
inline constexpr double kDegenerateSingularRatio = 0.99;

// Linear (DLT) triangulation. Each observation contributes the two rows
// u*P3 - P1 and v*P3 - P2, each scaled to unit norm and then by the
// observation weight. Throws GeometryError("underdetermined") with fewer than
// two distinct views.
Triangulation triangulate_dlt(std::span<const Mat34> cams, std::span<const Observation> obs);

// Mean Euclidean pixel distance between project(P, X) and each observation.
double reprojection_error(std::span<const Mat34> cams, const Vec3& X,
                          std::span<const Observation> obs,
                          const ProjectOptions& opt = {});

}  // namespace mvkd
