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
#include <vector>

#include "mvkd/camera.hpp"
#include "mvkd/edge_render.hpp"
#include "mvkd/losses.hpp"
#include "mvkd/tape.hpp"
#include "mvkd/voxel.hpp"

// Differentiable ops recorded on a Tape. Point sets are flattened row-major
// (J x 3 or J x 2); heatmap stacks are C x H x W.
namespace mvkd::ops {

// Per-channel softmax over each plane of size plane.
std::vector<double> softmax_planes(std::span<const double> logits, size_t plane);
Tape::Id softmax2d(Tape& tape, Tape::Id logits, size_t plane);

// Fused unproject + view aggregation + 3D spatial softmax. scale and bias
// are per-channel leaves, or -1 for the identity affine.
Tape::Id lift(Tape& tape, const VolumetricLifter& lifter, std::span<const Tape::Id> heatmaps,
              int channels, Tape::Id scale, Tape::Id bias, double tau);

// World points to normalized [0,1]^2 image coordinates of one camera.
Tape::Id project(Tape& tape, Tape::Id points, const Mat34& P, int image_w, int image_h,
                 const ProjectOptions& opt = {});

// Max-aggregated edge map of 2D keypoints (normalized coordinates).
Tape::Id edges(Tape& tape, Tape::Id keypoints, Tape::Id weights, int joints,
               const EdgeConfig& cfg);

Tape::Id combine(Tape& tape, Tape::Id e_t, Tape::Id e_tk);

// recon_loss_view against a constant target with pixel-space features.
Tape::Id recon_view(Tape& tape, Tape::Id pred, std::vector<double> target, int height, int width);

Tape::Id length(Tape& tape, Tape::Id points, const EdgeWeights& weights, const LengthState& state);

// World points to the unit cube of the grid.
Tape::Id normalize(Tape& tape, Tape::Id points, const VoxelGrid& grid);

Tape::Id separation(Tape& tape, Tape::Id points, double sigma_s);

Tape::Id sum(Tape& tape, std::span<const Tape::Id> scalars);

// total_objective over recorded loss scalars.
Tape::Id objective(Tape& tape, int epoch, Tape::Id recon, Tape::Id length, Tape::Id separation,
                   const ObjectiveWeights& w);

std::vector<Vec3> as_points3(std::span<const double> flat);
std::vector<Vec2> as_points2(std::span<const double> flat);

}  // namespace mvkd::ops
