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

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mvkd/camera.hpp"

namespace mvkd {

// Cubic grid of B^3 voxel centers. Index layout is (i, j, k) -> (i*B + j)*B + k
// with i along x, j along y and k along z.
class VoxelGrid {
 public:
  VoxelGrid() = default;
  VoxelGrid(const Vec3& center, double side_length, int resolution);

  const Vec3& center() const { return center_; }
  double side_length() const { return side_; }
  int resolution() const { return res_; }
  double spacing() const { return side_ / res_; }
  size_t size() const { return coords_.size(); }

  const Vec3& coord(size_t index) const { return coords_[index]; }
  Vec3 coord(int i, int j, int k) const { return coords_[index(i, j, k)]; }
  const std::vector<Vec3>& coords() const { return coords_; }
  size_t index(int i, int j, int k) const {
    return (static_cast<size_t>(i) * res_ + j) * res_ + k;
  }

  // Maps world coordinates into the unit cube spanned by the grid.
  Vec3 normalize(const Vec3& world) const;
  bool contains(const Vec3& world) const;

 private:
  Vec3 center_ = Vec3::Zero();
  double side_ = 0.0;
  int res_ = 0;
  std::vector<Vec3> coords_;
};

// Throws ValidationError when L <= 0 or B < 2.
VoxelGrid build_grid(const Vec3& center, double side_length, int resolution);

// C x H x W channel-major map over the normalized [0,1]^2 image frame.
struct Heatmap2D {
  int height = 0;
  int width = 0;
  int channels = 0;
  int view_index = 0;
  std::vector<double> values;

  Heatmap2D() = default;
  Heatmap2D(int h, int w, int c, int view = 0)
      : height(h), width(w), channels(c), view_index(view),
        values(static_cast<size_t>(h) * w * c, 0.0) {}
  double& at(int c, int y, int x) { return values[(static_cast<size_t>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const {
    return values[(static_cast<size_t>(c) * height + y) * width + x];
  }
  std::span<double> channel(int c) {
    return {values.data() + static_cast<size_t>(c) * height * width,
            static_cast<size_t>(height) * width};
  }
  std::span<const double> channel(int c) const {
    return {values.data() + static_cast<size_t>(c) * height * width,
            static_cast<size_t>(height) * width};
  }
};

// C x B^3 channel-major volume.
struct ChannelVolume {
  int resolution = 0;
  int channels = 0;
  std::vector<double> values;

  ChannelVolume() = default;
  ChannelVolume(int b, int c)
      : resolution(b), channels(c), values(static_cast<size_t>(b) * b * b * c, 0.0) {}
  size_t voxels() const { return static_cast<size_t>(resolution) * resolution * resolution; }
  std::span<double> channel(int c) { return {values.data() + c * voxels(), voxels()}; }
  std::span<const double> channel(int c) const { return {values.data() + c * voxels(), voxels()}; }
};

struct Keypoints3D {
  std::vector<Vec3> points;
  int timestamp = 0;
};

// Four-neighbour bilinear tap into one heatmap plane (indices into H*W).
struct BilinearTap {
  std::array<int32_t, 4> index{};
  std::array<double, 4> weight{};
};

// Maps an image pixel position (integer pixel centers) into a bilinear tap on
// an hm_h x hm_w heatmap covering the full image. Returns false when the point
// lies outside the image. Inside the image, taps are clamped to the border.
bool heatmap_tap(const Vec2& pixel, int image_w, int image_h, int hm_w, int hm_h,
                 BilinearTap& tap);

// Bilinear sample of one heatmap channel at every voxel center's projection.
// Voxels projecting outside the image or behind the camera get 0.
ChannelVolume unproject_heatmap(const VoxelGrid& grid, const CameraModel& cam,
                                const Heatmap2D& hm, const ProjectOptions& opt = {});
// Adjoint of unproject_heatmap with respect to the heatmap values.
Heatmap2D unproject_heatmap_vjp(const VoxelGrid& grid, const CameraModel& cam, int hm_h,
                                int hm_w, const ChannelVolume& grad_volume,
                                const ProjectOptions& opt = {});

// Per voxel and channel: sum_i softmax_i(v) * v_i over views.
ChannelVolume softmax_aggregate(std::span<const ChannelVolume> volumes);
std::vector<ChannelVolume> softmax_aggregate_vjp(std::span<const ChannelVolume> volumes,
                                                 const ChannelVolume& grad_out);

// Probability-weighted mean voxel center under softmax(values / tau).
Vec3 spatial_softmax_3d(const VoxelGrid& grid, std::span<const double> values, double tau = 1.0);
Vec3 spatial_softmax_3d(const VoxelGrid& grid, const ChannelVolume& vol, int channel,
                        double tau = 1.0);
std::vector<double> spatial_softmax_3d_vjp(const VoxelGrid& grid, std::span<const double> values,
                                           double tau, const Vec3& grad_point);

// Optional per-channel affine applied to the aggregated volume before the 3D
// spatial softmax (the trainable stand-in for a volume-to-volume network).
struct VolumeAffine {
  std::vector<double> scale;
  std::vector<double> bias;
  static VolumeAffine identity(int channels) {
    return {std::vector<double>(channels, 1.0), std::vector<double>(channels, 0.0)};
  }
};

struct DiscoverOptions {
  double tau = 1.0;
  const VolumeAffine* affine = nullptr;
  ProjectOptions project;
};

// unproject -> softmax_aggregate -> spatial_softmax_3d per channel.
Keypoints3D discover_keypoints(const VoxelGrid& grid, std::span<const CameraModel> cams,
                               std::span<const Heatmap2D> heatmaps,
                               const DiscoverOptions& opt = {});

// Fused unproject + aggregate + spatial softmax used by the training loop.
//
// Sampling taps are precomputed once per camera set. Voxels that project
// outside every image hold exactly 0 after aggregation, so they enter the
// softmax only through their count and coordinate sum. View weights are
// recomputed in backward instead of stored. Voxels are processed in fixed
// blocks whose partial sums are reduced in block order, so results do not
// depend on the thread count.
class VolumetricLifter {
 public:
  VolumetricLifter(const VoxelGrid& grid, std::span<const CameraModel> cams, int hm_h, int hm_w,
                   const ProjectOptions& opt = {});

  struct Cache {
    int channels = 0;
    int stride = 0;                  // channels padded for vector loops
    std::vector<double> aggregated;  // [active voxel * stride + c]
    std::vector<double> max_logit;   // per channel
    std::vector<double> partition;   // per channel, relative to max_logit
    std::vector<Vec3> points;
  };
  // heatmaps[v] is a C x hm_h x hm_w plane stack for view v.
  Cache forward(std::span<const std::span<const double>> heatmaps, int channels,
                const VolumeAffine& affine, double tau) const;

  struct Grads {
    std::vector<std::vector<double>> heatmaps;  // per view, C*hm_h*hm_w
    std::vector<double> scale;
    std::vector<double> bias;
  };
  Grads backward(std::span<const std::span<const double>> heatmaps, const Cache& cache,
                 const VolumeAffine& affine, double tau,
                 std::span<const Vec3> grad_points) const;

  const VoxelGrid& grid() const { return grid_; }
  size_t active_voxels() const { return active_.size(); }
  int views() const { return views_; }

  static constexpr size_t kBlock = 8192;
  static int padded_channels(int channels) { return (channels + 7) & ~7; }

 private:
  std::vector<std::vector<double>> channel_last(std::span<const std::span<const double>> heatmaps,
                                                int channels) const;

  VoxelGrid grid_;
  int hm_h_;
  int hm_w_;
  int views_ = 0;
  std::vector<uint32_t> active_;
  std::vector<double> ax_, ay_, az_;  // active voxel centers
  // Per view and active voxel; taps outside the image have zero weights.
  std::vector<std::vector<std::array<int32_t, 4>>> tap_index_;
  std::vector<std::vector<std::array<double, 4>>> tap_weight_;
  size_t inactive_count_ = 0;
  Vec3 inactive_sum_ = Vec3::Zero();
};

}  // namespace mvkd
