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
#include <utility>
#include <vector>

#include "mvkd/camera.hpp"

namespace mvkd {

// Symmetric J x J edge weights stored as the strict upper triangle in the
// order (0,1), (0,2), ..., (0,J-1), (1,2), ...
class EdgeWeights {
 public:
  EdgeWeights() = default;
  EdgeWeights(int joints, double init);

  int joints() const { return joints_; }
  size_t pairs() const { return w_.size(); }
  double operator()(int m, int n) const { return w_[pair_index(m, n)]; }
  void set(int m, int n, double w) { w_[pair_index(m, n)] = w; }
  size_t pair_index(int m, int n) const;
  std::pair<int, int> pair(size_t index) const { return pairs_[index]; }
  std::vector<double>& values() { return w_; }
  const std::vector<double>& values() const { return w_; }

 private:
  int joints_ = 0;
  std::vector<double> w_;
  std::vector<std::pair<int, int>> pairs_;
};

// Initial weight for every pair; positive so that all edges start active.
inline constexpr double kEdgeWeightInit = 0.1;

struct EdgeConfig {
  double sigma = 0.02;  // line thickness, normalized image units
  int height = 64;
  int width = 64;
};

struct EdgeMap {
  int height = 0;
  int width = 0;
  int view_index = 0;
  int timestamp = 0;
  std::vector<double> values;

  EdgeMap() = default;
  EdgeMap(int h, int w) : height(h), width(w), values(static_cast<size_t>(h) * w, 0.0) {}
  double at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
};

// Center of raster pixel (x, y) in normalized image coordinates.
inline Vec2 pixel_center(int x, int y, const EdgeConfig& cfg) {
  return {(x + 0.5) / cfg.width, (y + 0.5) / cfg.height};
}

// Image pixel position (integer pixel centers) to normalized [0,1]^2.
inline Vec2 normalize_pixel(const Vec2& px, int image_w, int image_h) {
  return {(px.x() + 0.5) / image_w, (px.y() + 0.5) / image_h};
}

// Distance from p to the closed segment [a, b].
double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

struct SegmentDistanceGrad {
  Vec2 p = Vec2::Zero();
  Vec2 a = Vec2::Zero();
  Vec2 b = Vec2::Zero();
};
// Gradient of point_segment_distance; zero where the distance is zero.
SegmentDistanceGrad point_segment_distance_grad(const Vec2& p, const Vec2& a, const Vec2& b);

// exp(-d^2 / sigma^2) for every raster pixel, d = distance to [a, b].
EdgeMap render_edge(const Vec2& a, const Vec2& b, const EdgeConfig& cfg);

// Gradient of sum_p g(p) * render_edge(a, b)(p) with respect to a and b.
std::pair<Vec2, Vec2> render_edge_vjp(const Vec2& a, const Vec2& b, const EdgeConfig& cfg,
                                      std::span<const double> grad_map);

std::vector<std::pair<int, int>> active_edges(const EdgeWeights& weights);

// Pixelwise max over pairs of relu(w_mn) * render_edge(u_m, u_n); the pixel
// also remembers which pair won (lowest pair index on ties, -1 if none).
struct EdgeAggregate {
  EdgeMap map;
  std::vector<int> winner;
};

EdgeAggregate aggregate_edges_traced(std::span<const Vec2> keypoints, const EdgeWeights& weights,
                                     const EdgeConfig& cfg);
EdgeMap aggregate_edges(std::span<const Vec2> keypoints, const EdgeWeights& weights,
                        const EdgeConfig& cfg);

struct EdgeGrads {
  std::vector<Vec2> keypoints;
  std::vector<double> weights;  // same layout as EdgeWeights::values()
};
// Routes each pixel's gradient to its winning pair only.
EdgeGrads aggregate_edges_vjp(std::span<const Vec2> keypoints, const EdgeWeights& weights,
                              const EdgeConfig& cfg, const EdgeAggregate& forward,
                              std::span<const double> grad_map);

}  // namespace mvkd
