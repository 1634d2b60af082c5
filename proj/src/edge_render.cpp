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

#include "mvkd/edge_render.hpp"

#include <algorithm>
#include <cmath>

namespace mvkd {

EdgeWeights::EdgeWeights(int joints, double init) : joints_(joints) {
  if (joints < 0) throw ValidationError("edge weights: negative joint count");
  for (int m = 0; m < joints; ++m) {
    for (int n = m + 1; n < joints; ++n) pairs_.emplace_back(m, n);
  }
  w_.assign(pairs_.size(), init);
}

size_t EdgeWeights::pair_index(int m, int n) const {
  if (m == n || m < 0 || n < 0 || m >= joints_ || n >= joints_) {
    throw ValidationError("edge weights: invalid pair");
  }
  if (m > n) std::swap(m, n);
  // Rows 0..m-1 hold (J-1) + (J-2) + ... + (J-m) entries.
  return static_cast<size_t>(m) * (2 * joints_ - m - 1) / 2 + (n - m - 1);
}

namespace {

struct Segment {
  Vec2 a;
  Vec2 ab;
  double len2;
};

// Closest point parameter t in [0, 1] and the squared distance.
inline double closest(const Segment& s, const Vec2& p, double& t) {
  const Vec2 ap = p - s.a;
  t = s.len2 > 0.0 ? std::clamp(ap.dot(s.ab) / s.len2, 0.0, 1.0) : 0.0;
  return (ap - t * s.ab).squaredNorm();
}

void check_cfg(const EdgeConfig& cfg) {
  if (!(cfg.sigma > 0.0)) throw ValidationError("edge config: sigma must be positive");
  if (cfg.height <= 0 || cfg.width <= 0) throw ValidationError("edge config: empty raster");
}

// Beyond this many sigmas the Gaussian is below 1e-20 and treated as zero.
constexpr double kCutoffSigmas = 6.8;

}  // namespace

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Segment s{a, b - a, (b - a).squaredNorm()};
  double t;
  return std::sqrt(closest(s, p, t));
}

SegmentDistanceGrad point_segment_distance_grad(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Segment s{a, b - a, (b - a).squaredNorm()};
  double t;
  const double d = std::sqrt(closest(s, p, t));
  SegmentDistanceGrad g;
  if (d == 0.0) return g;
  const Vec2 u = (p - (s.a + t * s.ab)) / d;
  g.p = u;
  g.a = -(1.0 - t) * u;
  g.b = -t * u;
  return g;
}

EdgeMap render_edge(const Vec2& a, const Vec2& b, const EdgeConfig& cfg) {
  check_cfg(cfg);
  EdgeMap map(cfg.height, cfg.width);
  const Segment s{a, b - a, (b - a).squaredNorm()};
  const double inv = 1.0 / (cfg.sigma * cfg.sigma);
  double t;
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      map.values[static_cast<size_t>(y) * cfg.width + x] =
          std::exp(-closest(s, pixel_center(x, y, cfg), t) * inv);
    }
  }
  return map;
}

std::pair<Vec2, Vec2> render_edge_vjp(const Vec2& a, const Vec2& b, const EdgeConfig& cfg,
                                      std::span<const double> grad_map) {
  check_cfg(cfg);
  const Segment s{a, b - a, (b - a).squaredNorm()};
  const double inv = 1.0 / (cfg.sigma * cfg.sigma);
  Vec2 ga = Vec2::Zero(), gb = Vec2::Zero();
  double t;
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      const double g = grad_map[static_cast<size_t>(y) * cfg.width + x];
      if (g == 0.0) continue;
      const Vec2 p = pixel_center(x, y, cfg);
      const double d2 = closest(s, p, t);
      const double e = std::exp(-d2 * inv);
      // d(d^2)/da = -2 (p - q)(1 - t), d(d^2)/db = -2 (p - q) t.
      const Vec2 r = p - (s.a + t * s.ab);
      const double k = g * e * 2.0 * inv;
      ga += k * (1.0 - t) * r;
      gb += k * t * r;
    }
  }
  return {ga, gb};
}

std::vector<std::pair<int, int>> active_edges(const EdgeWeights& weights) {
  std::vector<std::pair<int, int>> out;
  for (size_t i = 0; i < weights.pairs(); ++i) {
    if (weights.values()[i] > 0.0) out.push_back(weights.pair(i));
  }
  return out;
}

EdgeAggregate aggregate_edges_traced(std::span<const Vec2> keypoints, const EdgeWeights& weights,
                                     const EdgeConfig& cfg) {
  check_cfg(cfg);
  if (keypoints.size() < 2) throw ValidationError("aggregate_edges: need at least 2 keypoints");
  if (static_cast<int>(keypoints.size()) != weights.joints()) {
    throw ValidationError("aggregate_edges: keypoint count does not match edge weights");
  }
  EdgeAggregate out{EdgeMap(cfg.height, cfg.width),
                    std::vector<int>(static_cast<size_t>(cfg.height) * cfg.width, -1)};
  const double inv = 1.0 / (cfg.sigma * cfg.sigma);
  const double cutoff = kCutoffSigmas * cfg.sigma;
  double t;
  for (size_t e = 0; e < weights.pairs(); ++e) {
    const double w = weights.values()[e];
    if (!(w > 0.0)) continue;
    const auto [m, n] = weights.pair(e);
    const Vec2& a = keypoints[m];
    const Vec2& b = keypoints[n];
    const Segment s{a, b - a, (b - a).squaredNorm()};
    // Pixel-center bounding box of the segment grown by the cutoff radius.
    const double x_lo = std::min(a.x(), b.x()) - cutoff, x_hi = std::max(a.x(), b.x()) + cutoff;
    const double y_lo = std::min(a.y(), b.y()) - cutoff, y_hi = std::max(a.y(), b.y()) + cutoff;
    const int x0 = std::max(0, static_cast<int>(std::floor(x_lo * cfg.width - 0.5)));
    const int x1 = std::min(cfg.width - 1, static_cast<int>(std::ceil(x_hi * cfg.width - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(y_lo * cfg.height - 0.5)));
    const int y1 = std::min(cfg.height - 1, static_cast<int>(std::ceil(y_hi * cfg.height - 0.5)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const size_t idx = static_cast<size_t>(y) * cfg.width + x;
        const double v = w * std::exp(-closest(s, pixel_center(x, y, cfg), t) * inv);
        if (v > out.map.values[idx]) {
          out.map.values[idx] = v;
          out.winner[idx] = static_cast<int>(e);
        }
      }
    }
  }
  return out;
}

EdgeMap aggregate_edges(std::span<const Vec2> keypoints, const EdgeWeights& weights,
                        const EdgeConfig& cfg) {
  return aggregate_edges_traced(keypoints, weights, cfg).map;
}

EdgeGrads aggregate_edges_vjp(std::span<const Vec2> keypoints, const EdgeWeights& weights,
                              const EdgeConfig& cfg, const EdgeAggregate& forward,
                              std::span<const double> grad_map) {
  EdgeGrads g{std::vector<Vec2>(keypoints.size(), Vec2::Zero()),
              std::vector<double>(weights.pairs(), 0.0)};
  const double inv = 1.0 / (cfg.sigma * cfg.sigma);
  double t;
  for (int y = 0; y < cfg.height; ++y) {
    for (int x = 0; x < cfg.width; ++x) {
      const size_t idx = static_cast<size_t>(y) * cfg.width + x;
      const int e = forward.winner[idx];
      const double gp = grad_map[idx];
      if (e < 0 || gp == 0.0) continue;
      const auto [m, n] = weights.pair(e);
      const double w = weights.values()[e];
      const Vec2& a = keypoints[m];
      const Segment s{a, keypoints[n] - a, (keypoints[n] - a).squaredNorm()};
      const Vec2 p = pixel_center(x, y, cfg);
      const double val = std::exp(-closest(s, p, t) * inv);
      g.weights[e] += gp * val;
      const Vec2 r = p - (s.a + t * s.ab);
      const double k = gp * w * val * 2.0 * inv;
      g.keypoints[m] += k * (1.0 - t) * r;
      g.keypoints[n] += k * t * r;
    }
  }
  return g;
}

}  // namespace mvkd
