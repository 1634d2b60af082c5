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

#include "mvkd/voxel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace mvkd {

VoxelGrid::VoxelGrid(const Vec3& center, double side_length, int resolution)
    : center_(center), side_(side_length), res_(resolution) {
  if (!(side_length > 0.0) || !std::isfinite(side_length)) {
    throw ValidationError("voxel grid: side length must be positive");
  }
  if (resolution < 2) throw ValidationError("voxel grid: resolution must be >= 2");
  if (!center.allFinite()) throw ValidationError("voxel grid: center must be finite");
  const size_t n = static_cast<size_t>(res_) * res_ * res_;
  coords_.resize(n);
  const double h = side_ / res_;
  const Vec3 origin = center_ - Vec3::Constant(side_ / 2.0);
  for (int i = 0; i < res_; ++i) {
    for (int j = 0; j < res_; ++j) {
      for (int k = 0; k < res_; ++k) {
        coords_[index(i, j, k)] = origin + h * Vec3(i + 0.5, j + 0.5, k + 0.5);
      }
    }
  }
}

Vec3 VoxelGrid::normalize(const Vec3& world) const {
  return (world - center_ + Vec3::Constant(side_ / 2.0)) / side_;
}

bool VoxelGrid::contains(const Vec3& world) const {
  return ((world - center_).cwiseAbs().array() <= side_ / 2.0).all();
}

VoxelGrid build_grid(const Vec3& center, double side_length, int resolution) {
  return VoxelGrid(center, side_length, resolution);
}

namespace {

void axis_tap(double pixel, int image_size, int hm_size, int& i0, int& i1, double& f) {
  double x = (pixel + 0.5) * hm_size / image_size - 0.5;
  x = std::clamp(x, 0.0, static_cast<double>(hm_size - 1));
  if (hm_size == 1) {
    i0 = i1 = 0;
    f = 0.0;
    return;
  }
  i0 = std::min(static_cast<int>(std::floor(x)), hm_size - 2);
  i1 = i0 + 1;
  f = x - i0;
}

}  // namespace

bool heatmap_tap(const Vec2& pixel, int image_w, int image_h, int hm_w, int hm_h,
                 BilinearTap& tap) {
  const double u = pixel.x();
  const double v = pixel.y();
  if (!(u >= -0.5 && u <= image_w - 0.5 && v >= -0.5 && v <= image_h - 0.5)) return false;
  int x0, x1, y0, y1;
  double fx, fy;
  axis_tap(u, image_w, hm_w, x0, x1, fx);
  axis_tap(v, image_h, hm_h, y0, y1, fy);
  tap.index = {y0 * hm_w + x0, y0 * hm_w + x1, y1 * hm_w + x0, y1 * hm_w + x1};
  tap.weight = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  return true;
}

namespace {

bool voxel_tap(const VoxelGrid& grid, size_t voxel, const CameraModel& cam, int hm_h, int hm_w,
               const ProjectOptions& opt, BilinearTap& tap) {
  const Vec3& X = grid.coord(voxel);
  if (!(depth(cam.P(), X, opt) > opt.eps_w)) return false;
  return heatmap_tap(project(cam.P(), X, opt), cam.width(), cam.height(), hm_w, hm_h, tap);
}

double sample(const BilinearTap& tap, const double* plane) {
  return tap.weight[0] * plane[tap.index[0]] + tap.weight[1] * plane[tap.index[1]] +
         tap.weight[2] * plane[tap.index[2]] + tap.weight[3] * plane[tap.index[3]];
}

void scatter(const BilinearTap& tap, double g, double* plane) {
  for (int q = 0; q < 4; ++q) plane[tap.index[q]] += g * tap.weight[q];
}

}  // namespace

ChannelVolume unproject_heatmap(const VoxelGrid& grid, const CameraModel& cam,
                                const Heatmap2D& hm, const ProjectOptions& opt) {
  ChannelVolume vol(grid.resolution(), hm.channels);
  const size_t plane = static_cast<size_t>(hm.height) * hm.width;
  BilinearTap tap;
  for (size_t v = 0; v < grid.size(); ++v) {
    if (!voxel_tap(grid, v, cam, hm.height, hm.width, opt, tap)) continue;
    for (int c = 0; c < hm.channels; ++c) {
      vol.values[c * vol.voxels() + v] = sample(tap, hm.values.data() + c * plane);
    }
  }
  return vol;
}

Heatmap2D unproject_heatmap_vjp(const VoxelGrid& grid, const CameraModel& cam, int hm_h,
                                int hm_w, const ChannelVolume& grad_volume,
                                const ProjectOptions& opt) {
  Heatmap2D grad(hm_h, hm_w, grad_volume.channels);
  const size_t plane = static_cast<size_t>(hm_h) * hm_w;
  BilinearTap tap;
  for (size_t v = 0; v < grid.size(); ++v) {
    if (!voxel_tap(grid, v, cam, hm_h, hm_w, opt, tap)) continue;
    for (int c = 0; c < grad.channels; ++c) {
      scatter(tap, grad_volume.values[c * grad_volume.voxels() + v], grad.values.data() + c * plane);
    }
  }
  return grad;
}

namespace {

void check_same_shape(std::span<const ChannelVolume> volumes) {
  if (volumes.empty()) throw ValidationError("softmax_aggregate: need at least one volume");
  for (const auto& v : volumes) {
    if (v.resolution != volumes[0].resolution || v.channels != volumes[0].channels ||
        v.values.size() != volumes[0].values.size()) {
      throw ValidationError("softmax_aggregate: volume shapes differ");
    }
  }
}

}  // namespace

ChannelVolume softmax_aggregate(std::span<const ChannelVolume> volumes) {
  check_same_shape(volumes);
  ChannelVolume out(volumes[0].resolution, volumes[0].channels);
  for (size_t e = 0; e < out.values.size(); ++e) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& vol : volumes) m = std::max(m, vol.values[e]);
    double z = 0.0, acc = 0.0;
    for (const auto& vol : volumes) {
      const double w = std::exp(vol.values[e] - m);
      z += w;
      acc += w * vol.values[e];
    }
    out.values[e] = acc / z;
  }
  return out;
}

std::vector<ChannelVolume> softmax_aggregate_vjp(std::span<const ChannelVolume> volumes,
                                                 const ChannelVolume& grad_out) {
  check_same_shape(volumes);
  std::vector<ChannelVolume> grads(volumes.size(),
                                   ChannelVolume(volumes[0].resolution, volumes[0].channels));
  std::vector<double> w(volumes.size());
  for (size_t e = 0; e < grad_out.values.size(); ++e) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& vol : volumes) m = std::max(m, vol.values[e]);
    double z = 0.0, out = 0.0;
    for (size_t i = 0; i < volumes.size(); ++i) {
      w[i] = std::exp(volumes[i].values[e] - m);
      z += w[i];
    }
    for (size_t i = 0; i < volumes.size(); ++i) {
      w[i] /= z;
      out += w[i] * volumes[i].values[e];
    }
    for (size_t i = 0; i < volumes.size(); ++i) {
      grads[i].values[e] = grad_out.values[e] * w[i] * (1.0 + volumes[i].values[e] - out);
    }
  }
  return grads;
}

Vec3 spatial_softmax_3d(const VoxelGrid& grid, std::span<const double> values, double tau) {
  if (values.size() != grid.size()) throw ValidationError("spatial_softmax_3d: size mismatch");
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v / tau);
  double z = 0.0;
  Vec3 acc = Vec3::Zero();
  for (size_t i = 0; i < values.size(); ++i) {
    const double e = std::exp(values[i] / tau - m);
    z += e;
    acc += e * grid.coord(i);
  }
  return acc / z;
}

Vec3 spatial_softmax_3d(const VoxelGrid& grid, const ChannelVolume& vol, int channel,
                        double tau) {
  if (channel < 0 || channel >= vol.channels) {
    throw ValidationError("spatial_softmax_3d: channel out of range");
  }
  return spatial_softmax_3d(grid, vol.channel(channel), tau);
}

std::vector<double> spatial_softmax_3d_vjp(const VoxelGrid& grid, std::span<const double> values,
                                           double tau, const Vec3& grad_point) {
  const Vec3 U = spatial_softmax_3d(grid, values, tau);
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v / tau);
  double z = 0.0;
  for (double v : values) z += std::exp(v / tau - m);
  std::vector<double> grad(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    const double p = std::exp(values[i] / tau - m) / z;
    grad[i] = p * (grid.coord(i) - U).dot(grad_point) / tau;
  }
  return grad;
}

Keypoints3D discover_keypoints(const VoxelGrid& grid, std::span<const CameraModel> cams,
                               std::span<const Heatmap2D> heatmaps, const DiscoverOptions& opt) {
  if (cams.size() != heatmaps.size()) {
    throw ValidationError("discover_keypoints: one heatmap per camera required");
  }
  if (heatmaps.empty()) throw ValidationError("discover_keypoints: no views");
  std::vector<ChannelVolume> volumes;
  volumes.reserve(cams.size());
  for (size_t i = 0; i < cams.size(); ++i) {
    volumes.push_back(unproject_heatmap(grid, cams[i], heatmaps[i], opt.project));
  }
  ChannelVolume agg = softmax_aggregate(volumes);
  Keypoints3D out;
  for (int c = 0; c < agg.channels; ++c) {
    auto ch = agg.channel(c);
    if (opt.affine != nullptr) {
      for (double& v : ch) v = opt.affine->scale[c] * v + opt.affine->bias[c];
    }
    out.points.push_back(spatial_softmax_3d(grid, ch, opt.tau));
  }
  return out;
}

VolumetricLifter::VolumetricLifter(const VoxelGrid& grid, std::span<const CameraModel> cams,
                                   int hm_h, int hm_w, const ProjectOptions& opt)
    : grid_(grid), hm_h_(hm_h), hm_w_(hm_w), views_(static_cast<int>(cams.size())) {
  if (cams.empty()) throw ValidationError("lifter: no views");
  if (hm_h < 1 || hm_w < 1) throw ValidationError("lifter: empty heatmap");
  const size_t n = grid.size();
  tap_index_.resize(views_);
  tap_weight_.resize(views_);
  BilinearTap tap;
  for (size_t v = 0; v < n; ++v) {
    std::vector<BilinearTap> taps(views_);
    bool any = false;
    for (int c = 0; c < views_; ++c) {
      if (voxel_tap(grid, v, cams[c], hm_h, hm_w, opt, tap)) {
        taps[c] = tap;
        any = true;
      }
    }
    if (!any) {
      ++inactive_count_;
      inactive_sum_ += grid.coord(v);
      continue;
    }
    active_.push_back(static_cast<uint32_t>(v));
    ax_.push_back(grid.coord(v).x());
    ay_.push_back(grid.coord(v).y());
    az_.push_back(grid.coord(v).z());
    for (int c = 0; c < views_; ++c) {
      tap_index_[c].push_back(taps[c].index);
      tap_weight_[c].push_back(taps[c].weight);
    }
  }
}

namespace {

// exp(x) for x <= 0 without branches so that channel loops vectorize.
// Cody-Waite reduction and a degree-12 Taylor polynomial; relative error is
// a few ulp. Returns 0 below -708.
inline double exp_nonpositive(double x) {
  constexpr double kLog2e = 1.4426950408889634;
  constexpr double kLn2Hi = 6.93147180369123816490e-01;
  constexpr double kLn2Lo = 1.90821492927058770002e-10;
  constexpr double kShift = 0x1.8p52;
  const double xc = x < -708.0 ? -708.0 : x;
  const double kd = xc * kLog2e + kShift;
  const double k = kd - kShift;
  const double r = (xc - k * kLn2Hi) - k * kLn2Lo;
  double p = 1.0 / 479001600.0;
  p = p * r + 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  const uint64_t bits = (std::bit_cast<uint64_t>(kd) << 52) + (uint64_t{1023} << 52);
  const double out = p * std::bit_cast<double>(bits);
  return x < -708.0 ? 0.0 : out;
}

// Per-thread scratch for one voxel: samples and view weights, [view][c].
struct VoxelScratch {
  std::vector<double> s, w, m, z, out;
  VoxelScratch(int views, int channels)
      : s(views * channels), w(views * channels), m(channels), z(channels), out(channels) {}
};

// Bilinear samples of every view and channel, then the softmax over views.
inline void sample_and_aggregate(const std::vector<std::vector<double>>& hl,
                                 const std::vector<std::vector<std::array<int32_t, 4>>>& tap_index,
                                 const std::vector<std::vector<std::array<double, 4>>>& tap_weight,
                                 size_t a, int views, int C, VoxelScratch& sc) {
  for (int v = 0; v < views; ++v) {
    const auto& idx = tap_index[v][a];
    const auto& w = tap_weight[v][a];
    const double* h0 = hl[v].data() + static_cast<size_t>(idx[0]) * C;
    const double* h1 = hl[v].data() + static_cast<size_t>(idx[1]) * C;
    const double* h2 = hl[v].data() + static_cast<size_t>(idx[2]) * C;
    const double* h3 = hl[v].data() + static_cast<size_t>(idx[3]) * C;
    double* s = sc.s.data() + v * C;
#pragma omp simd
    for (int c = 0; c < C; ++c) s[c] = w[0] * h0[c] + w[1] * h1[c] + w[2] * h2[c] + w[3] * h3[c];
  }
  double* m = sc.m.data();
  double* z = sc.z.data();
  double* out = sc.out.data();
#pragma omp simd
  for (int c = 0; c < C; ++c) {
    m[c] = sc.s[c];
    z[c] = 0.0;
    out[c] = 0.0;
  }
  for (int v = 1; v < views; ++v) {
    const double* s = sc.s.data() + v * C;
#pragma omp simd
    for (int c = 0; c < C; ++c) m[c] = s[c] > m[c] ? s[c] : m[c];
  }
  for (int v = 0; v < views; ++v) {
    const double* s = sc.s.data() + v * C;
    double* w = sc.w.data() + v * C;
#pragma omp simd
    for (int c = 0; c < C; ++c) {
      w[c] = exp_nonpositive(s[c] - m[c]);
      z[c] += w[c];
      out[c] += w[c] * s[c];
    }
  }
  for (int v = 0; v < views; ++v) {
    double* w = sc.w.data() + v * C;
#pragma omp simd
    for (int c = 0; c < C; ++c) w[c] /= z[c];
  }
#pragma omp simd
  for (int c = 0; c < C; ++c) out[c] /= z[c];
}

}  // namespace

std::vector<std::vector<double>> VolumetricLifter::channel_last(
    std::span<const std::span<const double>> heatmaps, int channels) const {
  if (static_cast<int>(heatmaps.size()) != views_) {
    throw ValidationError("lifter: one heatmap stack per view required");
  }
  const size_t plane = static_cast<size_t>(hm_h_) * hm_w_;
  const int cp = padded_channels(channels);
  std::vector<std::vector<double>> hl(views_, std::vector<double>(plane * cp, 0.0));
  for (int v = 0; v < views_; ++v) {
    if (heatmaps[v].size() != plane * channels) throw ValidationError("lifter: heatmap size mismatch");
    for (int c = 0; c < channels; ++c) {
      for (size_t i = 0; i < plane; ++i) hl[v][i * cp + c] = heatmaps[v][c * plane + i];
    }
  }
  return hl;
}

VolumetricLifter::Cache VolumetricLifter::forward(std::span<const std::span<const double>> heatmaps,
                                                  int channels, const VolumeAffine& affine,
                                                  double tau) const {
  const int C = channels;
  const int S = padded_channels(C);
  const auto hl = channel_last(heatmaps, C);
  if (static_cast<int>(affine.scale.size()) != C || static_cast<int>(affine.bias.size()) != C) {
    throw ValidationError("lifter: affine size mismatch");
  }
  const size_t A = active_.size();
  const size_t blocks = (A + kBlock - 1) / kBlock;
  // Padding channels have zero heatmaps and a zero affine.
  std::vector<double> s(S, 0.0), b(S, 0.0);
  for (int c = 0; c < C; ++c) {
    s[c] = affine.scale[c] / tau;
    b[c] = affine.bias[c] / tau;
  }

  Cache cache;
  cache.channels = C;
  cache.stride = S;
  cache.aggregated.assign(A * S, 0.0);
  // Per block: channel maxima, then partition sums and first moments.
  std::vector<double> block_max(blocks * S, -std::numeric_limits<double>::infinity());
#pragma omp parallel
  {
    VoxelScratch sc(views_, S);
#pragma omp for schedule(static)
    for (size_t blk = 0; blk < blocks; ++blk) {
      double* bm = block_max.data() + blk * S;
      for (size_t a = blk * kBlock; a < std::min(A, (blk + 1) * kBlock); ++a) {
        sample_and_aggregate(hl, tap_index_, tap_weight_, a, views_, S, sc);
        double* agg = cache.aggregated.data() + a * S;
#pragma omp simd
        for (int c = 0; c < S; ++c) {
          agg[c] = sc.out[c];
          const double zl = s[c] * agg[c] + b[c];
          bm[c] = zl > bm[c] ? zl : bm[c];
        }
      }
    }
  }
  cache.max_logit.assign(S, 0.0);
  std::fill_n(cache.max_logit.begin(), C, -std::numeric_limits<double>::infinity());
  for (int c = 0; c < C; ++c) {
    if (inactive_count_ > 0) cache.max_logit[c] = b[c];
    for (size_t blk = 0; blk < blocks; ++blk) {
      cache.max_logit[c] = std::max(cache.max_logit[c], block_max[blk * S + c]);
    }
  }
  std::vector<double> block_sum(blocks * 4 * S, 0.0);  // [blk][z, x, y, z-moment][c]
#pragma omp parallel for schedule(static)
  for (size_t blk = 0; blk < blocks; ++blk) {
    double* zs = block_sum.data() + blk * 4 * S;
    double* xs = zs + S;
    double* ys = zs + 2 * S;
    double* zz = zs + 3 * S;
    const double* mx = cache.max_logit.data();
    for (size_t a = blk * kBlock; a < std::min(A, (blk + 1) * kBlock); ++a) {
      const double* agg = cache.aggregated.data() + a * S;
      const double x = ax_[a], y = ay_[a], z = az_[a];
#pragma omp simd
      for (int c = 0; c < S; ++c) {
        const double e = exp_nonpositive(s[c] * agg[c] + b[c] - mx[c]);
        zs[c] += e;
        xs[c] += e * x;
        ys[c] += e * y;
        zz[c] += e * z;
      }
    }
  }
  cache.partition.assign(C, 0.0);
  cache.points.assign(C, Vec3::Zero());
  for (int c = 0; c < C; ++c) {
    double zsum = 0.0;
    Vec3 acc = Vec3::Zero();
    for (size_t blk = 0; blk < blocks; ++blk) {
      const double* zs = block_sum.data() + blk * 4 * S;
      zsum += zs[c];
      acc += Vec3(zs[S + c], zs[2 * S + c], zs[3 * S + c]);
    }
    if (inactive_count_ > 0) {
      const double e0 = std::exp(b[c] - cache.max_logit[c]);
      zsum += e0 * static_cast<double>(inactive_count_);
      acc += e0 * inactive_sum_;
    }
    cache.partition[c] = zsum;
    cache.points[c] = acc / zsum;
  }
  return cache;
}

VolumetricLifter::Grads VolumetricLifter::backward(
    std::span<const std::span<const double>> heatmaps, const Cache& cache,
    const VolumeAffine& affine, double tau, std::span<const Vec3> grad_points) const {
  const int C = cache.channels;
  const int S = cache.stride;
  const auto hl = channel_last(heatmaps, C);
  const size_t plane = static_cast<size_t>(hm_h_) * hm_w_;
  const size_t A = active_.size();
  const size_t blocks = (A + kBlock - 1) / kBlock;
  std::vector<double> s(S, 0.0), b(S, 0.0), sc_raw(S, 0.0), inv_z(S, 0.0), ux(S, 0.0), uy(S, 0.0),
      uz(S, 0.0), gx(S, 0.0), gy(S, 0.0), gzc(S, 0.0);
  for (int c = 0; c < C; ++c) {
    s[c] = affine.scale[c] / tau;
    b[c] = affine.bias[c] / tau;
    sc_raw[c] = affine.scale[c];
    inv_z[c] = 1.0 / cache.partition[c];
    ux[c] = cache.points[c].x();
    uy[c] = cache.points[c].y();
    uz[c] = cache.points[c].z();
    gx[c] = grad_points[c].x() / tau;
    gy[c] = grad_points[c].y() / tau;
    gzc[c] = grad_points[c].z() / tau;
  }
  const double* mx = cache.max_logit.data();
  const size_t per_view = plane * S;
  // Channel-last gradient partials per block: [blk][view][cell * C + c].
  std::vector<double> block_grad(blocks * views_ * per_view, 0.0);
  std::vector<double> block_affine(blocks * 2 * S, 0.0);
#pragma omp parallel
  {
    VoxelScratch sc(views_, S);
    std::vector<double> gv(S), dz(S);
#pragma omp for schedule(static)
    for (size_t blk = 0; blk < blocks; ++blk) {
      double* bg = block_grad.data() + blk * views_ * per_view;
      double* ds = block_affine.data() + blk * 2 * S;
      double* db = ds + S;
      for (size_t a = blk * kBlock; a < std::min(A, (blk + 1) * kBlock); ++a) {
        const double* agg = cache.aggregated.data() + a * S;
        const double x = ax_[a], y = ay_[a], z = az_[a];
#pragma omp simd
        for (int c = 0; c < S; ++c) {
          const double p = exp_nonpositive(s[c] * agg[c] + b[c] - mx[c]) * inv_z[c];
          dz[c] = p * ((x - ux[c]) * gx[c] + (y - uy[c]) * gy[c] + (z - uz[c]) * gzc[c]);
          ds[c] += dz[c] * agg[c];
          db[c] += dz[c];
          gv[c] = dz[c] * sc_raw[c];
        }
        sample_and_aggregate(hl, tap_index_, tap_weight_, a, views_, S, sc);
        for (int v = 0; v < views_; ++v) {
          const auto& idx = tap_index_[v][a];
          const auto& tw = tap_weight_[v][a];
          const double* sv = sc.s.data() + v * S;
          const double* wv = sc.w.data() + v * S;
          double* g = bg + v * per_view;
          for (int q = 0; q < 4; ++q) {
            if (tw[q] == 0.0) continue;
            double* gq = g + static_cast<size_t>(idx[q]) * S;
            const double wq = tw[q];
#pragma omp simd
            for (int c = 0; c < S; ++c) gq[c] += wq * gv[c] * wv[c] * (1.0 + sv[c] - sc.out[c]);
          }
        }
      }
    }
  }
  Grads g;
  g.heatmaps.assign(views_, std::vector<double>(per_view, 0.0));
  g.scale.assign(C, 0.0);
  g.bias.assign(C, 0.0);
  for (int v = 0; v < views_; ++v) {
    std::vector<double> acc(per_view, 0.0);
    for (size_t blk = 0; blk < blocks; ++blk) {
      const double* bg = block_grad.data() + (blk * views_ + v) * per_view;
      for (size_t i = 0; i < per_view; ++i) acc[i] += bg[i];
    }
    for (int c = 0; c < C; ++c) {
      for (size_t i = 0; i < plane; ++i) g.heatmaps[v][c * plane + i] = acc[i * S + c];
    }
  }
  for (int c = 0; c < C; ++c) {
    for (size_t blk = 0; blk < blocks; ++blk) {
      g.scale[c] += block_affine[blk * 2 * S + c];
      g.bias[c] += block_affine[blk * 2 * S + S + c];
    }
    if (inactive_count_ > 0) {
      const double p0 = std::exp(b[c] - mx[c]) * inv_z[c];
      const Vec3 d = inactive_sum_ - static_cast<double>(inactive_count_) * cache.points[c];
      g.bias[c] += p0 * (d.x() * gx[c] + d.y() * gy[c] + d.z() * gzc[c]);
    }
  }
  return g;
}

}  // namespace mvkd
