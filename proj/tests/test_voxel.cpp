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

#include <random>

#include <gtest/gtest.h>
#include <omp.h>

#include "mvkd/voxel.hpp"
#include "test_util.hpp"

namespace mvkd {
namespace {

// Hand-rolled bilinear lookup of a heatmap covering the whole image.
double bilinear_oracle(const Heatmap2D& hm, int c, const Vec2& px, int img_w, int img_h) {
  auto coord = [](double p, int img, int n) {
    return std::clamp((p + 0.5) * n / img - 0.5, 0.0, n - 1.0);
  };
  const double x = coord(px.x(), img_w, hm.width), y = coord(px.y(), img_h, hm.height);
  const int x0 = std::min(static_cast<int>(x), hm.width - 2), y0 = std::min(static_cast<int>(y), hm.height - 2);
  const double fx = x - x0, fy = y - y0;
  return (1 - fx) * (1 - fy) * hm.at(c, y0, x0) + fx * (1 - fy) * hm.at(c, y0, x0 + 1) +
         (1 - fx) * fy * hm.at(c, y0 + 1, x0) + fx * fy * hm.at(c, y0 + 1, x0 + 1);
}

Heatmap2D random_heatmap(int h, int w, int c, std::mt19937_64& rng) {
  Heatmap2D hm(h, w, c);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : hm.values) v = u(rng);
  return hm;
}

TEST(Grid, ClosedFormAndSpacing) {
  const auto g = build_grid(Vec3::Zero(), 2.0, 2);
  ASSERT_EQ(g.size(), 8u);
  for (const auto& c : g.coords()) {
    for (int a = 0; a < 3; ++a) EXPECT_DOUBLE_EQ(std::abs(c[a]), 0.5);
  }
  EXPECT_EQ(g.coord(1, 0, 0), Vec3(0.5, -0.5, -0.5));
  EXPECT_EQ(g.coord(0, 0, 1), Vec3(-0.5, -0.5, 0.5));
  EXPECT_DOUBLE_EQ(build_grid(Vec3::Zero(), 7500, 64).spacing(), 117.1875);
  EXPECT_DOUBLE_EQ(build_grid(Vec3::Zero(), 1000, 64).spacing(), 15.625);
  const auto off = build_grid(Vec3(10, 20, 30), 100, 4);
  EXPECT_EQ(off.coord(0, 0, 0), Vec3(10 - 50 + 12.5, 20 - 50 + 12.5, 30 - 50 + 12.5));
  EXPECT_THROW(build_grid(Vec3::Zero(), 0.0, 4), ValidationError);
  EXPECT_THROW(build_grid(Vec3::Zero(), 1.0, 1), ValidationError);
}

TEST(Unproject, ConstantHeatmapGivesOnes) {
  const auto cams = testing::ring4();
  const auto grid = build_grid(Vec3::Zero(), 1000, 8);
  Heatmap2D hm(32, 32, 2);
  std::fill(hm.values.begin(), hm.values.end(), 1.0);
  const auto vol = unproject_heatmap(grid, cams[0], hm);
  for (double v : vol.values) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(Unproject, DeltaSupport) {
  const auto grid = build_grid(Vec3::Zero(), 1000, 8);
  const Vec3 target = grid.coord(3, 4, 5);
  // Odd image size puts the principal point on an integer pixel.
  const auto cam = look_at_camera("c", Vec3(4000, 1500, 800), target, 300, 65, 65);
  Heatmap2D hm(65, 65, 1);
  hm.at(0, 32, 32) = 1.0;
  const auto vol = unproject_heatmap(grid, cam, hm);
  EXPECT_NEAR(vol.values[grid.index(3, 4, 5)], 1.0, 1e-9);
  for (size_t v = 0; v < grid.size(); ++v) {
    const Vec2 p = project(cam.P(), grid.coord(v));
    if (std::abs(p.x() - 32) >= 1.0 || std::abs(p.y() - 32) >= 1.0) EXPECT_EQ(vol.values[v], 0.0);
  }
}

TEST(Unproject, MatchesBilinearOracle) {
  std::mt19937_64 rng(1);
  const auto cams = testing::ring4();
  const auto grid = build_grid(Vec3(100, -50, 0), 3000, 16);
  const auto hm = random_heatmap(32, 32, 3, rng);
  const auto vol = unproject_heatmap(grid, cams[1], hm);
  std::uniform_int_distribution<size_t> pick(0, grid.size() - 1);
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    const size_t v = pick(rng);
    const Vec2 p = project(cams[1].P(), grid.coord(v));
    if (p.x() < -0.5 || p.y() < -0.5 || p.x() > 127.5 || p.y() > 127.5) continue;
    ++checked;
    for (int c = 0; c < 3; ++c) {
      EXPECT_NEAR(vol.values[c * vol.voxels() + v], bilinear_oracle(hm, c, p, 128, 128), 1e-12);
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(Unproject, OutsideAndBehindAreZero) {
  const auto cam = look_at_camera("c", Vec3(0, -3000, 0), Vec3::Zero(), 300, 64, 64);
  const auto grid = build_grid(Vec3::Zero(), 7500, 16);
  Heatmap2D hm(16, 16, 1);
  std::fill(hm.values.begin(), hm.values.end(), 1.0);
  const auto vol = unproject_heatmap(grid, cam, hm);
  int zeros = 0;
  for (size_t v = 0; v < grid.size(); ++v) {
    const Vec3& X = grid.coord(v);
    if (depth(cam.P(), X) <= 0) {
      EXPECT_EQ(vol.values[v], 0.0);
      ++zeros;
      continue;
    }
    const Vec2 p = project(cam.P(), X);
    if (p.x() < -0.5 || p.y() < -0.5 || p.x() > 63.5 || p.y() > 63.5) {
      EXPECT_EQ(vol.values[v], 0.0);
      ++zeros;
    }
  }
  EXPECT_GT(zeros, 0);
}

TEST(Unproject, LinearInValuesAndAdjoint) {
  std::mt19937_64 rng(2);
  const auto cams = testing::ring4();
  const auto grid = build_grid(Vec3::Zero(), 4000, 12);
  const auto h1 = random_heatmap(16, 16, 2, rng), h2 = random_heatmap(16, 16, 2, rng);
  Heatmap2D mix(16, 16, 2);
  for (size_t i = 0; i < mix.values.size(); ++i) mix.values[i] = 0.3 * h1.values[i] - 2.0 * h2.values[i];
  const auto v1 = unproject_heatmap(grid, cams[2], h1), v2 = unproject_heatmap(grid, cams[2], h2);
  const auto vm = unproject_heatmap(grid, cams[2], mix);
  for (size_t i = 0; i < vm.values.size(); ++i) {
    EXPECT_NEAR(vm.values[i], 0.3 * v1.values[i] - 2.0 * v2.values[i], 1e-12);
  }
  // <U h, g> == <h, U^T g>
  ChannelVolume g(12, 2);
  std::normal_distribution<double> n;
  for (double& x : g.values) x = n(rng);
  const auto gt = unproject_heatmap_vjp(grid, cams[2], 16, 16, g);
  double lhs = 0, rhs = 0;
  for (size_t i = 0; i < g.values.size(); ++i) lhs += v1.values[i] * g.values[i];
  for (size_t i = 0; i < h1.values.size(); ++i) rhs += h1.values[i] * gt.values[i];
  EXPECT_NEAR(lhs, rhs, 1e-9 * std::abs(lhs));
}

ChannelVolume filled(int b, int c, double v) {
  ChannelVolume out(b, c);
  std::fill(out.values.begin(), out.values.end(), v);
  return out;
}

TEST(SoftmaxAggregate, Examples) {
  std::mt19937_64 rng(4);
  ChannelVolume a(3, 2);
  std::normal_distribution<double> n;
  for (double& x : a.values) x = n(rng);
  {
    const std::vector<ChannelVolume> one = {a};
    const auto out = softmax_aggregate(one);
    for (size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(out.values[i], a.values[i], 1e-15);
  }
  {
    const std::vector<ChannelVolume> two = {a, a};
    const auto out = softmax_aggregate(two);
    for (size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(out.values[i], a.values[i], 1e-15);
  }
  {
    const std::vector<ChannelVolume> two = {filled(2, 1, 0.0), filled(2, 1, std::log(3.0))};
    const auto out = softmax_aggregate(two);
    EXPECT_NEAR(out.values[0], 0.75 * std::log(3.0), 1e-15);
    EXPECT_NEAR(out.values[0], 0.8240, 1e-4);
  }
  const std::vector<ChannelVolume> bad = {filled(2, 1, 0.0), filled(3, 1, 0.0)};
  EXPECT_THROW(softmax_aggregate(bad), ValidationError);
}

TEST(SoftmaxAggregate, PermutationInvariant) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 3.0);
  std::vector<ChannelVolume> vols(4, ChannelVolume(4, 3));
  for (auto& v : vols) {
    for (double& x : v.values) x = n(rng);
  }
  const auto ref = softmax_aggregate(vols);
  std::vector<ChannelVolume> perm = {vols[2], vols[0], vols[3], vols[1]};
  const auto out = softmax_aggregate(perm);
  for (size_t i = 0; i < ref.values.size(); ++i) EXPECT_NEAR(out.values[i], ref.values[i], 1e-12);
}

TEST(SpatialSoftmax, Examples) {
  const auto grid = build_grid(Vec3(5, -7, 11), 1000, 8);
  std::vector<double> vals(grid.size(), 0.0);
  EXPECT_LT((spatial_softmax_3d(grid, vals) - grid.center()).norm(), 1e-9);
  const size_t peak = grid.index(1, 6, 3);
  vals[peak] = 50.0;
  EXPECT_LT((spatial_softmax_3d(grid, vals) - grid.coord(peak)).norm(), 1e-6 * 1000);
  // Temperature scales the gap: 5 at tau 0.1 is the same as 50 at tau 1.
  vals[peak] = 5.0;
  EXPECT_LT((spatial_softmax_3d(grid, vals, 0.1) - grid.coord(peak)).norm(), 1e-6 * 1000);
  std::fill(vals.begin(), vals.end(), -100.0);
  const size_t a = grid.index(0, 0, 0), b = grid.index(7, 2, 5);
  vals[a] = vals[b] = 3.0;
  EXPECT_LT((spatial_softmax_3d(grid, vals) - 0.5 * (grid.coord(a) + grid.coord(b))).norm(), 1e-9);
}

TEST(SpatialSoftmax, InsideConvexHull) {
  std::mt19937_64 rng(6);
  const auto grid = build_grid(Vec3(0, 0, 0), 100, 6);
  std::normal_distribution<double> n(0.0, 20.0);
  const double lo = grid.coord(0).x(), hi = grid.coord(grid.size() - 1).x();
  for (int t = 0; t < 50; ++t) {
    std::vector<double> vals(grid.size());
    for (double& v : vals) v = n(rng);
    const Vec3 p = spatial_softmax_3d(grid, vals);
    for (int a = 0; a < 3; ++a) {
      EXPECT_GE(p[a], lo - 1e-9);
      EXPECT_LE(p[a], hi + 1e-9);
    }
  }
}

// Renders the projection of X as a Gaussian bump with peak 1.
Heatmap2D gaussian_render(const CameraModel& cam, const Vec3& X, int size, double sigma_px) {
  Heatmap2D hm(size, size, 1);
  const Vec2 p = project(cam.P(), X);
  const double sx = static_cast<double>(size) / cam.width(), sy = static_cast<double>(size) / cam.height();
  const Vec2 q((p.x() + 0.5) * sx - 0.5, (p.y() + 0.5) * sy - 0.5);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double d2 = (Vec2(x, y) - q).squaredNorm();
      hm.at(0, y, x) = std::exp(-d2 / (2 * sigma_px * sigma_px));
    }
  }
  return hm;
}

TEST(Discover, ZeroHeatmapsGiveGridCenter) {
  const auto cams = testing::ring4();
  const auto grid = build_grid(Vec3(100, 200, 300), 3000, 8);
  std::vector<Heatmap2D> hms(4, Heatmap2D(16, 16, 3));
  const auto kp = discover_keypoints(grid, cams, hms);
  for (const auto& p : kp.points) EXPECT_LT((p - grid.center()).norm(), 1e-9);
}

TEST(Discover, SingleViewDeltaLiesOnRay) {
  const auto grid = build_grid(Vec3::Zero(), 2000, 16);
  const Vec3 X(150, -300, 220);
  const auto cam = look_at_camera("c", Vec3(5000, 1000, 1200), X, 300, 65, 65);
  Heatmap2D hm(65, 65, 1);
  hm.at(0, 32, 32) = 1.0;
  DiscoverOptions opt;
  opt.tau = 0.01;
  const std::vector<CameraModel> cams = {cam};
  const std::vector<Heatmap2D> hms = {hm};
  const Vec3 p = discover_keypoints(grid, cams, hms, opt).points[0];
  const Vec3 c = cam.center(), dir = (X - c).normalized();
  const double dist = ((p - c) - (p - c).dot(dir) * dir).norm();
  EXPECT_LT(dist, grid.spacing());
}

TEST(Discover, FourViewGaussianWithinOneVoxel) {
  const auto cams = testing::ring4();
  const Vec3 X(230, -410, 150);
  for (int B : {16, 32, 64}) {
    const auto grid = build_grid(Vec3::Zero(), 7500, B);
    std::vector<Heatmap2D> hms;
    // Blob width of one projected voxel spacing.
    for (const auto& c : cams) {
      const double sigma = grid.spacing() * 300.0 / (c.center() - X).norm();
      hms.push_back(gaussian_render(c, X, 128, sigma));
    }
    DiscoverOptions opt;
    opt.tau = 0.02;
    const Vec3 p = discover_keypoints(grid, cams, hms, opt).points[0];
    EXPECT_LT((p - X).norm(), grid.spacing()) << "B=" << B;
  }
}

// The fused lifter against the reference composition.
TEST(Lifter, MatchesReferenceComposition) {
  std::mt19937_64 rng(7);
  const auto cams = testing::ring4();
  const auto grid = build_grid(Vec3(50, 0, -30), 7500, 20);
  const int C = 5, hm = 12;
  std::vector<Heatmap2D> hms;
  for (int v = 0; v < 4; ++v) {
    auto h = random_heatmap(hm, hm, C, rng);
    for (double& x : h.values) x *= 4.0;
    hms.push_back(h);
  }
  VolumeAffine aff = VolumeAffine::identity(C);
  std::normal_distribution<double> n;
  for (int c = 0; c < C; ++c) {
    aff.scale[c] = 3.0 + n(rng);
    aff.bias[c] = n(rng);
  }
  DiscoverOptions opt;
  opt.tau = 0.7;
  opt.affine = &aff;
  const auto ref = discover_keypoints(grid, cams, hms, opt);

  VolumetricLifter lifter(grid, cams, hm, hm);
  std::vector<std::span<const double>> planes;
  for (const auto& h : hms) planes.emplace_back(h.values);
  const auto cache = lifter.forward(planes, C, aff, opt.tau);
  for (int c = 0; c < C; ++c) EXPECT_LT((cache.points[c] - ref.points[c]).norm(), 1e-8);

  // Backward against the unfused adjoints.
  std::vector<Vec3> gp;
  for (int c = 0; c < C; ++c) gp.emplace_back(n(rng), n(rng), n(rng));
  const auto g = lifter.backward(planes, cache, aff, opt.tau, gp);
  std::vector<ChannelVolume> vols;
  for (int v = 0; v < 4; ++v) vols.push_back(unproject_heatmap(grid, cams[v], hms[v]));
  const auto agg = softmax_aggregate(vols);
  ChannelVolume gagg(grid.resolution(), C);
  for (int c = 0; c < C; ++c) {
    std::vector<double> z(agg.channel(c).begin(), agg.channel(c).end());
    for (double& x : z) x = aff.scale[c] * x + aff.bias[c];
    const auto gz = spatial_softmax_3d_vjp(grid, z, opt.tau, gp[c]);
    double gs = 0, gb = 0;
    for (size_t i = 0; i < z.size(); ++i) {
      gagg.channel(c)[i] = gz[i] * aff.scale[c];
      gs += gz[i] * agg.channel(c)[i];
      gb += gz[i];
    }
    EXPECT_NEAR(g.scale[c], gs, 1e-8 * (1 + std::abs(gs)));
    EXPECT_NEAR(g.bias[c], gb, 1e-8 * (1 + std::abs(gb)));
  }
  const auto gvols = softmax_aggregate_vjp(vols, gagg);
  for (int v = 0; v < 4; ++v) {
    const auto gh = unproject_heatmap_vjp(grid, cams[v], hm, hm, gvols[v]);
    for (size_t i = 0; i < gh.values.size(); ++i) {
      EXPECT_NEAR(g.heatmaps[v][i], gh.values[i], 1e-8 * (1 + std::abs(gh.values[i])));
    }
  }
}

TEST(Lifter, ThreadCountDoesNotChangeResults) {
  std::mt19937_64 rng(8);
  const auto cams = testing::ring4();
  // More voxels than one block so the block reduction is exercised.
  const auto grid = build_grid(Vec3::Zero(), 7500, 40);
  const int C = 3;
  std::vector<Heatmap2D> hms;
  for (int v = 0; v < 4; ++v) hms.push_back(random_heatmap(8, 8, C, rng));
  std::vector<std::span<const double>> planes;
  for (const auto& h : hms) planes.emplace_back(h.values);
  VolumetricLifter lifter(grid, cams, 8, 8);
  ASSERT_GT(lifter.active_voxels(), VolumetricLifter::kBlock);
  const auto aff = VolumeAffine::identity(C);
  const std::vector<Vec3> gp(C, Vec3(1, -2, 3));
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto c1 = lifter.forward(planes, C, aff, 0.1);
  const auto g1 = lifter.backward(planes, c1, aff, 0.1, gp);
  omp_set_num_threads(3);
  const auto c3 = lifter.forward(planes, C, aff, 0.1);
  const auto g3 = lifter.backward(planes, c3, aff, 0.1, gp);
  omp_set_num_threads(saved);
  for (int c = 0; c < C; ++c) EXPECT_EQ(c1.points[c], c3.points[c]);
  EXPECT_EQ(g1.heatmaps, g3.heatmaps);
  EXPECT_EQ(g1.scale, g3.scale);
  EXPECT_EQ(g1.bias, g3.bias);
}

}  // namespace
}  // namespace mvkd
