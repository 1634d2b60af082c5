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

#include "mvkd/edge_render.hpp"

namespace mvkd {
namespace {

TEST(SegmentDistance, Examples) {
  EXPECT_DOUBLE_EQ(point_segment_distance(Vec2(0.5, 0.5), Vec2(0, 0), Vec2(1, 1)), 0.0);
  EXPECT_DOUBLE_EQ(point_segment_distance(Vec2(0, 1), Vec2(-1, 0), Vec2(1, 0)), 1.0);
  EXPECT_DOUBLE_EQ(point_segment_distance(Vec2(3, 4), Vec2(0, 0), Vec2(0, 0)), 5.0);
  // Beyond an endpoint the distance is to that endpoint, not the line.
  EXPECT_DOUBLE_EQ(point_segment_distance(Vec2(5, 4), Vec2(-1, 0), Vec2(2, 0)), 5.0);
}

TEST(RenderEdge, Examples) {
  EdgeConfig cfg;
  cfg.width = cfg.height = 64;
  cfg.sigma = 0.05;
  // Horizontal segment through the row of pixel centers y = 31.5/64.
  const double yc = pixel_center(0, 31, cfg).y();
  const auto m = render_edge(Vec2(0.2, yc), Vec2(0.8, yc), cfg);
  EXPECT_DOUBLE_EQ(m.at(31, 32), 1.0);
  // Endpoint at a pixel center; a pixel center at distance exactly sigma.
  const Vec2 a = pixel_center(10, 10, cfg);
  const double s = 2.0 / 64.0;
  cfg.sigma = s;
  const auto m2 = render_edge(a, a, cfg);
  EXPECT_NEAR(m2.at(10, 12), std::exp(-1.0), 1e-12);
  EXPECT_NEAR(std::exp(-1.0), 0.3679, 1e-4);
  cfg.sigma = s / 10.0;
  EXPECT_LT(render_edge(a, a, cfg).at(10, 12), 1e-40);
}

TEST(RenderEdge, SwapInvariant) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  EdgeConfig cfg;
  for (int i = 0; i < 20; ++i) {
    const Vec2 a(u(rng), u(rng)), b(u(rng), u(rng));
    const auto m1 = render_edge(a, b, cfg), m2 = render_edge(b, a, cfg);
    for (size_t k = 0; k < m1.values.size(); ++k) EXPECT_NEAR(m1.values[k], m2.values[k], 1e-12);
  }
}

TEST(AggregateEdges, Examples) {
  EdgeConfig cfg;
  const std::vector<Vec2> kp = {Vec2(0.2, 0.3), Vec2(0.7, 0.6), Vec2(0.4, 0.8)};
  EdgeWeights w(3, -0.5);
  w.set(0, 2, 0.0);
  for (double v : aggregate_edges(kp, w, cfg).values) EXPECT_EQ(v, 0.0);
  w.set(0, 1, 2.0);
  const auto one = aggregate_edges(kp, w, cfg);
  const auto ref = render_edge(kp[0], kp[1], cfg);
  for (size_t i = 0; i < ref.values.size(); ++i) EXPECT_NEAR(one.values[i], 2.0 * ref.values[i], 1e-15);
  const std::vector<Vec2> single = {Vec2(0.5, 0.5)};
  EXPECT_THROW(aggregate_edges(single, EdgeWeights(1, 0.1), cfg), ValidationError);
}

TEST(AggregateEdges, TwoPassLoopOracle) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0), wd(-0.5, 2.0);
  EdgeConfig cfg;
  cfg.sigma = 0.05;
  for (int trial = 0; trial < 10; ++trial) {
    const int J = 5;
    std::vector<Vec2> kp;
    for (int j = 0; j < J; ++j) kp.emplace_back(u(rng), u(rng));
    EdgeWeights w(J, 0.0);
    for (double& v : w.values()) v = wd(rng);
    const auto agg = aggregate_edges_traced(kp, w, cfg);
    // Pass 1 renders every pair; pass 2 takes the pixelwise max.
    std::vector<EdgeMap> maps;
    for (size_t e = 0; e < w.pairs(); ++e) {
      const auto [m, n] = w.pair(e);
      maps.push_back(render_edge(kp[m], kp[n], cfg));
    }
    for (size_t p = 0; p < agg.map.values.size(); ++p) {
      double best = 0.0;
      for (size_t e = 0; e < w.pairs(); ++e) {
        best = std::max(best, std::max(0.0, w.values()[e]) * maps[e].values[p]);
      }
      EXPECT_NEAR(agg.map.values[p], best, 1e-15);
    }
  }
}

TEST(AggregateEdges, TiesGoToLowestPair) {
  EdgeConfig cfg;
  // Pairs (0,1) and (2,3) are the same segment.
  const std::vector<Vec2> kp = {Vec2(0.3, 0.3), Vec2(0.7, 0.5), Vec2(0.3, 0.3), Vec2(0.7, 0.5)};
  EdgeWeights w(4, 0.0);
  w.set(0, 1, 1.0);
  w.set(2, 3, 1.0);
  const auto agg = aggregate_edges_traced(kp, w, cfg);
  const size_t lo = w.pair_index(0, 1);
  for (size_t p = 0; p < agg.winner.size(); ++p) {
    if (agg.map.values[p] > 0) EXPECT_EQ(agg.winner[p], static_cast<int>(lo));
  }
}

TEST(AggregateEdges, MonotoneInWeights) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0), wd(-0.5, 1.5);
  EdgeConfig cfg;
  std::vector<Vec2> kp;
  for (int j = 0; j < 6; ++j) kp.emplace_back(u(rng), u(rng));
  EdgeWeights w(6, 0.0);
  for (double& v : w.values()) v = wd(rng);
  const auto base = aggregate_edges(kp, w, cfg);
  for (size_t e = 0; e < w.pairs(); ++e) {
    EdgeWeights up = w;
    up.values()[e] += 0.3;
    const auto m = aggregate_edges(kp, up, cfg);
    for (size_t p = 0; p < m.values.size(); ++p) EXPECT_GE(m.values[p], base.values[p]);
  }
}

TEST(AggregateEdges, IntegerShiftEquivariance) {
  EdgeConfig cfg;
  const std::vector<Vec2> kp = {Vec2(0.3, 0.3), Vec2(0.5, 0.45), Vec2(0.35, 0.5)};
  EdgeWeights w(3, 0.1);
  const int dx = 5, dy = 3;
  std::vector<Vec2> shifted;
  for (const auto& p : kp) shifted.push_back(p + Vec2(double(dx) / cfg.width, double(dy) / cfg.height));
  const auto a = aggregate_edges(kp, w, cfg), b = aggregate_edges(shifted, w, cfg);
  for (int y = 0; y + dy < cfg.height; ++y) {
    for (int x = 0; x + dx < cfg.width; ++x) EXPECT_NEAR(b.at(y + dy, x + dx), a.at(y, x), 1e-12);
  }
}

TEST(ActiveEdges, Examples) {
  EdgeWeights w(15, kEdgeWeightInit);
  EXPECT_EQ(active_edges(w).size(), 105u);
  EdgeWeights off(15, -1.0);
  EXPECT_TRUE(active_edges(off).empty());
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  for (double& v : w.values()) v = n(rng);
  std::vector<std::pair<int, int>> expect;
  for (int m = 0; m < 15; ++m) {
    for (int k = m + 1; k < 15; ++k) {
      if (w(m, k) > 0) expect.emplace_back(m, k);
    }
  }
  EXPECT_EQ(active_edges(w), expect);
}

TEST(EdgeWeights, SymmetricIndexing) {
  EdgeWeights w(7, 0.0);
  for (int m = 0; m < 7; ++m) {
    for (int n = 0; n < 7; ++n) {
      if (m == n) continue;
      EXPECT_EQ(w.pair_index(m, n), w.pair_index(n, m));
      const auto [a, b] = w.pair(w.pair_index(m, n));
      EXPECT_EQ(a, std::min(m, n));
      EXPECT_EQ(b, std::max(m, n));
    }
  }
  w.set(4, 2, 3.0);
  EXPECT_EQ(w(2, 4), 3.0);
  EXPECT_THROW(w.pair_index(3, 3), ValidationError);
}

}  // namespace
}  // namespace mvkd
