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

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "mvkd/error.hpp"
#include "mvkd/evaluation.hpp"

namespace mvkd {
namespace {

Pose random_pose(std::mt19937_64& rng, int J, double scale = 500.0) {
  std::normal_distribution<double> n(0.0, scale);
  Pose p(J);
  for (auto& x : p) x = Vec3(n(rng), n(rng), n(rng));
  return p;
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

TEST(Regression, IdentityAndScaledMapsRecovered) {
  std::mt19937_64 rng(1);
  std::vector<Pose> X;
  for (int n = 0; n < 40; ++n) X.push_back(random_pose(rng, 4));
  const Eigen::MatrixXd Xm = flatten_poses(X);
  const auto id = fit_linear_regressor(Xm, Xm);
  EXPECT_FALSE(id.rank_deficient);
  EXPECT_LT((id.W - Eigen::MatrixXd::Identity(12, 12)).cwiseAbs().maxCoeff(), 1e-9);
  const auto twice = fit_linear_regressor(Xm, 2.0 * Xm);
  const auto out = twice.apply(X);
  for (size_t n = 0; n < X.size(); ++n) {
    for (int j = 0; j < 4; ++j) EXPECT_LT((out[n][j] - 2.0 * X[n][j]).norm(), 1e-7);
  }
}

TEST(Regression, MatchesNormalEquations) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd X = Eigen::MatrixXd::NullaryExpr(60, 9, [&]() {
    return std::normal_distribution<double>(0, 1)(rng);
  });
  const Eigen::MatrixXd Y = Eigen::MatrixXd::NullaryExpr(60, 6, [&]() {
    return std::normal_distribution<double>(0, 1)(rng);
  });
  const Eigen::MatrixXd oracle = (X.transpose() * X).ldlt().solve(X.transpose() * Y);
  const auto r = fit_linear_regressor(X, Y);
  EXPECT_EQ(r.rank, 9);
  EXPECT_LT((r.W - oracle).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Regression, RankDeficientDesignFlagged) {
  Eigen::MatrixXd X(5, 3);
  X << 1, 2, 3, 2, 4, 6, 1, 0, 1, 3, 2, 5, 0, 1, 1;  // col3 = col1 + col2
  const auto r = fit_linear_regressor(X, X.leftCols(1));
  EXPECT_TRUE(r.rank_deficient);
  EXPECT_EQ(r.rank, 2);
  const auto few = fit_linear_regressor(X.topRows(2), X.topRows(2));
  EXPECT_FALSE(few.warning.empty());
  EXPECT_THROW(fit_linear_regressor(X, X.topRows(3)), ValidationError);
}

TEST(Mpjpe, WorkedExamples) {
  const std::vector<Pose> gt = {{Vec3(0, 0, 0), Vec3(100, 0, 0), Vec3(0, 100, 0)}};
  EXPECT_DOUBLE_EQ(mpjpe(gt, gt), 0.0);
  // A global translation is removed by the mean shift.
  std::vector<Pose> shifted = gt;
  for (auto& x : shifted[0]) x += Vec3(40, -7, 13);
  EXPECT_NEAR(mpjpe(shifted, gt), 0.0, 1e-12);
  EXPECT_NEAR(mpjpe(shifted, gt, {false}), 0.0, 1e-12);
  // One joint off by 15 mm moves the centroid by 5 mm.
  std::vector<Pose> one = gt;
  one[0][1].x() += 15.0;
  const double expect = (10.0 + 5.0 + 5.0) / 3.0;
  EXPECT_NEAR(mpjpe(one, gt), expect, 1e-12);
  const auto pj = mpjpe_per_joint(one, gt);
  EXPECT_NEAR(pj[0], 5.0, 1e-12);
  EXPECT_NEAR(pj[1], 10.0, 1e-12);
}

TEST(Mpjpe, ShapeMismatchThrows) {
  const std::vector<Pose> a = {{Vec3::Zero(), Vec3::Ones()}};
  const std::vector<Pose> b = {{Vec3::Zero()}};
  EXPECT_THROW(mpjpe(a, b), ValidationError);
  EXPECT_THROW(mpjpe(a, {}), ValidationError);
}

TEST(Procrustes, RecoversKnownSimilarity) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose X = random_pose(rng, 6);
    const Mat3 R = random_rotation(rng);
    const double s = 0.5 + trial * 0.1;
    const Vec3 t(10.0 * trial, -3.0, 7.0);
    Pose Y;
    for (const auto& x : X) Y.push_back(s * R * x + t);
    const auto sim = procrustes_align(X, Y);
    EXPECT_NEAR(sim.s, s, 1e-9);
    EXPECT_LT((sim.R - R).norm(), 1e-9);
    EXPECT_LT((sim.t - t).norm(), 1e-6);
    EXPECT_NEAR(pmpjpe({X}, {Y}), 0.0, 1e-6);
  }
}

TEST(Procrustes, NeverReflects) {
  const Pose X = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(0, 0, 0)};
  Pose Y;
  for (const auto& x : X) Y.push_back(Vec3(-x.x(), x.y(), x.z()));
  const auto sim = procrustes_align(X, Y);
  EXPECT_NEAR(sim.R.determinant(), 1.0, 1e-12);
}

TEST(Procrustes, BeatsRandomSimilarities) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  const Pose X = random_pose(rng, 8), Y = random_pose(rng, 8);
  const auto best = procrustes_align(X, Y);
  const double r0 = procrustes_residual(X, Y, best);
  for (int i = 0; i < 2000; ++i) {
    Similarity cand;
    cand.R = random_rotation(rng);
    cand.s = std::exp(0.5 * n(rng)) * best.s;
    cand.t = best.t + 100.0 * Vec3(n(rng), n(rng), n(rng));
    EXPECT_GE(procrustes_residual(X, Y, cand), r0 - 1e-9);
    // Local perturbations of the optimum.
    Similarity near = best;
    near.R = Eigen::AngleAxisd(0.01 * n(rng), Vec3(n(rng), n(rng), n(rng)).normalized()) * best.R;
    near.s *= 1.0 + 0.01 * n(rng);
    near.t += Vec3(n(rng), n(rng), n(rng));
    EXPECT_GE(procrustes_residual(X, Y, near), r0 - 1e-9);
  }
}

TEST(Procrustes, DegenerateSourceThrows) {
  const Pose line = {Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(2, 2, 2)};
  EXPECT_THROW(procrustes_align(line, line), GeometryError);
  EXPECT_THROW(procrustes_align({Vec3::Zero(), Vec3::Ones()}, {Vec3::Zero(), Vec3::Ones()}),
               GeometryError);
}

TEST(Metrics, PmpjpeBoundedByMpjpeAndInvariant) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 30.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Pose> gt, pred;
    for (int f = 0; f < 5; ++f) {
      gt.push_back(random_pose(rng, 7));
      Pose p = gt.back();
      for (auto& x : p) x += Vec3(n(rng), n(rng), n(rng));
      pred.push_back(p);
    }
    const double p = pmpjpe(pred, gt);
    EXPECT_LE(p, mpjpe(pred, gt) + 1e-9);
    // Similarity applied to the prediction leaves PMPJPE unchanged.
    const Mat3 R = random_rotation(rng);
    std::vector<Pose> moved = pred;
    for (auto& pose : moved) {
      for (auto& x : pose) x = 1.7 * R * x + Vec3(5, 6, 7);
    }
    EXPECT_NEAR(pmpjpe(moved, gt), p, 1e-6);
    // Joint permutation applied to both sides leaves both metrics unchanged.
    std::vector<Pose> pg = gt, pp = pred;
    for (size_t f = 0; f < gt.size(); ++f) {
      std::reverse(pg[f].begin(), pg[f].end());
      std::reverse(pp[f].begin(), pp[f].end());
    }
    EXPECT_NEAR(pmpjpe(pp, pg), p, 1e-9);
    EXPECT_NEAR(mpjpe(pp, pg), mpjpe(pred, gt), 1e-9);
  }
}

TEST(Evaluate, PerfectLinearDiscoveryScoresZero) {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd A = Eigen::MatrixXd::NullaryExpr(12, 9, [&]() {
    return std::normal_distribution<double>(0, 1)(rng);
  });
  std::vector<Pose> disc, gt;
  for (int f = 0; f < 50; ++f) {
    disc.push_back(random_pose(rng, 4));
    gt.push_back(unflatten_poses(flatten_poses({disc.back()}) * A)[0]);
  }
  const std::vector<Pose> dtr(disc.begin(), disc.begin() + 30), gtr(gt.begin(), gt.begin() + 30);
  const std::vector<Pose> dte(disc.begin() + 30, disc.end()), gte(gt.begin() + 30, gt.end());
  const auto r = evaluate(dtr, gtr, dte, gte);
  EXPECT_NEAR(r.mpjpe_mm, 0.0, 1e-6);
  EXPECT_NEAR(r.pmpjpe_mm, 0.0, 1e-6);
  EXPECT_EQ(r.per_joint_mm.size(), 3u);
  EXPECT_EQ(r.n_frames, 20);
  const auto j = report_to_json(r);
  EXPECT_EQ(j["n_train_frames"], 30);
  EXPECT_NE(report_table(r, {"a", "b", "c"}).find("PMPJPE"), std::string::npos);
}

}  // namespace
}  // namespace mvkd
