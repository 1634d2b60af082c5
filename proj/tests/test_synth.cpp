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

#include <filesystem>

#include <gtest/gtest.h>

#include "mvkd/dataset.hpp"
#include "mvkd/image_io.hpp"
#include "mvkd/synth.hpp"
#include "mvkd/triangulation.hpp"
#include "test_util.hpp"

namespace mvkd {
namespace {

TEST(Skeleton, PresetsAreValidTrees) {
  for (const char* name : {"biped", "quadruped"}) {
    const auto s = SkeletonSpec::preset(name);
    EXPECT_NO_THROW(s.validate());
    EXPECT_EQ(s.joints(), 9);
  }
  auto bad = SkeletonSpec::biped();
  bad.bones.push_back({3, 1, 100.0, Vec3(0, 0, 1), Vec3(1, 0, 0), 0.1, 0.1});
  EXPECT_THROW(bad.validate(), ValidationError);
  auto neg = SkeletonSpec::biped();
  neg.bones[0].length = -1.0;
  EXPECT_THROW(neg.validate(), ValidationError);
}

TEST(Motion, SingleFrameIsRestPose) {
  const auto spec = SkeletonSpec::biped();
  const auto a = generate_motion(spec, 1, 42);
  const auto rest = generate_motion(spec, 1, 7, 7500.0, 0.0);
  ASSERT_EQ(a.size(), 1u);
  for (int j = 0; j < spec.joints(); ++j) EXPECT_LT((a[0][j] - rest[0][j]).norm(), 1e-12);
  EXPECT_EQ(rest[0][0], spec.root_rest);
}

TEST(Motion, BoneLengthsConstantAndDeterministic) {
  for (const char* name : {"biped", "quadruped"}) {
    const auto spec = SkeletonSpec::preset(name);
    const double side = std::string(name) == "biped" ? 7500.0 : 1000.0;
    const auto a = generate_motion(spec, 150, 9, side);
    const auto b = generate_motion(spec, 150, 9, side);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, generate_motion(spec, 150, 10, side));
    for (const auto& frame : a) {
      for (const auto& bone : spec.bones) {
        EXPECT_NEAR((frame[bone.child] - frame[bone.parent]).norm(), bone.length, 1e-9);
      }
      for (const auto& X : frame) EXPECT_TRUE((X.cwiseAbs().array() <= side / 2).all());
    }
  }
}

TEST(Render, BlankWithoutJointsAndDarkestAtIsolatedBlob) {
  const auto cams = testing::ring4();
  SceneConfig cfg;
  const auto blank = render_view(cams[0], {}, {}, cfg);
  for (double v : blank.frame.values) EXPECT_EQ(v, 1.0);
  // One joint projecting onto an exact pixel center.
  const auto cam = look_at_camera("c", Vec3(5000, 0, 0), Vec3(0, 0, 0), 300, 65, 65);
  const auto r = render_view(cam, {Vec3(0, 0, 0)}, {}, cfg);
  double best = 2.0;
  int bx = -1, by = -1;
  for (int y = 0; y < 65; ++y) {
    for (int x = 0; x < 65; ++x) {
      if (r.frame.at(y, x) < best) {
        best = r.frame.at(y, x);
        bx = x;
        by = y;
      }
    }
  }
  EXPECT_EQ(bx, 32);
  EXPECT_EQ(by, 32);
}

TEST(Render, JointBehindCameraOmittedWithWarning) {
  const auto cam = look_at_camera("c", Vec3(5000, 0, 0), Vec3(0, 0, 0), 300, 64, 64);
  SceneConfig cfg;
  const auto r = render_view(cam, {Vec3(0, 0, 0), Vec3(9000, 0, 0)}, {}, cfg);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("behind"), std::string::npos);
}

class SynthDataset : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new std::string(testing::temp_dir("synth"));
    man_ = new Manifest(generate_dataset(SkeletonSpec::biped(), testing::small_scene(), *dir_ + "/a"));
  }
  static void TearDownTestSuite() {
    std::filesystem::remove_all(*dir_);
    delete dir_;
    delete man_;
  }
  static std::string* dir_;
  static Manifest* man_;
};
std::string* SynthDataset::dir_ = nullptr;
Manifest* SynthDataset::man_ = nullptr;

TEST_F(SynthDataset, ManifestListsEveryFrame) {
  const auto sc = testing::small_scene();
  EXPECT_EQ(man_->frame_files.size(), static_cast<size_t>(sc.views * sc.frames));
  for (const auto& f : man_->frame_files) EXPECT_TRUE(std::filesystem::exists(*dir_ + "/a/" + f));
  const auto ds = load_dataset(*dir_ + "/a");
  EXPECT_TRUE(verify_manifest(ds).empty());
  EXPECT_EQ(ds.segments.size(), 2u);
}

TEST_F(SynthDataset, DifferentSeedsDifferentHashes) {
  auto sc = testing::small_scene();
  sc.seed += 1;
  const auto other = generate_dataset(SkeletonSpec::biped(), sc, *dir_ + "/b");
  EXPECT_NE(other.hash, man_->hash);
  // Same seed again reproduces the hash.
  const auto again = generate_dataset(SkeletonSpec::biped(), testing::small_scene(), *dir_ + "/c");
  EXPECT_EQ(again.hash, man_->hash);
}

TEST_F(SynthDataset, GroundTruthReprojectsOntoBlobCenters) {
  // Render one isolated joint per frame position and compare its darkest
  // pixel with the projection of the stored ground truth.
  const auto ds = load_dataset(*dir_ + "/a");
  const auto gt = read_gt_jsonl(*dir_ + "/a/gt_keypoints.jsonl");
  ASSERT_EQ(static_cast<int>(gt.size()), ds.frames);
  const auto sc = testing::small_scene();
  for (int v = 0; v < ds.views; ++v) {
    for (int t : {0, 7, 19}) {
      const Vec3& head = gt[t][0];
      const auto r = render_view(ds.cameras[v], {head}, {}, sc);
      const Vec2 p = project(ds.cameras[v].P(), head);
      double best = 2.0;
      Vec2 arg;
      for (int y = 0; y < r.frame.height; ++y) {
        for (int x = 0; x < r.frame.width; ++x) {
          if (r.frame.at(y, x) < best) {
            best = r.frame.at(y, x);
            arg = Vec2(x, y);
          }
        }
      }
      EXPECT_LE(std::abs(arg.x() - p.x()), 0.5 + 1e-9);
      EXPECT_LE(std::abs(arg.y() - p.y()), 0.5 + 1e-9);
    }
  }
}

TEST_F(SynthDataset, TriangulatingGroundTruthIsExact) {
  const auto ds = load_dataset(*dir_ + "/a");
  const auto gt = read_gt_jsonl(*dir_ + "/a/gt_keypoints.jsonl");
  std::vector<Mat34> Ps;
  for (const auto& c : ds.cameras) Ps.push_back(c.P());
  for (const auto& pose : gt) {
    for (const auto& X : pose) {
      std::vector<Observation> obs;
      for (int v = 0; v < ds.views; ++v) obs.push_back({v, project(Ps[v], X), 1.0});
      EXPECT_LT((triangulate_dlt(Ps, obs).point - X).norm(), 1e-6);
    }
  }
}

TEST(Scene, RejectsBadConfigs) {
  auto sc = testing::small_scene();
  sc.views = 1;
  EXPECT_THROW(generate_dataset(SkeletonSpec::biped(), sc, testing::temp_dir("bad1")), ValidationError);
  sc = testing::small_scene();
  sc.frames = 25;
  EXPECT_THROW(generate_dataset(SkeletonSpec::biped(), sc, testing::temp_dir("bad2")), ValidationError);
}

}  // namespace
}  // namespace mvkd
