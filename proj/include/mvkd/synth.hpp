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

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mvkd/camera.hpp"
#include "mvkd/frame.hpp"

namespace mvkd {

struct Bone {
  int parent = 0;
  int child = 0;
  double length = 0.0;     // mm
  Vec3 rest_direction;     // unit vector in the body frame (z up)
  Vec3 swing_axis;         // primary swing axis in the body frame
  double swing_amplitude;  // radians
  double twist_amplitude;  // radians about the secondary axis
};

// Tree-structured skeleton rooted at joint 0.
struct SkeletonSpec {
  std::string name;
  std::vector<std::string> joint_names;
  std::vector<Bone> bones;
  Vec3 root_rest = Vec3::Zero();  // mm
  double root_drift = 0.0;        // horizontal drift amplitude, mm
  double root_bob = 0.0;          // vertical bob amplitude, mm
  double yaw_amplitude = 0.0;     // radians
  double height = 0.0;            // nominal size, mm

  int joints() const { return static_cast<int>(joint_names.size()); }
  // Throws ValidationError on cycles, multiple parents or bad lengths.
  void validate() const;

  // 9-joint biped, 1700 mm tall.
  static SkeletonSpec biped();
  // 9-joint quadruped, roughly 250 mm long.
  static SkeletonSpec quadruped();
  static SkeletonSpec preset(const std::string& name);
};

struct SceneConfig {
  std::string preset = "biped";
  int views = 4;
  int width = 128;
  int height = 128;
  int frames = 200;
  int trajectories = 1;  // frames are split evenly into independent segments
  uint64_t seed = 0;
  double blob_radius = 2.5;     // px
  double limb_thickness = 2.0;  // px
  double noise = 0.0;           // std of additive Gaussian pixel noise
  double volume_side = 7500.0;  // mm
  double camera_distance = 6000.0;
  double camera_elevation_deg = 15.0;
  double focal = 300.0;  // px
  double motion_amplitude = 1.0;
  double motion_speed = 0.05;  // base angular frequency, rad/frame

  // Defaults scaled for the quadruped preset.
  static SceneConfig for_preset(const std::string& preset);
};

void to_json(nlohmann::json& j, const SceneConfig& c);
void from_json(const nlohmann::json& j, SceneConfig& c);

using Trajectory = std::vector<std::vector<Vec3>>;  // [frame][joint]

// Forward kinematics with sinusoidal joint angles and root drift. Bone lengths
// are exact by construction. Retries with smaller amplitude when a joint
// leaves the volume (or, when cams are given, any image); throws after 10.
Trajectory generate_motion(const SkeletonSpec& spec, int frames, uint64_t seed,
                           double volume_side = 7500.0, double amplitude = 1.0,
                           double speed = 0.05, const std::vector<CameraModel>* cams = nullptr);

// Cameras on a ring around the skeleton's rest center, looking at it.
std::vector<CameraModel> ring_cameras(const SkeletonSpec& spec, const SceneConfig& cfg);

struct RenderResult {
  Frame frame;
  std::vector<std::string> warnings;
};

// White background, dark Gaussian blobs at joints and anti-aliased dark
// limbs. Joints behind the camera are omitted with a warning.
RenderResult render_view(const CameraModel& cam, const std::vector<Vec3>& joints,
                         const std::vector<Bone>& bones, const SceneConfig& cfg,
                         uint64_t noise_seed = 0);

struct Segment {
  int begin = 0;
  int end = 0;  // exclusive
};

struct Manifest {
  int views = 0;
  int frames = 0;
  int width = 0;
  int height = 0;
  std::vector<Segment> segments;
  std::vector<std::string> frame_files;  // view-major: [view * frames + t]
  std::string hash;                      // over all files
  nlohmann::json json;
};

std::string frame_filename(int view, int t);

// Writes cameras.json, frames/view{i}_t{t}.png, gt_keypoints.jsonl and
// manifest.json under out_dir.
Manifest generate_dataset(const SkeletonSpec& spec, const SceneConfig& cfg,
                          const std::string& out_dir);

}  // namespace mvkd
