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

#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "mvkd/camera.hpp"
#include "mvkd/frame.hpp"
#include "mvkd/synth.hpp"

namespace mvkd {

// A dataset directory: manifest.json, cameras.json, frames/ and optionally
// gt_keypoints.jsonl.
struct Dataset {
  std::string dir;
  std::vector<CameraModel> cameras;
  int views = 0;
  int frames = 0;
  int width = 0;
  int height = 0;
  std::vector<Segment> segments;
  nlohmann::json manifest;

  std::string frame_path(int view, int t) const;
  Frame load_frame(int view, int t) const;
  // Segment index containing frame t.
  int segment_of(int t) const;
};

Dataset load_dataset(const std::string& dir);

// Checks every file hash listed in the manifest; returns mismatching paths.
std::vector<std::string> verify_manifest(const Dataset& ds);

using Pose = std::vector<Vec3>;

std::vector<Pose> read_gt_jsonl(const std::string& path);

struct EdgeRecord {
  int m = 0;
  int n = 0;
  double w = 0.0;
};

// One line of the keypoint JSONL contract shared by infer, triangulate and
// eval: {"t": int, "keypoints_mm": [[x,y,z],...], "edges": [[m,n,w],...]}.
struct KeypointRecord {
  int t = 0;
  Pose keypoints_mm;
  std::vector<EdgeRecord> edges;
};

void write_keypoints_jsonl(const std::string& path, const std::vector<KeypointRecord>& records);
std::vector<KeypointRecord> read_keypoints_jsonl(const std::string& path);

// 2D keypoint input for triangulation, one line per frame:
// {"t": int, "keypoints_px": [view][joint] -> [u,v] or null,
//  "confidence": optional, same shape with scalar entries}.
struct Keypoints2DRecord {
  int t = 0;
  std::vector<std::vector<std::optional<Vec2>>> points;
  std::vector<std::vector<double>> confidence;  // empty = uniform
};

std::vector<Keypoints2DRecord> read_keypoints2d_jsonl(const std::string& path);
void write_keypoints2d_jsonl(const std::string& path, const std::vector<Keypoints2DRecord>& records);

}  // namespace mvkd
