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

#include "mvkd/dataset.hpp"

#include <filesystem>
#include <fstream>

#include "mvkd/hash.hpp"
#include "mvkd/image_io.hpp"

namespace mvkd {

namespace fs = std::filesystem;
using nlohmann::json;

std::string Dataset::frame_path(int view, int t) const {
  return (fs::path(dir) / frame_filename(view, t)).string();
}

Frame Dataset::load_frame(int view, int t) const {
  if (view < 0 || view >= views || t < 0 || t >= frames) {
    throw ValidationError("frame index out of range: view " + std::to_string(view) + " t " +
                          std::to_string(t));
  }
  Frame f = to_luma(read_image(frame_path(view, t)));
  f.view_index = view;
  f.timestamp = t;
  return f;
}

int Dataset::segment_of(int t) const {
  for (size_t s = 0; s < segments.size(); ++s) {
    if (t >= segments[s].begin && t < segments[s].end) return static_cast<int>(s);
  }
  throw ValidationError("frame " + std::to_string(t) + " is in no segment");
}

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing file: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace

Dataset load_dataset(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir);
  Dataset ds;
  ds.dir = dir;
  const fs::path cam_path = fs::path(dir) / "cameras.json";
  if (!fs::exists(cam_path)) throw IoError("missing camera file: " + cam_path.string());
  ds.cameras = load_cameras(cam_path.string());
  ds.manifest = read_json_file(fs::path(dir) / "manifest.json");
  try {
    ds.views = ds.manifest.at("views").get<int>();
    ds.frames = ds.manifest.at("frames").get<int>();
    ds.width = ds.manifest.at("width").get<int>();
    ds.height = ds.manifest.at("height").get<int>();
    if (ds.manifest.contains("segments")) {
      for (const auto& s : ds.manifest.at("segments")) {
        ds.segments.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
      }
    } else {
      ds.segments.push_back({0, ds.frames});
    }
  } catch (const json::exception& e) {
    throw ValidationError("manifest.json in " + dir + ": " + e.what());
  }
  if (static_cast<int>(ds.cameras.size()) != ds.views) {
    throw ValidationError("dataset " + dir + ": camera count does not match manifest views");
  }
  return ds;
}

std::vector<std::string> verify_manifest(const Dataset& ds) {
  std::vector<std::string> bad;
  if (!ds.manifest.contains("files")) return bad;
  for (const auto& [rel, h] : ds.manifest.at("files").items()) {
    const fs::path p = fs::path(ds.dir) / rel;
    if (!fs::exists(p) || sha256_file(p.string()) != h.get<std::string>()) bad.push_back(rel);
  }
  return bad;
}

namespace {

template <typename Fn>
void for_each_line(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

Pose read_pose(const json& arr) {
  Pose p;
  for (const auto& x : arr) p.emplace_back(x.at(0).get<double>(), x.at(1).get<double>(), x.at(2).get<double>());
  return p;
}

}  // namespace

std::vector<Pose> read_gt_jsonl(const std::string& path) {
  std::vector<std::pair<int, Pose>> rows;
  for_each_line(path, [&](const json& j) { rows.emplace_back(j.at("t").get<int>(), read_pose(j.at("joints"))); });
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Pose> out;
  for (auto& r : rows) out.push_back(std::move(r.second));
  return out;
}

void write_keypoints_jsonl(const std::string& path, const std::vector<KeypointRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write: " + path);
  for (const auto& r : records) {
    json kp = json::array();
    for (const auto& X : r.keypoints_mm) kp.push_back({X.x(), X.y(), X.z()});
    json edges = json::array();
    for (const auto& e : r.edges) edges.push_back({e.m, e.n, e.w});
    out << json{{"t", r.t}, {"keypoints_mm", kp}, {"edges", edges}}.dump() << "\n";
  }
}

std::vector<KeypointRecord> read_keypoints_jsonl(const std::string& path) {
  std::vector<KeypointRecord> out;
  for_each_line(path, [&](const json& j) {
    KeypointRecord r;
    r.t = j.at("t").get<int>();
    r.keypoints_mm = read_pose(j.at("keypoints_mm"));
    if (j.contains("edges")) {
      for (const auto& e : j.at("edges")) {
        r.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>()});
      }
    }
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<Keypoints2DRecord> read_keypoints2d_jsonl(const std::string& path) {
  std::vector<Keypoints2DRecord> out;
  for_each_line(path, [&](const json& j) {
    Keypoints2DRecord r;
    r.t = j.at("t").get<int>();
    for (const auto& view : j.at("keypoints_px")) {
      std::vector<std::optional<Vec2>> pts;
      for (const auto& p : view) {
        if (p.is_null()) {
          pts.emplace_back();
        } else {
          pts.emplace_back(Vec2(p.at(0).get<double>(), p.at(1).get<double>()));
        }
      }
      r.points.push_back(std::move(pts));
    }
    if (j.contains("confidence")) r.confidence = j.at("confidence").get<std::vector<std::vector<double>>>();
    out.push_back(std::move(r));
  });
  return out;
}

void write_keypoints2d_jsonl(const std::string& path, const std::vector<Keypoints2DRecord>& records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write: " + path);
  for (const auto& r : records) {
    json views = json::array();
    for (const auto& v : r.points) {
      json pts = json::array();
      for (const auto& p : v) pts.push_back(p ? json{p->x(), p->y()} : json(nullptr));
      views.push_back(pts);
    }
    json j{{"t", r.t}, {"keypoints_px", views}};
    if (!r.confidence.empty()) j["confidence"] = r.confidence;
    out << j.dump() << "\n";
  }
}

}  // namespace mvkd
