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

#include "mvkd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <queue>
#include <random>

#include <Eigen/Geometry>

#include "mvkd/hash.hpp"
#include "mvkd/image_io.hpp"

namespace mvkd {

namespace fs = std::filesystem;
using nlohmann::json;

void SkeletonSpec::validate() const {
  const int n = joints();
  if (n == 0) return;
  std::vector<int> parent_count(n, 0);
  for (const auto& b : bones) {
    if (b.parent < 0 || b.parent >= n || b.child < 0 || b.child >= n || b.parent == b.child) {
      throw ValidationError("skeleton '" + name + "': bone references invalid joint");
    }
    if (!(b.length > 0.0)) throw ValidationError("skeleton '" + name + "': bone length must be > 0");
    ++parent_count[b.child];
  }
  if (parent_count[0] != 0) throw ValidationError("skeleton '" + name + "': root has a parent");
  for (int j = 1; j < n; ++j) {
    if (parent_count[j] != 1) {
      throw ValidationError("skeleton '" + name + "': joint " + joint_names[j] +
                            " must have exactly one parent");
    }
  }
  // n-1 bones with one parent each and a parentless root form a tree iff
  // everything is reachable from the root.
  std::vector<bool> seen(n, false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  while (!q.empty()) {
    const int j = q.front();
    q.pop();
    for (const auto& b : bones) {
      if (b.parent == j && !seen[b.child]) {
        seen[b.child] = true;
        q.push(b.child);
      }
    }
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw ValidationError("skeleton '" + name + "': not a tree (cycle or disconnected joint)");
  }
}

namespace {

Bone bone(int parent, int child, const Vec3& offset, const Vec3& axis, double swing,
          double twist) {
  return {parent, child, offset.norm(), offset.normalized(), axis.normalized(), swing, twist};
}

}  // namespace

SkeletonSpec SkeletonSpec::biped() {
  SkeletonSpec s;
  s.name = "biped";
  s.joint_names = {"head",    "l_shoulder", "r_shoulder", "l_elbow", "r_elbow",
                   "l_hip",   "r_hip",      "l_foot",     "r_foot"};
  const Vec3 x(1, 0, 0), y(0, 1, 0);
  s.bones = {
      bone(0, 1, {-200, 0, -200}, y, 0.10, 0.05),
      bone(0, 2, {200, 0, -200}, y, 0.10, 0.05),
      bone(1, 3, {-60, 0, -320}, x, 0.90, 0.35),
      bone(2, 4, {60, 0, -320}, x, 0.90, 0.35),
      bone(1, 5, {50, 0, -450}, x, 0.12, 0.05),
      bone(2, 6, {-50, 0, -450}, x, 0.12, 0.05),
      bone(5, 7, {0, 0, -850}, x, 0.55, 0.15),
      bone(6, 8, {0, 0, -850}, x, 0.55, 0.15),
  };
  // Rest-pose centroid at the world origin, feet at z = -860.
  s.root_rest = Vec3(0, 0, 640);
  s.root_drift = 250.0;
  s.root_bob = 30.0;
  s.yaw_amplitude = 0.6;
  s.height = 1700.0;
  return s;
}

SkeletonSpec SkeletonSpec::quadruped() {
  SkeletonSpec s;
  s.name = "quadruped";
  s.joint_names = {"spine", "head", "nose", "tail_base", "tail_tip",
                   "fl_foot", "fr_foot", "bl_foot", "br_foot"};
  const Vec3 x(1, 0, 0), y(0, 1, 0), z(0, 0, 1);
  s.bones = {
      bone(0, 1, {0, 70, 10}, z, 0.35, 0.15),
      bone(1, 2, {0, 40, -15}, x, 0.40, 0.10),
      bone(0, 3, {0, -80, -5}, z, 0.30, 0.10),
      bone(3, 4, {0, -90, -20}, z, 0.60, 0.20),
      bone(1, 5, {-25, 5, -45}, x, 0.50, 0.15),
      bone(1, 6, {25, 5, -45}, x, 0.50, 0.15),
      bone(3, 7, {-25, -5, -45}, x, 0.50, 0.15),
      bone(3, 8, {25, -5, -45}, x, 0.50, 0.15),
  };
  s.root_rest = Vec3(0, 0, 22);
  s.root_drift = 60.0;
  s.root_bob = 8.0;
  s.yaw_amplitude = 0.8;
  s.height = 250.0;
  return s;
}

SkeletonSpec SkeletonSpec::preset(const std::string& name) {
  if (name == "biped") return biped();
  if (name == "quadruped") return quadruped();
  throw ValidationError("unknown skeleton preset: " + name);
}

SceneConfig SceneConfig::for_preset(const std::string& preset) {
  SceneConfig c;
  c.preset = preset;
  if (preset == "quadruped") {
    c.volume_side = 1000.0;
    c.camera_distance = 800.0;
    c.camera_elevation_deg = 30.0;
    c.focal = 220.0;
  } else if (preset != "biped") {
    throw ValidationError("unknown skeleton preset: " + preset);
  }
  return c;
}

void to_json(json& j, const SceneConfig& c) {
  j = json{{"preset", c.preset},
           {"views", c.views},
           {"width", c.width},
           {"height", c.height},
           {"frames", c.frames},
           {"trajectories", c.trajectories},
           {"seed", c.seed},
           {"blob_radius", c.blob_radius},
           {"limb_thickness", c.limb_thickness},
           {"noise", c.noise},
           {"volume_side", c.volume_side},
           {"camera_distance", c.camera_distance},
           {"camera_elevation_deg", c.camera_elevation_deg},
           {"focal", c.focal},
           {"motion_amplitude", c.motion_amplitude},
           {"motion_speed", c.motion_speed}};
}

void from_json(const json& j, SceneConfig& c) {
  const json known = SceneConfig{};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ValidationError("config: unknown scene field '" + key + "'");
  }
  SceneConfig d = SceneConfig::for_preset(j.value("preset", std::string("biped")));
  c.preset = d.preset;
  c.views = j.value("views", d.views);
  c.width = j.value("width", d.width);
  c.height = j.value("height", d.height);
  c.frames = j.value("frames", d.frames);
  c.trajectories = j.value("trajectories", d.trajectories);
  c.seed = j.value("seed", d.seed);
  c.blob_radius = j.value("blob_radius", d.blob_radius);
  c.limb_thickness = j.value("limb_thickness", d.limb_thickness);
  c.noise = j.value("noise", d.noise);
  c.volume_side = j.value("volume_side", d.volume_side);
  c.camera_distance = j.value("camera_distance", d.camera_distance);
  c.camera_elevation_deg = j.value("camera_elevation_deg", d.camera_elevation_deg);
  c.focal = j.value("focal", d.focal);
  c.motion_amplitude = j.value("motion_amplitude", d.motion_amplitude);
  c.motion_speed = j.value("motion_speed", d.motion_speed);
}

namespace {

// Two-tone sinusoid that is exactly zero at t = 0.
struct Oscillator {
  double w1, w2, p1, p2;
  double operator()(double t) const {
    return 0.7 * (std::sin(w1 * t + p1) - std::sin(p1)) + 0.3 * (std::sin(w2 * t + p2) - std::sin(p2));
  }
};

Oscillator random_oscillator(std::mt19937_64& rng, double speed) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  return {speed * (0.7 + 0.6 * u(rng)), speed * (1.6 + 0.8 * u(rng)), two_pi * u(rng),
          two_pi * u(rng)};
}

// Bones sorted so that every bone's parent bone comes first.
std::vector<int> topological_bones(const SkeletonSpec& spec, std::vector<int>& parent_bone) {
  parent_bone.assign(spec.bones.size(), -1);
  std::vector<int> bone_into(spec.joints(), -1);
  for (size_t b = 0; b < spec.bones.size(); ++b) bone_into[spec.bones[b].child] = static_cast<int>(b);
  for (size_t b = 0; b < spec.bones.size(); ++b) parent_bone[b] = bone_into[spec.bones[b].parent];
  std::vector<int> order;
  std::vector<bool> done(spec.bones.size(), false);
  while (order.size() < spec.bones.size()) {
    for (size_t b = 0; b < spec.bones.size(); ++b) {
      if (!done[b] && (parent_bone[b] < 0 || done[parent_bone[b]])) {
        done[b] = true;
        order.push_back(static_cast<int>(b));
      }
    }
  }
  return order;
}

bool inside_envelope(const std::vector<Vec3>& joints, double volume_side,
                     const std::vector<CameraModel>* cams) {
  for (const auto& X : joints) {
    if ((X.cwiseAbs().array() > volume_side / 2.0).any()) return false;
    if (cams == nullptr) continue;
    for (const auto& cam : *cams) {
      if (!(depth(cam.P(), X) > 1e-6)) return false;
      const Vec2 p = project(cam.P(), X);
      const double margin = 3.0;
      if (p.x() < margin || p.y() < margin || p.x() > cam.width() - 1 - margin ||
          p.y() > cam.height() - 1 - margin) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace

Trajectory generate_motion(const SkeletonSpec& spec, int frames, uint64_t seed,
                           double volume_side, double amplitude, double speed,
                           const std::vector<CameraModel>* cams) {
  spec.validate();
  if (frames < 1) throw ValidationError("generate_motion: need at least one frame");
  std::vector<int> parent_bone;
  const auto order = topological_bones(spec, parent_bone);

  double amp = amplitude;
  for (int attempt = 0; attempt < 10; ++attempt, amp *= 0.7) {
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), 0x5eedu};
    std::mt19937_64 rng(seq);
    std::vector<Oscillator> swing, twist;
    for (size_t b = 0; b < spec.bones.size(); ++b) {
      swing.push_back(random_oscillator(rng, speed));
      twist.push_back(random_oscillator(rng, speed));
    }
    const Oscillator dx = random_oscillator(rng, 0.3 * speed);
    const Oscillator dy = random_oscillator(rng, 0.3 * speed);
    const Oscillator bob = random_oscillator(rng, 2.0 * speed);
    const Oscillator yaw = random_oscillator(rng, 0.2 * speed);

    Trajectory traj(frames, std::vector<Vec3>(spec.joints()));
    bool ok = true;
    std::vector<Mat3> bone_rot(spec.bones.size());
    for (int t = 0; t < frames && ok; ++t) {
      auto& joints = traj[t];
      const Mat3 R_yaw =
          Eigen::AngleAxisd(amp * spec.yaw_amplitude * yaw(t), Vec3::UnitZ()).toRotationMatrix();
      joints[0] = spec.root_rest +
                  Vec3(amp * spec.root_drift * dx(t), amp * spec.root_drift * dy(t),
                       amp * spec.root_bob * bob(t));
      for (int b : order) {
        const Bone& bn = spec.bones[b];
        const Vec3 secondary = bn.rest_direction.cross(bn.swing_axis).normalized();
        const Mat3 local =
            (Eigen::AngleAxisd(amp * bn.twist_amplitude * twist[b](t), secondary) *
             Eigen::AngleAxisd(amp * bn.swing_amplitude * swing[b](t), bn.swing_axis))
                .toRotationMatrix();
        bone_rot[b] = parent_bone[b] >= 0 ? Mat3(bone_rot[parent_bone[b]] * local) : local;
        joints[bn.child] = joints[bn.parent] + bn.length * (R_yaw * bone_rot[b] * bn.rest_direction);
      }
      ok = inside_envelope(joints, volume_side, cams);
    }
    if (ok) return traj;
  }
  throw ValidationError("generate_motion: joints leave the envelope after 10 retries");
}

namespace {

Vec3 rest_centroid(const SkeletonSpec& spec) {
  const auto rest = generate_motion(spec, 1, 0, 1e12, 0.0);
  Vec3 c = Vec3::Zero();
  for (const auto& p : rest[0]) c += p;
  return c / static_cast<double>(rest[0].size());
}

}  // namespace

std::vector<CameraModel> ring_cameras(const SkeletonSpec& spec, const SceneConfig& cfg) {
  if (cfg.views < 2) throw ValidationError("scene: need at least 2 views");
  const Vec3 target = rest_centroid(spec);
  const double elev = cfg.camera_elevation_deg * std::numbers::pi / 180.0;
  std::vector<CameraModel> cams;
  for (int i = 0; i < cfg.views; ++i) {
    const double az = 2.0 * std::numbers::pi * i / cfg.views + std::numbers::pi / 4.0;
    const Vec3 C = target + cfg.camera_distance * Vec3(std::cos(az) * std::cos(elev),
                                                       std::sin(az) * std::cos(elev),
                                                       std::sin(elev));
    cams.push_back(look_at_camera("view" + std::to_string(i), C, target, cfg.focal, cfg.width,
                                  cfg.height));
  }
  return cams;
}

RenderResult render_view(const CameraModel& cam, const std::vector<Vec3>& joints,
                         const std::vector<Bone>& bones, const SceneConfig& cfg,
                         uint64_t noise_seed) {
  RenderResult out{Frame(cam.height(), cam.width(), 1, 1.0), {}};
  std::vector<std::optional<Vec2>> px(joints.size());
  for (size_t j = 0; j < joints.size(); ++j) {
    if (depth(cam.P(), joints[j]) > 1e-6) {
      px[j] = project(cam.P(), joints[j]);
    } else {
      out.warnings.push_back("joint " + std::to_string(j) + " behind camera " + cam.name() +
                             "; omitted");
    }
  }
  const double r2 = 2.0 * cfg.blob_radius * cfg.blob_radius;
  const double half = cfg.limb_thickness / 2.0 + 0.5;
  for (int y = 0; y < cam.height(); ++y) {
    for (int x = 0; x < cam.width(); ++x) {
      const Vec2 p(x, y);
      double dark = 0.0;
      for (const auto& b : bones) {
        if (!px[b.parent] || !px[b.child]) continue;
        const Vec2 a = *px[b.parent], ab = *px[b.child] - a;
        const double len2 = ab.squaredNorm();
        const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        const double d = (p - a - t * ab).norm();
        dark = std::max(dark, 0.7 * std::clamp(half - d, 0.0, 1.0));
      }
      for (const auto& q : px) {
        if (!q) continue;
        dark = std::max(dark, 0.9 * std::exp(-(p - *q).squaredNorm() / r2));
      }
      out.frame.at(y, x) = 1.0 - dark;
    }
  }
  if (cfg.noise > 0.0) {
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> n(0.0, cfg.noise);
    for (double& v : out.frame.values) v = std::clamp(v + n(rng), 0.0, 1.0);
  }
  return out;
}

std::string frame_filename(int view, int t) {
  return "frames/view" + std::to_string(view) + "_t" + std::to_string(t) + ".png";
}

Manifest generate_dataset(const SkeletonSpec& spec, const SceneConfig& cfg,
                          const std::string& out_dir) {
  spec.validate();
  if (cfg.views < 2) throw ValidationError("scene: need at least 2 views");
  if (cfg.frames < 2) throw ValidationError("scene: need at least 2 frames");
  if (cfg.trajectories < 1 || cfg.frames % cfg.trajectories != 0) {
    throw ValidationError("scene: frames must split evenly into trajectories");
  }
  fs::create_directories(fs::path(out_dir) / "frames");
  const auto cams = ring_cameras(spec, cfg);
  save_cameras((fs::path(out_dir) / "cameras.json").string(), cams);

  Manifest man;
  man.views = cfg.views;
  man.frames = cfg.frames;
  man.width = cfg.width;
  man.height = cfg.height;
  const int per = cfg.frames / cfg.trajectories;
  Trajectory all;
  for (int s = 0; s < cfg.trajectories; ++s) {
    const uint64_t motion_seed = cfg.seed * 1000003ull + static_cast<uint64_t>(s);
    auto traj = generate_motion(spec, per, motion_seed, cfg.volume_side, cfg.motion_amplitude,
                                cfg.motion_speed, &cams);
    man.segments.push_back({s * per, (s + 1) * per});
    all.insert(all.end(), traj.begin(), traj.end());
  }

  json files = json::object();
  std::string concat;
  auto record = [&](const std::string& rel) {
    const std::string h = sha256_file((fs::path(out_dir) / rel).string());
    files[rel] = h;
    concat += rel + ":" + h + "\n";
  };
  record("cameras.json");

  man.frame_files.resize(static_cast<size_t>(cfg.views) * cfg.frames);
  for (int v = 0; v < cfg.views; ++v) {
    for (int t = 0; t < cfg.frames; ++t) {
      auto r = render_view(cams[v], all[t], spec.bones, cfg,
                           cfg.seed * 7919ull + static_cast<uint64_t>(v * cfg.frames + t));
      const std::string rel = frame_filename(v, t);
      write_png((fs::path(out_dir) / rel).string(), r.frame);
      man.frame_files[static_cast<size_t>(v) * cfg.frames + t] = rel;
      record(rel);
    }
  }

  {
    std::ofstream gt(fs::path(out_dir) / "gt_keypoints.jsonl");
    if (!gt) throw IoError("cannot write gt_keypoints.jsonl in " + out_dir);
    for (int t = 0; t < cfg.frames; ++t) {
      json joints = json::array();
      for (const auto& X : all[t]) joints.push_back({X.x(), X.y(), X.z()});
      gt << json{{"t", t}, {"joints", joints}}.dump() << "\n";
    }
  }
  record("gt_keypoints.jsonl");
  man.hash = sha256_hex(concat);

  json segs = json::array();
  for (const auto& s : man.segments) segs.push_back({s.begin, s.end});
  json bones = json::array();
  for (const auto& b : spec.bones) bones.push_back({b.parent, b.child, b.length});
  man.json = json{{"version", 1},
                  {"views", man.views},
                  {"frames", man.frames},
                  {"width", man.width},
                  {"height", man.height},
                  {"segments", segs},
                  {"skeleton", {{"name", spec.name},
                                {"joints", spec.joint_names},
                                {"bones", bones},
                                {"height_mm", spec.height}}},
                  {"scene", cfg},
                  {"files", files},
                  {"hash", man.hash}};
  std::ofstream mf(fs::path(out_dir) / "manifest.json");
  if (!mf) throw IoError("cannot write manifest.json in " + out_dir);
  mf << man.json.dump(2) << "\n";
  return man;
}

}  // namespace mvkd
