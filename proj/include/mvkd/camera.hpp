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
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "mvkd/error.hpp"

namespace mvkd {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

struct ProjectOptions {
  // |w| at or below this is treated as a point on the camera plane.
  double eps_w = 1e-9;
  // Some datasets store cameras looking down -z; flip to accept them.
  bool negative_depth_in_front = false;
};

// Pinhole camera. Either (K, R, t) is given and P is derived, or P is given
// directly; P is the canonical form used everywhere downstream.
class CameraModel {
 public:
  CameraModel() = default;

  // Validates K, R and the rank of the resulting P.
  static CameraModel from_krt(std::string name, const Mat3& K, const Mat3& R,
                              const Vec3& t, int width, int height);
  static CameraModel from_projection(std::string name, const Mat34& P, int width,
                                     int height);

  const std::string& name() const { return name_; }
  const Mat34& P() const { return P_; }
  int width() const { return width_; }
  int height() const { return height_; }
  bool has_krt() const { return krt_.has_value(); }
  const Mat3& K() const { return krt_->K; }
  const Mat3& R() const { return krt_->R; }
  const Vec3& t() const { return krt_->t; }

  // Camera center in world coordinates (right null vector of P).
  Vec3 center() const;

 private:
  struct Krt {
    Mat3 K;
    Mat3 R;
    Vec3 t;
  };
  std::string name_;
  Mat34 P_ = Mat34::Zero();
  std::optional<Krt> krt_;
  int width_ = 0;
  int height_ = 0;
};

// Throws ValidationError naming the failed check.
void validate_intrinsics(const Mat3& K);
void validate_rotation(const Mat3& R, double tol = 1e-6);

Mat34 projection_matrix(const Mat3& K, const Mat3& R, const Vec3& t);
Mat34 projection_matrix(const CameraModel& cam);

// Homogeneous depth row3 . (X, 1), sign-corrected so that positive means in
// front of the camera.
double depth(const Mat34& P, const Vec3& X, const ProjectOptions& opt = {});

// Throws GeometryError("point at camera plane") when |w| <= eps_w.
Vec2 project(const Mat34& P, const Vec3& X, const ProjectOptions& opt = {});

// Per-point result of a batch projection. Failures do not abort the batch.
struct ProjectResult {
  std::optional<Vec2> point;
  std::string error;
  bool ok() const { return point.has_value(); }
};
std::vector<ProjectResult> project_batch(const Mat34& P, std::span<const Vec3> points,
                                         const ProjectOptions& opt = {});

// Camera file: JSON array of {"name","K","R","t","width","height"} or
// {"name","P","width","height"}; matrices row-major, mm and pixels.
std::vector<CameraModel> load_cameras(const std::string& path);
std::vector<CameraModel> parse_cameras(const std::string& json_text);
void save_cameras(const std::string& path, const std::vector<CameraModel>& cams);
std::string cameras_to_json(const std::vector<CameraModel>& cams);

// Pinhole camera at eye looking at target with image y pointing down and the
// principal point at the image center.
CameraModel look_at_camera(std::string name, const Vec3& eye, const Vec3& target, double focal,
                           int width, int height);

std::vector<Mat34> projection_matrices(const std::vector<CameraModel>& cams);

}  // namespace mvkd
