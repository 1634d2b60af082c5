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

#include "mvkd/camera.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/LU>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "json.hpp"

namespace mvkd {

using nlohmann::json;

void validate_intrinsics(const Mat3& K) {
  if (!K.allFinite()) throw ValidationError("K: non-finite entries");
  if (K(1, 0) != 0.0 || K(2, 0) != 0.0 || K(2, 1) != 0.0) {
    throw ValidationError("K: not upper-triangular");
  }
  if (!(K(0, 0) > 0.0 && K(1, 1) > 0.0 && K(2, 2) > 0.0)) {
    throw ValidationError("K: diagonal not positive");
  }
}

void validate_rotation(const Mat3& R, double tol) {
  if (!R.allFinite()) throw ValidationError("R: non-finite entries");
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > tol) throw ValidationError("R: not orthonormal");
  if (std::abs(R.determinant() - 1.0) > tol) {
    throw ValidationError("R: determinant is not +1");
  }
}

namespace {

void validate_projection(const Mat34& P) {
  if (!P.allFinite()) throw ValidationError("P: non-finite entries");
  Eigen::JacobiSVD<Mat34> svd(P);
  const auto& s = svd.singularValues();
  if (s(0) <= 0.0 || s(2) <= 1e-12 * s(0)) throw ValidationError("P: rank below 3");
}

void validate_size(int width, int height) {
  if (width <= 0 || height <= 0) throw ValidationError("camera: image size must be positive");
}

}  // namespace

CameraModel CameraModel::from_krt(std::string name, const Mat3& K, const Mat3& R,
                                  const Vec3& t, int width, int height) {
  validate_intrinsics(K);
  validate_rotation(R);
  if (!t.allFinite()) throw ValidationError("t: non-finite entries");
  validate_size(width, height);
  CameraModel cam;
  cam.name_ = std::move(name);
  cam.krt_ = Krt{K, R, t};
  cam.P_ = projection_matrix(K, R, t);
  validate_projection(cam.P_);
  cam.width_ = width;
  cam.height_ = height;
  return cam;
}

CameraModel CameraModel::from_projection(std::string name, const Mat34& P, int width,
                                         int height) {
  validate_projection(P);
  validate_size(width, height);
  CameraModel cam;
  cam.name_ = std::move(name);
  cam.P_ = P;
  cam.width_ = width;
  cam.height_ = height;
  return cam;
}

Vec3 CameraModel::center() const {
  Eigen::JacobiSVD<Eigen::Matrix<double, 3, 4>> svd(P_, Eigen::ComputeFullV);
  Eigen::Vector4d c = svd.matrixV().col(3);
  return c.head<3>() / c(3);
}

Mat34 projection_matrix(const Mat3& K, const Mat3& R, const Vec3& t) {
  validate_intrinsics(K);
  validate_rotation(R);
  if (!t.allFinite()) throw ValidationError("t: non-finite entries");
  Mat34 Rt;
  Rt.leftCols<3>() = R;
  Rt.col(3) = t;
  return K * Rt;
}

Mat34 projection_matrix(const CameraModel& cam) { return cam.P(); }

double depth(const Mat34& P, const Vec3& X, const ProjectOptions& opt) {
  const double w = P.row(2).head<3>().dot(X) + P(2, 3);
  return opt.negative_depth_in_front ? -w : w;
}

Vec2 project(const Mat34& P, const Vec3& X, const ProjectOptions& opt) {
  const Eigen::Vector3d x = P.leftCols<3>() * X + P.col(3);
  if (!(std::abs(x(2)) > opt.eps_w)) throw GeometryError("point at camera plane");
  return {x(0) / x(2), x(1) / x(2)};
}

std::vector<ProjectResult> project_batch(const Mat34& P, std::span<const Vec3> points,
                                         const ProjectOptions& opt) {
  std::vector<ProjectResult> out(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    try {
      out[i].point = project(P, points[i], opt);
    } catch (const GeometryError& e) {
      out[i].error = e.what();
    }
  }
  return out;
}

namespace {

template <int Rows, int Cols>
Eigen::Matrix<double, Rows, Cols> read_matrix(const json& j, const char* key,
                                              const std::string& who) {
  if (!j.contains(key)) throw ValidationError(who + ": missing field '" + key + "'");
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.size() != static_cast<size_t>(Rows * Cols)) {
    throw ValidationError(who + ": field '" + key + "' must have " +
                          std::to_string(Rows * Cols) + " numbers");
  }
  Eigen::Matrix<double, Rows, Cols> m;
  for (int r = 0; r < Rows; ++r) {
    for (int c = 0; c < Cols; ++c) m(r, c) = arr.at(r * Cols + c).get<double>();
  }
  return m;
}

template <typename M>
json flat(const M& m) {
  json arr = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  }
  return arr;
}

}  // namespace

std::vector<CameraModel> parse_cameras(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("camera file: ") + e.what());
  }
  if (!doc.is_array()) throw ValidationError("camera file: top level must be an array");
  std::vector<CameraModel> cams;
  for (size_t i = 0; i < doc.size(); ++i) {
    const auto& j = doc[i];
    const std::string name = j.value("name", "cam" + std::to_string(i));
    const std::string who = "camera '" + name + "'";
    if (!j.contains("width") || !j.contains("height")) {
      throw ValidationError(who + ": missing width/height");
    }
    const int w = j.at("width").get<int>();
    const int h = j.at("height").get<int>();
    if (j.contains("P")) {
      cams.push_back(CameraModel::from_projection(name, read_matrix<3, 4>(j, "P", who), w, h));
    } else {
      cams.push_back(CameraModel::from_krt(name, read_matrix<3, 3>(j, "K", who),
                                           read_matrix<3, 3>(j, "R", who),
                                           read_matrix<3, 1>(j, "t", who), w, h));
    }
  }
  return cams;
}

std::vector<CameraModel> load_cameras(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open camera file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_cameras(ss.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::string cameras_to_json(const std::vector<CameraModel>& cams) {
  json doc = json::array();
  for (const auto& cam : cams) {
    json j;
    j["name"] = cam.name();
    if (cam.has_krt()) {
      j["K"] = flat(cam.K());
      j["R"] = flat(cam.R());
      j["t"] = flat(cam.t());
    } else {
      j["P"] = flat(cam.P());
    }
    j["width"] = cam.width();
    j["height"] = cam.height();
    doc.push_back(j);
  }
  return doc.dump(2);
}

void save_cameras(const std::string& path, const std::vector<CameraModel>& cams) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write camera file: " + path);
  out << cameras_to_json(cams) << "\n";
}

std::vector<Mat34> projection_matrices(const std::vector<CameraModel>& cams) {
  std::vector<Mat34> out;
  out.reserve(cams.size());
  for (const auto& c : cams) out.push_back(c.P());
  return out;
}

CameraModel look_at_camera(std::string name, const Vec3& eye, const Vec3& target, double focal,
                           int width, int height) {
  const Vec3 zc = (target - eye).normalized();
  Vec3 up = Vec3::UnitZ();
  if (std::abs(zc.dot(up)) > 0.999) up = Vec3::UnitY();
  const Vec3 xc = zc.cross(up).normalized();
  const Vec3 yc = zc.cross(xc);
  Mat3 R;
  R.row(0) = xc.transpose();
  R.row(1) = yc.transpose();
  R.row(2) = zc.transpose();
  Mat3 K = Mat3::Identity();
  K(0, 0) = K(1, 1) = focal;
  K(0, 2) = (width - 1) / 2.0;
  K(1, 2) = (height - 1) / 2.0;
  return CameraModel::from_krt(std::move(name), K, R, -R * eye, width, height);
}

}  // namespace mvkd
