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

#include "mvkd/triangulation.hpp"

#include <cmath>
#include <set>
#include <vector>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace mvkd {

Triangulation triangulate_dlt(std::span<const Mat34> cams, std::span<const Observation> obs) {
  std::set<int> views;
  for (const auto& o : obs) {
    if (o.view_index < 0 || o.view_index >= static_cast<int>(cams.size())) {
      throw ValidationError("observation references invalid view " +
                            std::to_string(o.view_index));
    }
    if (!(o.weight >= 0.0)) throw ValidationError("observation weight must be >= 0");
    if (!o.point2d.allFinite()) throw ValidationError("observation is not finite");
    if (o.weight > 0.0) views.insert(o.view_index);
  }
  if (views.size() < 2) throw GeometryError("underdetermined: need observations from >= 2 views");

  // Condition the world frame on the observing cameras: origin at the
  // centroid of their centers, unit mean distance. Rigid motions of the
  // world then act on the rows as rotations, which keep row norms.
  Vec3 centroid = Vec3::Zero();
  std::vector<Vec3> centers;
  for (int v : views) {
    const Mat34& P = cams[v];
    const Vec3 c = -P.leftCols<3>().fullPivLu().solve(P.col(3));
    centers.push_back(c.allFinite() ? c : Vec3::Zero());
    centroid += centers.back();
  }
  centroid /= static_cast<double>(centers.size());
  double scale = 0.0;
  for (const auto& c : centers) scale += (c - centroid).norm();
  scale /= static_cast<double>(centers.size());
  if (!(scale > 1e-9)) scale = 1.0;
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  T.topLeftCorner<3, 3>() *= scale;
  T.topRightCorner<3, 1>() = centroid;

  Eigen::MatrixXd A(2 * obs.size(), 4);
  for (size_t i = 0; i < obs.size(); ++i) {
    const Mat34 P = cams[obs[i].view_index] * T;
    const Eigen::RowVector4d r0 = obs[i].point2d.x() * P.row(2) - P.row(0);
    const Eigen::RowVector4d r1 = obs[i].point2d.y() * P.row(2) - P.row(1);
    const double n0 = r0.norm();
    const double n1 = r1.norm();
    A.row(2 * i) = n0 > 0.0 ? Eigen::RowVector4d(obs[i].weight * r0 / n0) : r0;
    A.row(2 * i + 1) = n1 > 0.0 ? Eigen::RowVector4d(obs[i].weight * r1 / n1) : r1;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::Vector4d s = svd.singularValues().head<4>();
  const Eigen::Vector4d X = T * svd.matrixV().col(3);
  if (std::abs(X(3)) < 1e-300) throw GeometryError("triangulated point at infinity");

  Triangulation out;
  out.point = X.head<3>() / X(3);
  out.singular_ratio = s(2) > 0.0 ? s(3) / s(2) : 1.0;
  // A rank-2 system leaves a whole ray of solutions.
  if (s(2) <= 1e-9 * s(0)) out.singular_ratio = 1.0;
  if (out.singular_ratio > kDegenerateSingularRatio) {
    out.degenerate = true;
    out.warning = "degenerate geometry: singular value ratio " + std::to_string(out.singular_ratio);
  }
  return out;
}

double reprojection_error(std::span<const Mat34> cams, const Vec3& X,
                          std::span<const Observation> obs, const ProjectOptions& opt) {
  if (obs.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& o : obs) {
    if (o.view_index < 0 || o.view_index >= static_cast<int>(cams.size())) {
      throw ValidationError("observation references invalid view " +
                            std::to_string(o.view_index));
    }
    sum += (project(cams[o.view_index], X, opt) - o.point2d).norm();
  }
  return sum / static_cast<double>(obs.size());
}

}  // namespace mvkd
