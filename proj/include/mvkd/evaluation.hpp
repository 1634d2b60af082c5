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

#include <Eigen/Dense>

#include "json.hpp"
#include "mvkd/camera.hpp"

namespace mvkd {

using Pose = std::vector<Vec3>;

// Rows are frames, columns x0 y0 z0 x1 ...
Eigen::MatrixXd flatten_poses(const std::vector<Pose>& poses);
std::vector<Pose> unflatten_poses(const Eigen::MatrixXd& m);

// Y ~= X * W with W of shape (3 J_disc) x (3 J_gt) and no intercept.
struct RegressionMap {
  Eigen::MatrixXd W;
  int rank = 0;
  bool rank_deficient = false;
  std::string warning;
  std::vector<Pose> apply(const std::vector<Pose>& disc) const;
};

// Least squares through the SVD pseudoinverse. Singular values below
// 1e-10 * sigma_max are truncated and the result is flagged.
RegressionMap fit_linear_regressor(const Eigen::MatrixXd& disc, const Eigen::MatrixXd& gt);

// Two-layer ReLU network with standardized inputs and outputs, full-batch
// Adam on the mean squared error.
struct MlpOptions {
  int hidden = 50;
  int epochs = 3000;
  double lr = 1e-2;
  uint64_t seed = 0;
};

struct MlpRegressor {
  Eigen::MatrixXd W1, W2;
  Eigen::VectorXd b1, b2;
  Eigen::RowVectorXd x_mean, x_scale, y_mean, y_scale;
  Eigen::MatrixXd predict(const Eigen::MatrixXd& disc) const;
  std::vector<Pose> apply(const std::vector<Pose>& disc) const;
};

MlpRegressor fit_mlp_regressor(const Eigen::MatrixXd& disc, const Eigen::MatrixXd& gt,
                               const MlpOptions& opt = {});

struct MeanShiftOptions {
  // Remove each frame's centroid; false removes one global mean offset.
  bool per_frame = true;
};

// Mean over frames and joints of the Euclidean error after mean-shift removal.
double mpjpe(const std::vector<Pose>& pred, const std::vector<Pose>& gt,
             const MeanShiftOptions& opt = {});
std::vector<double> mpjpe_per_joint(const std::vector<Pose>& pred, const std::vector<Pose>& gt,
                                    const MeanShiftOptions& opt = {});

struct Similarity {
  double s = 1.0;
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  Vec3 apply(const Vec3& x) const { return s * (R * x) + t; }
};

// Minimizes sum_j |s R X_j + t - Y_j|^2 with det R = +1. Throws
// GeometryError for fewer than 3 points or a rank-deficient X.
Similarity procrustes_align(const Pose& X, const Pose& Y, bool with_scale = true);
double procrustes_residual(const Pose& X, const Pose& Y, const Similarity& sim);

double pmpjpe(const std::vector<Pose>& pred, const std::vector<Pose>& gt, bool with_scale = true);

enum class RegressorKind { kLinear, kMlp };

struct EvalOptions {
  RegressorKind regressor = RegressorKind::kLinear;
  MeanShiftOptions mean_shift;
  MlpOptions mlp;
};

struct EvalReport {
  double mpjpe_mm = 0.0;
  double pmpjpe_mm = 0.0;
  double pmpjpe_noscale_mm = 0.0;
  std::vector<double> per_joint_mm;
  int n_frames = 0;
  int n_train = 0;
  std::string regressor = "linear";
  bool rank_deficient = false;
  std::vector<std::string> warnings;
};

// Fits the regressor on the train split, reports on the test split.
EvalReport evaluate(const std::vector<Pose>& disc_train, const std::vector<Pose>& gt_train,
                    const std::vector<Pose>& disc_test, const std::vector<Pose>& gt_test,
                    const EvalOptions& opt = {});

nlohmann::json report_to_json(const EvalReport& r);
std::string report_table(const EvalReport& r, const std::vector<std::string>& joint_names = {});
void write_per_joint_csv(const std::string& path, const EvalReport& r,
                         const std::vector<std::string>& joint_names = {});

}  // namespace mvkd
