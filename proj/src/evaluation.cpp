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

#include "mvkd/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "mvkd/error.hpp"

namespace mvkd {

Eigen::MatrixXd flatten_poses(const std::vector<Pose>& poses) {
  if (poses.empty()) return {};
  const size_t J = poses[0].size();
  Eigen::MatrixXd m(poses.size(), 3 * J);
  for (size_t n = 0; n < poses.size(); ++n) {
    if (poses[n].size() != J) throw ValidationError("poses: inconsistent joint count");
    for (size_t j = 0; j < J; ++j) m.row(n).segment<3>(3 * j) = poses[n][j].transpose();
  }
  return m;
}

std::vector<Pose> unflatten_poses(const Eigen::MatrixXd& m) {
  if (m.cols() % 3 != 0) throw ValidationError("poses: column count not a multiple of 3");
  std::vector<Pose> out(m.rows(), Pose(m.cols() / 3));
  for (Eigen::Index n = 0; n < m.rows(); ++n) {
    for (Eigen::Index j = 0; j < m.cols() / 3; ++j) out[n][j] = m.row(n).segment<3>(3 * j).transpose();
  }
  return out;
}

std::vector<Pose> RegressionMap::apply(const std::vector<Pose>& disc) const {
  const Eigen::MatrixXd X = flatten_poses(disc);
  if (X.cols() != W.rows()) throw ValidationError("regressor: input joint count mismatch");
  return unflatten_poses(X * W);
}

RegressionMap fit_linear_regressor(const Eigen::MatrixXd& disc, const Eigen::MatrixXd& gt) {
  if (disc.rows() != gt.rows() || disc.rows() == 0) {
    throw ValidationError("regressor: train sets need the same non-zero frame count");
  }
  if (!disc.allFinite() || !gt.allFinite()) throw ValidationError("regressor: non-finite input");
  RegressionMap r;
  if (disc.rows() < disc.cols()) {
    r.warning = "fewer frames (" + std::to_string(disc.rows()) + ") than input dimensions (" +
                std::to_string(disc.cols()) + ")";
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(disc, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double tol = 1e-10 * (sv.size() > 0 ? sv(0) : 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) {
      inv(i) = 1.0 / sv(i);
      ++r.rank;
    }
  }
  r.rank_deficient = r.rank < disc.cols();
  r.W = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose() * gt;
  return r;
}

namespace {

Eigen::RowVectorXd safe_scale(const Eigen::MatrixXd& m, const Eigen::RowVectorXd& mean) {
  Eigen::RowVectorXd s =
      ((m.rowwise() - mean).array().square().colwise().sum() / std::max<Eigen::Index>(1, m.rows()))
          .sqrt();
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (!(s(i) > 1e-12)) s(i) = 1.0;
  }
  return s;
}

}  // namespace

Eigen::MatrixXd MlpRegressor::predict(const Eigen::MatrixXd& disc) const {
  const Eigen::MatrixXd x = (disc.rowwise() - x_mean).array().rowwise() / x_scale.array();
  const Eigen::MatrixXd h = ((x * W1).rowwise() + b1.transpose()).cwiseMax(0.0);
  const Eigen::MatrixXd y = (h * W2).rowwise() + b2.transpose();
  return (y.array().rowwise() * y_scale.array()).rowwise() + y_mean.array();
}

std::vector<Pose> MlpRegressor::apply(const std::vector<Pose>& disc) const {
  return unflatten_poses(predict(flatten_poses(disc)));
}

MlpRegressor fit_mlp_regressor(const Eigen::MatrixXd& disc, const Eigen::MatrixXd& gt,
                               const MlpOptions& opt) {
  if (disc.rows() != gt.rows() || disc.rows() == 0) {
    throw ValidationError("regressor: train sets need the same non-zero frame count");
  }
  MlpRegressor m;
  m.x_mean = disc.colwise().mean();
  m.y_mean = gt.colwise().mean();
  m.x_scale = safe_scale(disc, m.x_mean);
  m.y_scale = safe_scale(gt, m.y_mean);
  const Eigen::MatrixXd X = (disc.rowwise() - m.x_mean).array().rowwise() / m.x_scale.array();
  const Eigen::MatrixXd Y = (gt.rowwise() - m.y_mean).array().rowwise() / m.y_scale.array();
  const Eigen::Index n = X.rows(), din = X.cols(), dout = Y.cols(), hid = opt.hidden;

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto init = [&](Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd w(r, c);
    const double s = std::sqrt(2.0 / static_cast<double>(r));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = s * normal(rng);
    return w;
  };
  m.W1 = init(din, hid);
  m.W2 = init(hid, dout);
  m.b1 = Eigen::VectorXd::Zero(hid);
  m.b2 = Eigen::VectorXd::Zero(dout);

  // Adam moments for W1, b1, W2, b2 as flat arrays.
  std::vector<double*> params = {m.W1.data(), m.b1.data(), m.W2.data(), m.b2.data()};
  std::vector<Eigen::Index> sizes = {m.W1.size(), m.b1.size(), m.W2.size(), m.b2.size()};
  std::vector<Eigen::VectorXd> mom(4), vel(4);
  for (int i = 0; i < 4; ++i) {
    mom[i] = Eigen::VectorXd::Zero(sizes[i]);
    vel[i] = Eigen::VectorXd::Zero(sizes[i]);
  }
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    const Eigen::MatrixXd pre = (X * m.W1).rowwise() + m.b1.transpose();
    const Eigen::MatrixXd h = pre.cwiseMax(0.0);
    const Eigen::MatrixXd out = (h * m.W2).rowwise() + m.b2.transpose();
    const Eigen::MatrixXd dout_m = 2.0 * (out - Y) / static_cast<double>(n * dout);
    const Eigen::MatrixXd gW2 = h.transpose() * dout_m;
    const Eigen::VectorXd gb2 = dout_m.colwise().sum().transpose();
    const Eigen::MatrixXd dh = (dout_m * m.W2.transpose()).array() * (pre.array() > 0.0).cast<double>();
    const Eigen::MatrixXd gW1 = X.transpose() * dh;
    const Eigen::VectorXd gb1 = dh.colwise().sum().transpose();
    const double* grads[4] = {gW1.data(), gb1.data(), gW2.data(), gb2.data()};
    const double bc1 = 1.0 - std::pow(b1, epoch), bc2 = 1.0 - std::pow(b2, epoch);
    for (int i = 0; i < 4; ++i) {
      for (Eigen::Index k = 0; k < sizes[i]; ++k) {
        const double g = grads[i][k];
        mom[i](k) = b1 * mom[i](k) + (1 - b1) * g;
        vel[i](k) = b2 * vel[i](k) + (1 - b2) * g * g;
        params[i][k] -= opt.lr * (mom[i](k) / bc1) / (std::sqrt(vel[i](k) / bc2) + eps);
      }
    }
  }
  return m;
}

namespace {

void check_shapes(const std::vector<Pose>& pred, const std::vector<Pose>& gt) {
  if (pred.size() != gt.size()) throw ValidationError("metrics: frame counts differ");
  for (size_t n = 0; n < pred.size(); ++n) {
    if (pred[n].size() != gt[n].size()) throw ValidationError("metrics: joint counts differ");
  }
  if (pred.empty() || pred[0].empty()) throw ValidationError("metrics: empty input");
}

Vec3 centroid(const Pose& p) {
  Vec3 c = Vec3::Zero();
  for (const auto& x : p) c += x;
  return c / static_cast<double>(p.size());
}

// Per-joint error sums after mean-shift removal.
std::vector<double> shifted_error_sums(const std::vector<Pose>& pred, const std::vector<Pose>& gt,
                                       const MeanShiftOptions& opt) {
  check_shapes(pred, gt);
  const size_t J = gt[0].size();
  Vec3 global = Vec3::Zero();
  if (!opt.per_frame) {
    for (size_t n = 0; n < pred.size(); ++n) global += centroid(pred[n]) - centroid(gt[n]);
    global /= static_cast<double>(pred.size());
  }
  std::vector<double> sums(J, 0.0);
  for (size_t n = 0; n < pred.size(); ++n) {
    const Vec3 shift = opt.per_frame ? Vec3(centroid(pred[n]) - centroid(gt[n])) : global;
    for (size_t j = 0; j < J; ++j) sums[j] += (pred[n][j] - shift - gt[n][j]).norm();
  }
  return sums;
}

}  // namespace

double mpjpe(const std::vector<Pose>& pred, const std::vector<Pose>& gt, const MeanShiftOptions& opt) {
  const auto sums = shifted_error_sums(pred, gt, opt);
  double total = 0.0;
  for (double s : sums) total += s;
  return total / static_cast<double>(sums.size() * pred.size());
}

std::vector<double> mpjpe_per_joint(const std::vector<Pose>& pred, const std::vector<Pose>& gt,
                                    const MeanShiftOptions& opt) {
  auto sums = shifted_error_sums(pred, gt, opt);
  for (double& s : sums) s /= static_cast<double>(pred.size());
  return sums;
}

Similarity procrustes_align(const Pose& X, const Pose& Y, bool with_scale) {
  if (X.size() != Y.size()) throw ValidationError("procrustes: point counts differ");
  if (X.size() < 3) throw GeometryError("procrustes: at least 3 points required");
  const Vec3 mx = centroid(X), my = centroid(Y);
  Mat3 cov = Mat3::Zero();
  double var_x = 0.0;
  Eigen::MatrixXd Xc(X.size(), 3);
  for (size_t j = 0; j < X.size(); ++j) {
    const Vec3 x = X[j] - mx, y = Y[j] - my;
    cov += x * y.transpose();
    var_x += x.squaredNorm();
    Xc.row(j) = x.transpose();
  }
  const Eigen::Vector3d sx = Eigen::JacobiSVD<Eigen::MatrixXd>(Xc).singularValues().head<3>();
  if (!(sx(1) > 1e-9 * std::max(sx(0), 1e-300))) {
    throw GeometryError("procrustes: source points are rank deficient (collinear or coincident)");
  }
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 U = svd.matrixU(), V = svd.matrixV();
  Eigen::Vector3d d(1.0, 1.0, (V * U.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
  Similarity sim;
  sim.R = V * d.asDiagonal() * U.transpose();
  sim.s = with_scale ? svd.singularValues().dot(d) / var_x : 1.0;
  sim.t = my - sim.s * sim.R * mx;
  return sim;
}

double procrustes_residual(const Pose& X, const Pose& Y, const Similarity& sim) {
  double acc = 0.0;
  for (size_t j = 0; j < X.size(); ++j) acc += (sim.apply(X[j]) - Y[j]).squaredNorm();
  return acc;
}

double pmpjpe(const std::vector<Pose>& pred, const std::vector<Pose>& gt, bool with_scale) {
  check_shapes(pred, gt);
  double total = 0.0;
  size_t count = 0;
  for (size_t n = 0; n < pred.size(); ++n) {
    const Similarity sim = procrustes_align(pred[n], gt[n], with_scale);
    for (size_t j = 0; j < pred[n].size(); ++j) total += (sim.apply(pred[n][j]) - gt[n][j]).norm();
    count += pred[n].size();
  }
  return total / static_cast<double>(count);
}

EvalReport evaluate(const std::vector<Pose>& disc_train, const std::vector<Pose>& gt_train,
                    const std::vector<Pose>& disc_test, const std::vector<Pose>& gt_test,
                    const EvalOptions& opt) {
  if (disc_test.size() != gt_test.size() || disc_test.empty()) {
    throw ValidationError("evaluate: test split needs matching non-empty frame sets");
  }
  const Eigen::MatrixXd X = flatten_poses(disc_train);
  const Eigen::MatrixXd Y = flatten_poses(gt_train);
  EvalReport r;
  r.n_train = static_cast<int>(disc_train.size());
  r.n_frames = static_cast<int>(disc_test.size());
  if (X.rows() < X.cols()) {
    r.warnings.push_back("train split has " + std::to_string(X.rows()) + " frames, fewer than 3J = " +
                         std::to_string(X.cols()));
  }
  std::vector<Pose> pred;
  if (opt.regressor == RegressorKind::kLinear) {
    const RegressionMap map = fit_linear_regressor(X, Y);
    r.rank_deficient = map.rank_deficient;
    if (map.rank_deficient) {
      r.warnings.push_back("rank-deficient design (rank " + std::to_string(map.rank) + " of " +
                           std::to_string(X.cols()) + "), truncated SVD used");
    }
    pred = map.apply(disc_test);
  } else {
    r.regressor = "mlp";
    pred = fit_mlp_regressor(X, Y, opt.mlp).apply(disc_test);
  }
  r.mpjpe_mm = mpjpe(pred, gt_test, opt.mean_shift);
  r.per_joint_mm = mpjpe_per_joint(pred, gt_test, opt.mean_shift);
  r.pmpjpe_mm = pmpjpe(pred, gt_test, true);
  r.pmpjpe_noscale_mm = pmpjpe(pred, gt_test, false);
  return r;
}

nlohmann::json report_to_json(const EvalReport& r) {
  return {{"mpjpe_mm", r.mpjpe_mm},
          {"pmpjpe_mm", r.pmpjpe_mm},
          {"pmpjpe_noscale_mm", r.pmpjpe_noscale_mm},
          {"per_joint_mm", r.per_joint_mm},
          {"n_frames", r.n_frames},
          {"n_train_frames", r.n_train},
          {"regressor", r.regressor},
          {"rank_deficient", r.rank_deficient},
          {"warnings", r.warnings}};
}

namespace {

std::string joint_label(const std::vector<std::string>& names, size_t j) {
  return j < names.size() ? names[j] : "joint" + std::to_string(j);
}

}  // namespace

std::string report_table(const EvalReport& r, const std::vector<std::string>& joint_names) {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-18s %10s\n", "metric", "mm");
  out << buf;
  std::snprintf(buf, sizeof(buf), "%-18s %10.2f\n", "MPJPE", r.mpjpe_mm);
  out << buf;
  std::snprintf(buf, sizeof(buf), "%-18s %10.2f\n", "PMPJPE", r.pmpjpe_mm);
  out << buf;
  std::snprintf(buf, sizeof(buf), "%-18s %10.2f\n", "PMPJPE (no scale)", r.pmpjpe_noscale_mm);
  out << buf;
  for (size_t j = 0; j < r.per_joint_mm.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "  %-16s %10.2f\n", joint_label(joint_names, j).c_str(),
                  r.per_joint_mm[j]);
    out << buf;
  }
  out << "frames: " << r.n_frames << " test, " << r.n_train << " train; regressor: " << r.regressor
      << "\n";
  for (const auto& w : r.warnings) out << "warning: " << w << "\n";
  return out.str();
}

void write_per_joint_csv(const std::string& path, const EvalReport& r,
                         const std::vector<std::string>& joint_names) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "joint,name,error_mm\n";
  char buf[64];
  for (size_t j = 0; j < r.per_joint_mm.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%.6f", r.per_joint_mm[j]);
    out << j << "," << joint_label(joint_names, j) << "," << buf << "\n";
  }
}

}  // namespace mvkd
