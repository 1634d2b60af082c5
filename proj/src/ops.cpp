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

#include "mvkd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "mvkd/error.hpp"

namespace mvkd::ops {

std::vector<Vec3> as_points3(std::span<const double> flat) {
  std::vector<Vec3> out(flat.size() / 3);
  for (size_t i = 0; i < out.size(); ++i) out[i] = Vec3(flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]);
  return out;
}

std::vector<Vec2> as_points2(std::span<const double> flat) {
  std::vector<Vec2> out(flat.size() / 2);
  for (size_t i = 0; i < out.size(); ++i) out[i] = Vec2(flat[2 * i], flat[2 * i + 1]);
  return out;
}

namespace {

void add_points(std::span<double> dst, std::span<const Vec3> g) {
  for (size_t i = 0; i < g.size(); ++i) {
    dst[3 * i] += g[i].x();
    dst[3 * i + 1] += g[i].y();
    dst[3 * i + 2] += g[i].z();
  }
}

}  // namespace

std::vector<double> softmax_planes(std::span<const double> logits, size_t plane) {
  if (plane == 0 || logits.size() % plane != 0) throw ValidationError("softmax2d: bad plane size");
  std::vector<double> out(logits.size());
  for (size_t off = 0; off < logits.size(); off += plane) {
    const double m = *std::max_element(logits.begin() + off, logits.begin() + off + plane);
    double z = 0.0;
    for (size_t i = off; i < off + plane; ++i) {
      out[i] = std::exp(logits[i] - m);
      z += out[i];
    }
    for (size_t i = off; i < off + plane; ++i) out[i] /= z;
  }
  return out;
}

Tape::Id softmax2d(Tape& tape, Tape::Id logits, size_t plane) {
  auto value = softmax_planes(tape.value(logits), plane);
  return tape.record("softmax2d", std::move(value), {logits}, [logits, plane](Tape& t, Tape::Id self) {
    auto p = t.value(self);
    auto g = t.grad(self);
    auto dx = t.grad(logits);
    for (size_t off = 0; off < p.size(); off += plane) {
      double dot = 0.0;
      for (size_t i = off; i < off + plane; ++i) dot += p[i] * g[i];
      for (size_t i = off; i < off + plane; ++i) dx[i] += p[i] * (g[i] - dot);
    }
  });
}

Tape::Id lift(Tape& tape, const VolumetricLifter& lifter, std::span<const Tape::Id> heatmaps,
              int channels, Tape::Id scale, Tape::Id bias, double tau) {
  if (static_cast<int>(heatmaps.size()) != lifter.views()) {
    throw ValidationError("lift: one heatmap stack per view required");
  }
  auto affine = std::make_shared<VolumeAffine>(VolumeAffine::identity(channels));
  if (scale >= 0) affine->scale.assign(tape.value(scale).begin(), tape.value(scale).end());
  if (bias >= 0) affine->bias.assign(tape.value(bias).begin(), tape.value(bias).end());
  std::vector<std::span<const double>> planes;
  for (Tape::Id h : heatmaps) planes.push_back(tape.value(h));
  auto cache = std::make_shared<VolumetricLifter::Cache>(lifter.forward(planes, channels, *affine, tau));
  std::vector<double> value(3 * channels);
  for (int c = 0; c < channels; ++c) {
    for (int k = 0; k < 3; ++k) value[3 * c + k] = cache->points[c](k);
  }
  std::vector<Tape::Id> inputs(heatmaps.begin(), heatmaps.end());
  if (scale >= 0) inputs.push_back(scale);
  if (bias >= 0) inputs.push_back(bias);
  std::vector<Tape::Id> hm(heatmaps.begin(), heatmaps.end());
  return tape.record("lift", std::move(value), inputs,
                     [&lifter, hm, channels, scale, bias, tau, affine, cache](Tape& t, Tape::Id self) {
                       std::vector<std::span<const double>> planes;
                       for (Tape::Id h : hm) planes.push_back(t.value(h));
                       const auto dU = as_points3(t.grad(self));
                       auto g = lifter.backward(planes, *cache, *affine, tau, dU);
                       for (size_t v = 0; v < hm.size(); ++v) {
                         auto dst = t.grad(hm[v]);
                         for (size_t i = 0; i < dst.size(); ++i) dst[i] += g.heatmaps[v][i];
                       }
                       if (scale >= 0) {
                         auto d = t.grad(scale);
                         for (int c = 0; c < channels; ++c) d[c] += g.scale[c];
                       }
                       if (bias >= 0) {
                         auto d = t.grad(bias);
                         for (int c = 0; c < channels; ++c) d[c] += g.bias[c];
                       }
                     });
}

Tape::Id project(Tape& tape, Tape::Id points, const Mat34& P, int image_w, int image_h,
                 const ProjectOptions& opt) {
  const auto X = as_points3(tape.value(points));
  std::vector<double> value(2 * X.size());
  for (size_t j = 0; j < X.size(); ++j) {
    const Vec2 px = mvkd::project(P, X[j], opt);
    const Vec2 n = normalize_pixel(px, image_w, image_h);
    value[2 * j] = n.x();
    value[2 * j + 1] = n.y();
  }
  return tape.record("project", std::move(value), {points},
                     [points, P, image_w, image_h](Tape& t, Tape::Id self) {
                       const auto X = as_points3(t.value(points));
                       auto g = t.grad(self);
                       auto dX = t.grad(points);
                       for (size_t j = 0; j < X.size(); ++j) {
                         const Eigen::Vector3d x = P.leftCols<3>() * X[j] + P.col(3);
                         const double u = x(0) / x(2), v = x(1) / x(2);
                         const Vec3 du = (P.row(0).head<3>() - u * P.row(2).head<3>()).transpose() / x(2);
                         const Vec3 dv = (P.row(1).head<3>() - v * P.row(2).head<3>()).transpose() / x(2);
                         const Vec3 d = du * (g[2 * j] / image_w) + dv * (g[2 * j + 1] / image_h);
                         for (int k = 0; k < 3; ++k) dX[3 * j + k] += d(k);
                       }
                     });
}

Tape::Id edges(Tape& tape, Tape::Id keypoints, Tape::Id weights, int joints,
               const EdgeConfig& cfg) {
  EdgeWeights w(joints, 0.0);
  const auto wv = tape.value(weights);
  if (wv.size() != w.pairs()) throw ValidationError("edges: weight count mismatch");
  std::copy(wv.begin(), wv.end(), w.values().begin());
  const auto kp = as_points2(tape.value(keypoints));
  if (static_cast<int>(kp.size()) != joints) throw ValidationError("edges: keypoint count mismatch");
  auto agg = std::make_shared<EdgeAggregate>(aggregate_edges_traced(kp, w, cfg));
  std::vector<double> value = agg->map.values;
  return tape.record("edges", std::move(value), {keypoints, weights},
                     [keypoints, weights, cfg, agg, w](Tape& t, Tape::Id self) {
                       const auto kp = as_points2(t.value(keypoints));
                       auto g = aggregate_edges_vjp(kp, w, cfg, *agg, t.grad(self));
                       auto dk = t.grad(keypoints);
                       for (size_t j = 0; j < g.keypoints.size(); ++j) {
                         dk[2 * j] += g.keypoints[j].x();
                         dk[2 * j + 1] += g.keypoints[j].y();
                       }
                       auto dw = t.grad(weights);
                       for (size_t i = 0; i < g.weights.size(); ++i) dw[i] += g.weights[i];
                     });
}

Tape::Id combine(Tape& tape, Tape::Id e_t, Tape::Id e_tk) {
  auto value = combine_edge_prediction(tape.value(e_t), tape.value(e_tk));
  return tape.record("combine", std::move(value), {e_t, e_tk}, [e_t, e_tk](Tape& t, Tape::Id self) {
    combine_edge_prediction_vjp(t.value(e_t), t.value(e_tk), t.grad(self), t.grad(e_t), t.grad(e_tk));
  });
}

Tape::Id recon_view(Tape& tape, Tape::Id pred, std::vector<double> target, int height,
                    int width) {
  const double value = recon_loss_view(tape.value(pred), target, height, width, IdentityFeatures{});
  return tape.record("recon", {value}, {pred},
                     [pred, target = std::move(target), height, width](Tape& t, Tape::Id self) {
                       const auto g = recon_loss_view_vjp(t.value(pred), target, height, width,
                                                          IdentityFeatures{}, t.grad(self)[0]);
                       auto d = t.grad(pred);
                       for (size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                     });
}

Tape::Id length(Tape& tape, Tape::Id points, const EdgeWeights& weights, const LengthState& state) {
  const auto X = as_points3(tape.value(points));
  const double value = length_loss(X, weights, state);
  return tape.record("length", {value}, {points}, [points, weights, state](Tape& t, Tape::Id self) {
    const auto X = as_points3(t.value(points));
    add_points(t.grad(points), length_loss_vjp(X, weights, state, t.grad(self)[0]));
  });
}

Tape::Id normalize(Tape& tape, Tape::Id points, const VoxelGrid& grid) {
  const auto X = as_points3(tape.value(points));
  std::vector<double> value(3 * X.size());
  for (size_t j = 0; j < X.size(); ++j) {
    const Vec3 n = grid.normalize(X[j]);
    for (int k = 0; k < 3; ++k) value[3 * j + k] = n(k);
  }
  const double inv = 1.0 / grid.side_length();
  return tape.record("normalize", std::move(value), {points}, [points, inv](Tape& t, Tape::Id self) {
    auto g = t.grad(self);
    auto d = t.grad(points);
    for (size_t i = 0; i < g.size(); ++i) d[i] += g[i] * inv;
  });
}

Tape::Id separation(Tape& tape, Tape::Id points, double sigma_s) {
  const auto X = as_points3(tape.value(points));
  return tape.record("separation", {separation_loss(X, sigma_s)}, {points},
                     [points, sigma_s](Tape& t, Tape::Id self) {
                       const auto X = as_points3(t.value(points));
                       add_points(t.grad(points), separation_loss_vjp(X, sigma_s, t.grad(self)[0]));
                     });
}

Tape::Id sum(Tape& tape, std::span<const Tape::Id> scalars) {
  double acc = 0.0;
  for (Tape::Id s : scalars) acc += tape.scalar(s);
  std::vector<Tape::Id> in(scalars.begin(), scalars.end());
  return tape.record("sum", {acc}, in, [in](Tape& t, Tape::Id self) {
    const double g = t.grad(self)[0];
    for (Tape::Id s : in) t.grad(s)[0] += g;
  });
}

Tape::Id objective(Tape& tape, int epoch, Tape::Id recon, Tape::Id length, Tape::Id separation,
                   const ObjectiveWeights& w) {
  const LossParts parts{tape.scalar(recon), tape.scalar(length), tape.scalar(separation)};
  const bool aux = auxiliary_losses_enabled(epoch, w);
  return tape.record("objective", {total_objective(epoch, parts, w)}, {recon, length, separation},
                     [recon, length, separation, aux, w](Tape& t, Tape::Id self) {
                       const double g = t.grad(self)[0];
                       t.grad(recon)[0] += g;
                       if (!aux) return;
                       t.grad(length)[0] += w.length * g;
                       t.grad(separation)[0] += w.separation * g;
                     });
}

}  // namespace mvkd::ops
