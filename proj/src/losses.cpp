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

#include "mvkd/losses.hpp"

#include <algorithm>
#include <cmath>

namespace mvkd {

std::vector<double> combine_edge_prediction(std::span<const double> e_t,
                                            std::span<const double> e_tk) {
  if (e_t.size() != e_tk.size()) throw ValidationError("combine: edge map sizes differ");
  std::vector<double> out(e_t.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(std::max(e_t[i], e_tk[i]), 0.0, 1.0);
  return out;
}

void combine_edge_prediction_vjp(std::span<const double> e_t, std::span<const double> e_tk,
                                 std::span<const double> grad_out, std::span<double> grad_t,
                                 std::span<double> grad_tk) {
  for (size_t i = 0; i < e_t.size(); ++i) {
    const double m = std::max(e_t[i], e_tk[i]);
    if (m > 1.0 || m < 0.0) continue;
    if (e_t[i] >= e_tk[i]) {
      grad_t[i] += grad_out[i];
    } else {
      grad_tk[i] += grad_out[i];
    }
  }
}

double recon_loss_view(std::span<const double> pred, std::span<const double> target, int height,
                       int width, const FeatureTransform& features) {
  if (pred.size() != target.size() || pred.size() != static_cast<size_t>(height) * width) {
    throw ValidationError("recon_loss: raster sizes differ");
  }
  const auto fp = features.apply(pred, height, width);
  const auto ft = features.apply(target, height, width);
  double acc = 0.0;
  for (size_t i = 0; i < fp.size(); ++i) acc += (fp[i] - ft[i]) * (fp[i] - ft[i]);
  return acc / static_cast<double>(fp.size());
}

std::vector<double> recon_loss_view_vjp(std::span<const double> pred,
                                        std::span<const double> target, int height, int width,
                                        const FeatureTransform& features, double grad_loss) {
  const auto fp = features.apply(pred, height, width);
  const auto ft = features.apply(target, height, width);
  std::vector<double> g(fp.size());
  const double k = 2.0 * grad_loss / static_cast<double>(fp.size());
  for (size_t i = 0; i < fp.size(); ++i) g[i] = k * (fp[i] - ft[i]);
  return features.vjp(pred, height, width, g);
}

double recon_loss(std::span<const std::vector<double>> preds,
                  std::span<const std::vector<double>> targets, int height, int width,
                  const FeatureTransform& features) {
  if (preds.size() != targets.size()) throw ValidationError("recon_loss: view counts differ");
  double total = 0.0;
  for (size_t v = 0; v < preds.size(); ++v) {
    total += recon_loss_view(preds[v], targets[v], height, width, features);
  }
  return total;
}

std::vector<double> edge_lengths(std::span<const Vec3> points, const EdgeWeights& weights) {
  std::vector<double> out(weights.pairs());
  for (size_t e = 0; e < weights.pairs(); ++e) {
    const auto [m, n] = weights.pair(e);
    out[e] = (points[m] - points[n]).norm();
  }
  return out;
}

double length_loss(std::span<const Vec3> points, const EdgeWeights& weights,
                   const LengthState& state) {
  double acc = 0.0;
  for (size_t e = 0; e < weights.pairs(); ++e) {
    if (!(weights.values()[e] > 0.0) || !state.initialized[e]) continue;
    const auto [m, n] = weights.pair(e);
    acc += std::abs(state.average[e] - (points[m] - points[n]).norm());
  }
  return acc;
}

std::vector<Vec3> length_loss_vjp(std::span<const Vec3> points, const EdgeWeights& weights,
                                  const LengthState& state, double grad_loss) {
  std::vector<Vec3> g(points.size(), Vec3::Zero());
  for (size_t e = 0; e < weights.pairs(); ++e) {
    if (!(weights.values()[e] > 0.0) || !state.initialized[e]) continue;
    const auto [m, n] = weights.pair(e);
    const Vec3 d = points[m] - points[n];
    const double l = d.norm();
    if (l == 0.0) continue;
    const double diff = l - state.average[e];
    const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    const Vec3 gm = grad_loss * sign * d / l;
    g[m] += gm;
    g[n] -= gm;
  }
  return g;
}

void update_length_state(LengthState& state, std::span<const double> lengths,
                         const EdgeWeights& weights) {
  for (size_t e = 0; e < weights.pairs(); ++e) {
    if (!(weights.values()[e] > 0.0)) continue;
    if (!state.initialized[e]) {
      state.average[e] = lengths[e];
      state.initialized[e] = 1;
    } else {
      state.average[e] = state.decay * state.average[e] + (1.0 - state.decay) * lengths[e];
    }
  }
}

double separation_loss(std::span<const Vec3> points, double sigma_s) {
  if (points.size() < 2) return 0.0;
  const double k = 1.0 / (2.0 * sigma_s * sigma_s);
  double acc = 0.0;
  for (size_t i = 0; i < points.size(); ++i) {
    for (size_t j = 0; j < points.size(); ++j) {
      if (i == j) continue;
      acc += std::exp(-(points[i] - points[j]).squaredNorm() * k);
    }
  }
  return acc;
}

std::vector<Vec3> separation_loss_vjp(std::span<const Vec3> points, double sigma_s,
                                      double grad_loss) {
  std::vector<Vec3> g(points.size(), Vec3::Zero());
  if (points.size() < 2) return g;
  const double k = 1.0 / (2.0 * sigma_s * sigma_s);
  for (size_t i = 0; i < points.size(); ++i) {
    for (size_t j = 0; j < points.size(); ++j) {
      if (i == j) continue;
      const Vec3 d = points[i] - points[j];
      // Each ordered pair (i, j) depends on both points; (j, i) adds the same.
      const Vec3 gi = grad_loss * std::exp(-d.squaredNorm() * k) * (-2.0 * k) * d;
      g[i] += gi;
      g[j] -= gi;
    }
  }
  return g;
}

double total_objective(int epoch, const LossParts& parts, const ObjectiveWeights& w) {
  if (!auxiliary_losses_enabled(epoch, w)) return parts.recon;
  return parts.recon + (w.length * parts.length + w.separation * parts.separation);
}

}  // namespace mvkd
