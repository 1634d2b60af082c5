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

#include <memory>
#include <span>
#include <vector>

#include "mvkd/camera.hpp"
#include "mvkd/edge_render.hpp"

namespace mvkd {

// Exponential running average of each edge's 3D length (mm). Entries are
// populated the first time their pair is active.
struct LengthState {
  double decay = 0.9;
  std::vector<double> average;
  std::vector<uint8_t> initialized;

  LengthState() = default;
  LengthState(size_t pairs, double beta)
      : decay(beta), average(pairs, 0.0), initialized(pairs, 0) {}
};

// Maps a prediction or target raster to the space where the reconstruction
// distance is measured. The identity gives pixel-space MSE.
class FeatureTransform {
 public:
  virtual ~FeatureTransform() = default;
  virtual std::vector<double> apply(std::span<const double> map, int height, int width) const = 0;
  virtual std::vector<double> vjp(std::span<const double> map, int height, int width,
                                  std::span<const double> grad_features) const = 0;
};

class IdentityFeatures : public FeatureTransform {
 public:
  std::vector<double> apply(std::span<const double> map, int, int) const override {
    return {map.begin(), map.end()};
  }
  std::vector<double> vjp(std::span<const double>, int, int,
                          std::span<const double> g) const override {
    return {g.begin(), g.end()};
  }
};

// Pixelwise max of the two edge maps, clamped to [0, 1].
std::vector<double> combine_edge_prediction(std::span<const double> e_t,
                                            std::span<const double> e_tk);
// Gradient goes to the larger input (e_t on ties) and is cut where clamped.
void combine_edge_prediction_vjp(std::span<const double> e_t, std::span<const double> e_tk,
                                 std::span<const double> grad_out, std::span<double> grad_t,
                                 std::span<double> grad_tk);

// Mean squared error between transformed prediction and target for one view.
double recon_loss_view(std::span<const double> pred, std::span<const double> target,
                       int height, int width, const FeatureTransform& features);
std::vector<double> recon_loss_view_vjp(std::span<const double> pred,
                                        std::span<const double> target, int height, int width,
                                        const FeatureTransform& features, double grad_loss);

// Sum over views of recon_loss_view. preds and targets are per view.
double recon_loss(std::span<const std::vector<double>> preds,
                  std::span<const std::vector<double>> targets, int height, int width,
                  const FeatureTransform& features = IdentityFeatures{});

// Euclidean length of every pair, in EdgeWeights pair order.
std::vector<double> edge_lengths(std::span<const Vec3> points, const EdgeWeights& weights);

// sum over active, initialized pairs of |l_avg - l|.
double length_loss(std::span<const Vec3> points, const EdgeWeights& weights,
                   const LengthState& state);
// l_avg is a constant; zero-length edges get zero gradient.
std::vector<Vec3> length_loss_vjp(std::span<const Vec3> points, const EdgeWeights& weights,
                                  const LengthState& state, double grad_loss);

// l_avg <- decay * l_avg + (1 - decay) * l for active pairs; first
// observation sets l_avg = l. Inactive pairs are untouched.
void update_length_state(LengthState& state, std::span<const double> lengths,
                         const EdgeWeights& weights);

// sum over ordered pairs i != j of exp(-|U_i - U_j|^2 / (2 sigma_s^2)).
// Points are expected in normalized volume coordinates. Fewer than 2 points
// give 0.
double separation_loss(std::span<const Vec3> points, double sigma_s);
std::vector<Vec3> separation_loss_vjp(std::span<const Vec3> points, double sigma_s,
                                      double grad_loss);

struct LossParts {
  double recon = 0.0;
  double length = 0.0;
  double separation = 0.0;
};

struct ObjectiveWeights {
  int curriculum_epochs = 2;
  double length = 0.1;
  double separation = 0.01;
};

// recon + [epoch > e] (w_length * length + w_sep * separation). Returns recon
// unchanged while the curriculum gate is closed.
double total_objective(int epoch, const LossParts& parts, const ObjectiveWeights& w);
inline bool auxiliary_losses_enabled(int epoch, const ObjectiveWeights& w) {
  return epoch > w.curriculum_epochs;
}

}  // namespace mvkd
