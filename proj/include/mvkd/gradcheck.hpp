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
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace mvkd {

struct GradCheckOptions {
  int probes = 100;
  double rel_step = 1e-3;   // h = rel_step * input scale
  double tolerance = 1e-3;  // max relative error
  uint64_t seed = 0;
};

struct GradCheckResult {
  std::string op;
  int probes = 0;
  double max_rel_error = 0.0;
  bool passed = false;
  double seconds = 0.0;
};

// A scalar function of one flat input with its analytic gradient.
struct GradProbe {
  std::string op;
  std::vector<double> x0;
  double scale = 1.0;
  std::function<double(std::span<const double>)> f;
  std::function<std::vector<double>(std::span<const double>)> grad;
  // Optional: false when coordinate i cannot be probed with step h without
  // crossing a non-differentiable point (ties of a max, clamps).
  std::function<bool(std::span<const double> x, size_t i, double h)> admissible;
};

// Central differences on randomly chosen coordinates. The relative error
// denominator is max(|analytic|, |numeric|, 1e-6 * max|analytic|), and
// coordinates with a non-negligible gradient are preferred as probes.
// Inadmissible draws are redrawn, up to 50 times the probe count.
GradCheckResult check_gradient(const GradProbe& probe, const GradCheckOptions& opt,
                               std::mt19937_64& rng);

// Every differentiable op of the pipeline, plus one end-to-end probe.
std::vector<GradCheckResult> run_gradient_suite(const GradCheckOptions& opt = {});

}  // namespace mvkd
