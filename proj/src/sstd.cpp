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

#include "mvkd/sstd.hpp"

#include <algorithm>
#include <cmath>

namespace mvkd {

namespace {

std::vector<double> gaussian_kernel(const SsimWindow& w) {
  if (w.size < 1 || w.size % 2 == 0) throw ValidationError("ssim window size must be odd");
  if (!(w.sigma > 0.0)) throw ValidationError("ssim window sigma must be positive");
  std::vector<double> k(w.size);
  const int r = w.size / 2;
  for (int i = 0; i < w.size; ++i) k[i] = std::exp(-(i - r) * (i - r) / (2.0 * w.sigma * w.sigma));
  return k;
}

// Separable blur with truncated, renormalized kernel at the borders.
std::vector<double> blur(const std::vector<double>& src, int h, int w,
                         const std::vector<double>& k) {
  const int r = static_cast<int>(k.size()) / 2;
  std::vector<double> tmp(src.size()), out(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0, norm = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int xx = x + i;
        if (xx < 0 || xx >= w) continue;
        acc += k[i + r] * src[static_cast<size_t>(y) * w + xx];
        norm += k[i + r];
      }
      tmp[static_cast<size_t>(y) * w + x] = acc / norm;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0, norm = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int yy = y + i;
        if (yy < 0 || yy >= h) continue;
        acc += k[i + r] * tmp[static_cast<size_t>(yy) * w + x];
        norm += k[i + r];
      }
      out[static_cast<size_t>(y) * w + x] = acc / norm;
    }
  }
  return out;
}

}  // namespace

std::vector<double> local_ssim_map(const Frame& a, const Frame& b, const SsimWindow& window) {
  if (a.height != b.height || a.width != b.width) {
    throw ValidationError("local_ssim_map: frame shapes differ");
  }
  const Frame la = to_luma(a), lb = to_luma(b);
  const int h = la.height, w = la.width;
  const size_t n = la.values.size();
  const auto k = gaussian_kernel(window);
  std::vector<double> aa(n), bb(n), ab(n);
  for (size_t i = 0; i < n; ++i) {
    aa[i] = la.values[i] * la.values[i];
    bb[i] = lb.values[i] * lb.values[i];
    ab[i] = la.values[i] * lb.values[i];
  }
  const auto mu_a = blur(la.values, h, w, k), mu_b = blur(lb.values, h, w, k);
  const auto e_aa = blur(aa, h, w, k), e_bb = blur(bb, h, w, k), e_ab = blur(ab, h, w, k);
  std::vector<double> ssim(n);
  for (size_t i = 0; i < n; ++i) {
    const double va = e_aa[i] - mu_a[i] * mu_a[i];
    const double vb = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    ssim[i] = ((2 * mu_a[i] * mu_b[i] + window.c1) * (2 * cov + window.c2)) /
              ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + window.c1) * (va + vb + window.c2));
  }
  return ssim;
}

DissimilarityMap dissimilarity_target(const Frame& a, const Frame& b,
                                      const DissimilarityOptions& opt) {
  const auto ssim = local_ssim_map(a, b, opt.window);
  DissimilarityMap out;
  out.height = a.height;
  out.width = a.width;
  out.view_index = a.view_index;
  out.t0 = a.timestamp;
  out.t1 = b.timestamp;
  out.values.resize(ssim.size());
  for (size_t i = 0; i < ssim.size(); ++i) {
    out.values[i] = std::clamp((1.0 - ssim[i]) / 2.0, 0.0, 1.0);
  }
  if (opt.normalize) {
    const auto [lo, hi] = std::minmax_element(out.values.begin(), out.values.end());
    const double mn = *lo, mx = *hi;
    if (mx > opt.eps) {
      const double range = mx - mn;
      for (double& v : out.values) v = range > opt.eps ? (v - mn) / range : 0.0;
    }
  }
  return out;
}

DissimilarityMap downsample(const DissimilarityMap& map, int factor) {
  if (factor < 1 || map.height % factor != 0 || map.width % factor != 0) {
    throw ValidationError("downsample: factor must divide the map size");
  }
  if (factor == 1) return map;
  DissimilarityMap out = map;
  out.height = map.height / factor;
  out.width = map.width / factor;
  out.values.assign(static_cast<size_t>(out.height) * out.width, 0.0);
  const double inv = 1.0 / (factor * factor);
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      out.values[static_cast<size_t>(y / factor) * out.width + x / factor] += map.at(y, x) * inv;
    }
  }
  return out;
}

}  // namespace mvkd
