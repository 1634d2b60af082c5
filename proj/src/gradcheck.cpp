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

#include "mvkd/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "mvkd/camera.hpp"
#include "mvkd/edge_render.hpp"
#include "mvkd/engine.hpp"
#include "mvkd/losses.hpp"
#include "mvkd/ops.hpp"
#include "mvkd/tape.hpp"
#include "mvkd/voxel.hpp"

namespace mvkd {

GradCheckResult check_gradient(const GradProbe& probe, const GradCheckOptions& opt,
                               std::mt19937_64& rng) {
  const auto start = std::chrono::steady_clock::now();
  GradCheckResult r;
  r.op = probe.op;
  const std::vector<double> analytic = probe.grad(probe.x0);
  double gmax = 0.0;
  for (double g : analytic) gmax = std::max(gmax, std::abs(g));
  const double floor = std::max(1e-6 * gmax, 1e-300);

  std::vector<size_t> candidates;
  for (size_t i = 0; i < analytic.size(); ++i) {
    if (std::abs(analytic[i]) > floor) candidates.push_back(i);
  }
  if (static_cast<int>(candidates.size()) < opt.probes) {
    candidates.resize(analytic.size());
    std::iota(candidates.begin(), candidates.end(), size_t{0});
  }
  const double h = opt.rel_step * probe.scale;
  std::vector<double> x = probe.x0;
  for (int attempt = 0; r.probes < opt.probes && attempt < 50 * opt.probes; ++attempt) {
    const size_t i = candidates[rng() % candidates.size()];
    if (probe.admissible && !probe.admissible(probe.x0, i, h)) continue;
    x[i] = probe.x0[i] + h;
    const double fp = probe.f(x);
    x[i] = probe.x0[i] - h;
    const double fm = probe.f(x);
    x[i] = probe.x0[i];
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic[i] - numeric) / denom);
    ++r.probes;
  }
  r.passed = r.probes == opt.probes && r.max_rel_error < opt.tolerance;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

namespace {

using Builder = std::function<Tape::Id(Tape&, Tape::Id)>;

std::vector<double> uniform(std::mt19937_64& rng, size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// f(x) = <g, op(x)> with g drawn once from the output size at x0.
GradProbe tape_probe(std::string op, std::vector<double> x0, double scale, Builder build,
                     std::mt19937_64& rng) {
  Tape t;
  const size_t out = t.value(build(t, t.leaf("x", x0))).size();
  auto g = std::make_shared<std::vector<double>>(uniform(rng, out, -1.0, 1.0));
  GradProbe p;
  p.op = std::move(op);
  p.x0 = std::move(x0);
  p.scale = scale;
  p.f = [build, g](std::span<const double> x) {
    Tape t;
    const auto y = t.value(build(t, t.leaf("x", {x.begin(), x.end()})));
    return std::inner_product(y.begin(), y.end(), g->begin(), 0.0);
  };
  p.grad = [build, g](std::span<const double> x) {
    Tape t;
    const Tape::Id in = t.leaf("x", {x.begin(), x.end()});
    const Tape::Id y = build(t, in);
    const auto yv = t.value(y);
    const double v = std::inner_product(yv.begin(), yv.end(), g->begin(), 0.0);
    const Tape::Id root = t.record("probe", {v}, {y}, [y, g](Tape& tp, Tape::Id self) {
      const double s = tp.grad(self)[0];
      auto d = tp.grad(y);
      for (size_t i = 0; i < d.size(); ++i) d[i] += s * (*g)[i];
    });
    t.backward(root);
    const auto d = t.grad(in);
    return std::vector<double>(d.begin(), d.end());
  };
  return p;
}

std::vector<CameraModel> probe_cameras(int views, int size, double distance) {
  std::vector<CameraModel> cams;
  for (int i = 0; i < views; ++i) {
    const double az = 2.0 * 3.14159265358979 * i / views + 0.3;
    const Vec3 eye(distance * std::cos(az), distance * std::sin(az), 0.3 * distance);
    cams.push_back(look_at_camera("probe" + std::to_string(i), eye, Vec3(5.0, -3.0, 2.0),
                                  1.2 * size, size, size));
  }
  return cams;
}

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(const GradCheckOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::vector<GradProbe> probes;

  // 2D spatial softmax.
  probes.push_back(tape_probe("softmax2d", uniform(rng, 3 * 64, -2.0, 2.0), 1.0,
                              [](Tape& t, Tape::Id x) { return ops::softmax2d(t, x, 64); }, rng));

  // Bilinear unprojection, adjoint taken with respect to the heatmap.
  const auto cams = probe_cameras(3, 16, 3000.0);
  const VoxelGrid grid = build_grid(Vec3::Zero(), 1500.0, 8);
  {
    const auto cam = cams[0];
    auto gvol = std::make_shared<ChannelVolume>(8, 2);
    gvol->values = uniform(rng, gvol->values.size(), -1.0, 1.0);
    GradProbe p;
    p.op = "unproject";
    p.x0 = uniform(rng, 2 * 6 * 6, 0.0, 1.0);
    p.f = [grid, cam, gvol](std::span<const double> x) {
      Heatmap2D hm(6, 6, 2);
      hm.values.assign(x.begin(), x.end());
      const auto vol = unproject_heatmap(grid, cam, hm);
      return std::inner_product(vol.values.begin(), vol.values.end(), gvol->values.begin(), 0.0);
    };
    p.grad = [grid, cam, gvol](std::span<const double>) {
      return unproject_heatmap_vjp(grid, cam, 6, 6, *gvol).values;
    };
    probes.push_back(p);
  }

  // Softmax aggregation over views.
  {
    auto gout = std::make_shared<std::vector<double>>(uniform(rng, 4 * 4 * 4 * 2, -1.0, 1.0));
    auto unpack = [](std::span<const double> x) {
      std::vector<ChannelVolume> vols(3, ChannelVolume(4, 2));
      for (int v = 0; v < 3; ++v) {
        std::copy(x.begin() + v * 128, x.begin() + (v + 1) * 128, vols[v].values.begin());
      }
      return vols;
    };
    GradProbe p;
    p.op = "view_aggregation";
    p.x0 = uniform(rng, 3 * 128, -1.5, 1.5);
    p.f = [unpack, gout](std::span<const double> x) {
      const auto out = softmax_aggregate(unpack(x));
      return std::inner_product(out.values.begin(), out.values.end(), gout->begin(), 0.0);
    };
    p.grad = [unpack, gout](std::span<const double> x) {
      const auto vols = unpack(x);
      ChannelVolume g(4, 2);
      g.values = *gout;
      std::vector<double> flat;
      for (const auto& d : softmax_aggregate_vjp(vols, g)) {
        flat.insert(flat.end(), d.values.begin(), d.values.end());
      }
      return flat;
    };
    probes.push_back(p);
  }

  // 3D spatial softmax.
  {
    const VoxelGrid g6 = build_grid(Vec3(100.0, -50.0, 20.0), 900.0, 6);
    const Vec3 gp(0.7, -0.4, 0.9);
    const double tau = 0.7;
    GradProbe p;
    p.op = "spatial_softmax_3d";
    p.x0 = uniform(rng, g6.size(), -2.0, 2.0);
    p.f = [g6, gp, tau](std::span<const double> x) { return spatial_softmax_3d(g6, x, tau).dot(gp); };
    p.grad = [g6, gp, tau](std::span<const double> x) { return spatial_softmax_3d_vjp(g6, x, tau, gp); };
    probes.push_back(p);
  }

  // Fused lifting, with respect to heatmaps and to the volume affine.
  {
    auto lifter = std::make_shared<VolumetricLifter>(grid, cams, 6, 6);
    const int C = 2;
    const size_t per_view = C * 36;
    std::vector<double> hm0;
    for (int v = 0; v < 3; ++v) {
      const auto h = ops::softmax_planes(uniform(rng, per_view, -2.0, 2.0), 36);
      hm0.insert(hm0.end(), h.begin(), h.end());
    }
    const std::vector<double> scale0 = {40.0, 25.0}, bias0 = {0.3, -0.2};
    probes.push_back(tape_probe(
        "lift/heatmaps", hm0, 0.05,
        [lifter, per_view, scale0, bias0](Tape& t, Tape::Id x) {
          std::vector<Tape::Id> hms;
          for (int v = 0; v < 3; ++v) {
            const auto all = t.value(x);
            hms.push_back(t.record("slice", {all.begin() + v * per_view, all.begin() + (v + 1) * per_view},
                                   {x}, [x, v, per_view](Tape& tp, Tape::Id self) {
                                     auto g = tp.grad(self);
                                     auto d = tp.grad(x);
                                     for (size_t i = 0; i < per_view; ++i) d[v * per_view + i] += g[i];
                                   }));
          }
          const Tape::Id s = t.leaf("scale", scale0), b = t.leaf("bias", bias0);
          return ops::lift(t, *lifter, hms, 2, s, b, 1.0);
        },
        rng));
    probes.push_back(tape_probe(
        "lift/affine", {40.0, 25.0, 0.3, -0.2}, 1.0,
        [lifter, hm0, per_view](Tape& t, Tape::Id x) {
          std::vector<Tape::Id> hms;
          for (int v = 0; v < 3; ++v) {
            hms.push_back(t.leaf("hm", {hm0.begin() + v * per_view, hm0.begin() + (v + 1) * per_view}));
          }
          const auto a = t.value(x);
          const Tape::Id s = t.record("scale", {a[0], a[1]}, {x}, [x](Tape& tp, Tape::Id self) {
            tp.grad(x)[0] += tp.grad(self)[0];
            tp.grad(x)[1] += tp.grad(self)[1];
          });
          const Tape::Id b = t.record("bias", {a[2], a[3]}, {x}, [x](Tape& tp, Tape::Id self) {
            tp.grad(x)[2] += tp.grad(self)[0];
            tp.grad(x)[3] += tp.grad(self)[1];
          });
          return ops::lift(t, *lifter, hms, 2, s, b, 0.8);
        },
        rng));
  }

  // Projection with homogeneous divide.
  {
    const Mat34 P = cams[1].P();
    probes.push_back(tape_probe("project", uniform(rng, 3 * 5, -600.0, 600.0), 1000.0,
                                [P](Tape& t, Tape::Id x) { return ops::project(t, x, P, 16, 16); }, rng));
  }

  // Point-to-segment distance, summed over several configurations so that
  // both the interior and the endpoint branches are probed.
  {
    GradProbe p;
    p.op = "segment_distance";
    p.x0 = uniform(rng, 6 * 8, 0.0, 1.0);
    p.f = [](std::span<const double> x) {
      double acc = 0.0;
      for (size_t k = 0; k < x.size(); k += 6) {
        acc += point_segment_distance(Vec2(x[k], x[k + 1]), Vec2(x[k + 2], x[k + 3]),
                                      Vec2(x[k + 4], x[k + 5]));
      }
      return acc;
    };
    p.grad = [](std::span<const double> x) {
      std::vector<double> out;
      for (size_t k = 0; k < x.size(); k += 6) {
        const auto g = point_segment_distance_grad(Vec2(x[k], x[k + 1]), Vec2(x[k + 2], x[k + 3]),
                                                   Vec2(x[k + 4], x[k + 5]));
        out.insert(out.end(), {g.p.x(), g.p.y(), g.a.x(), g.a.y(), g.b.x(), g.b.y()});
      }
      return out;
    };
    probes.push_back(p);
  }

  // Gaussian line rendering.
  {
    const EdgeConfig ec{0.08, 16, 16};
    auto gmap = std::make_shared<std::vector<double>>(uniform(rng, 256, -1.0, 1.0));
    GradProbe p;
    p.op = "edge_gaussian";
    p.x0 = uniform(rng, 4, 0.2, 0.8);
    p.f = [ec, gmap](std::span<const double> x) {
      const auto m = render_edge(Vec2(x[0], x[1]), Vec2(x[2], x[3]), ec);
      return std::inner_product(m.values.begin(), m.values.end(), gmap->begin(), 0.0);
    };
    p.grad = [ec, gmap](std::span<const double> x) {
      const auto [ga, gb] = render_edge_vjp(Vec2(x[0], x[1]), Vec2(x[2], x[3]), ec, *gmap);
      return std::vector<double>{ga.x(), ga.y(), gb.x(), gb.y()};
    };
    probes.push_back(p);
  }

  // Max aggregation over weighted edges (generic positions are off-tie).
  {
    const EdgeConfig ec{0.06, 16, 16};
    const auto kp0 = uniform(rng, 2 * 5, 0.15, 0.85);
    const auto w0 = uniform(rng, 10, 0.2, 1.0);
    // Admissible when the winning pair of every pixel is unchanged over
    // [x - h, x + h].
    auto winners = [ec](std::span<const double> kp, std::span<const double> w) {
      EdgeWeights ew(5, 0.0);
      std::copy(w.begin(), w.end(), ew.values().begin());
      return aggregate_edges_traced(ops::as_points2(kp), ew, ec).winner;
    };
    auto off_tie = [winners](std::span<const double> kp, std::span<const double> w, bool on_kp,
                             size_t i, double h) {
      const auto base = winners(kp, w);
      for (double s : {-h, h}) {
        std::vector<double> k2(kp.begin(), kp.end()), w2(w.begin(), w.end());
        (on_kp ? k2 : w2)[i] += s;
        if (winners(k2, w2) != base) return false;
      }
      return true;
    };
    auto pk = tape_probe("edges/keypoints", kp0, 1.0,
                         [ec, w0](Tape& t, Tape::Id x) { return ops::edges(t, x, t.leaf("w", w0), 5, ec); },
                         rng);
    pk.admissible = [off_tie, w0](std::span<const double> x, size_t i, double h) {
      return off_tie(x, w0, true, i, h);
    };
    probes.push_back(pk);
    auto pw = tape_probe("edges/weights", w0, 1.0,
                         [ec, kp0](Tape& t, Tape::Id x) { return ops::edges(t, t.leaf("kp", kp0), x, 5, ec); },
                         rng);
    pw.admissible = [off_tie, kp0](std::span<const double> x, size_t i, double h) {
      return off_tie(kp0, x, false, i, h);
    };
    probes.push_back(pw);
  }

  // Edge map combination (values kept below the clamp).
  {
    auto x0 = uniform(rng, 2 * 64, 0.0, 0.95);
    auto pc = tape_probe("combine", x0, 1.0,
                                [](Tape& t, Tape::Id x) {
                                  const auto v = t.value(x);
                                  auto half = [&](int k) {
                                    return t.record("half", {v.begin() + 64 * k, v.begin() + 64 * (k + 1)}, {x},
                                                    [x, k](Tape& tp, Tape::Id self) {
                                                      auto g = tp.grad(self);
                                                      auto d = tp.grad(x);
                                                      for (int i = 0; i < 64; ++i) d[64 * k + i] += g[i];
                                                    });
                                  };
                                  const Tape::Id a = half(0), b = half(1);
                                  return ops::combine(t, a, b);
                                },
                                rng);
    pc.admissible = [](std::span<const double> x, size_t i, double h) {
      return std::abs(x[i] - x[(i + 64) % 128]) > 2.0 * h;
    };
    probes.push_back(pc);
  }

  // Reconstruction loss.
  {
    const auto target = uniform(rng, 64, 0.0, 1.0);
    probes.push_back(tape_probe("recon", uniform(rng, 64, 0.0, 1.0), 1.0,
                                [target](Tape& t, Tape::Id x) { return ops::recon_view(t, x, target, 8, 8); },
                                rng));
  }

  // Length loss with a running average away from the current lengths.
  {
    const auto pts = uniform(rng, 3 * 5, -500.0, 500.0);
    EdgeWeights w(5, 0.5);
    w.values()[3] = -0.2;
    LengthState st(w.pairs(), 0.9);
    for (size_t e = 0; e < w.pairs(); ++e) {
      st.average[e] = 200.0 + 50.0 * static_cast<double>(e);
      st.initialized[e] = e != 1;
    }
    probes.push_back(tape_probe("length", pts, 1000.0,
                                [w, st](Tape& t, Tape::Id x) { return ops::length(t, x, w, st); }, rng));
  }

  // Separation loss and normalization into the grid cube.
  probes.push_back(tape_probe("separation", uniform(rng, 3 * 6, 0.3, 0.7), 0.08,
                              [](Tape& t, Tape::Id x) { return ops::separation(t, x, 0.08); }, rng));
  probes.push_back(tape_probe("normalize", uniform(rng, 3 * 4, -900.0, 900.0), 1000.0,
                              [grid](Tape& t, Tape::Id x) { return ops::normalize(t, x, grid); }, rng));

  // Curriculum-gated objective (gate open).
  probes.push_back(tape_probe("objective", uniform(rng, 3, 0.1, 2.0), 1.0,
                              [](Tape& t, Tape::Id x) {
                                const auto v = t.value(x);
                                std::array<Tape::Id, 3> parts{};
                                for (int k = 0; k < 3; ++k) {
                                  parts[k] = t.record("part", {v[k]}, {x}, [x, k](Tape& tp, Tape::Id self) {
                                    tp.grad(x)[k] += tp.grad(self)[0];
                                  });
                                }
                                return ops::objective(t, 3, parts[0], parts[1], parts[2], {2, 0.1, 0.01});
                              },
                              rng));

  // End to end: logits of both frames through the full objective.
  {
    TrainConfig cfg;
    cfg.joints = 4;
    cfg.grid_resolution = 8;
    cfg.volume_side = 1500.0;
    cfg.heatmap_size = 6;
    cfg.raster_size = 16;
    cfg.edge_sigma = 0.08;
    cfg.volume_scale_init = 30.0;
    cfg.curriculum_epochs = 0;
    cfg.w_length = 0.1;
    cfg.w_sep = 0.01;
    cfg.init_amplitude = 2.0;
    cfg.init_noise = 0.5;
    cfg.seed = opt.seed + 7;
    auto model = std::make_shared<Model>(probe_cameras(2, 16, 3000.0), cfg);
    auto params = std::make_shared<ParamSet>(init_params(*model, 2, cfg));
    auto lengths = std::make_shared<LengthState>(params->edges.pairs(), 0.9);
    for (size_t e = 0; e < params->edges.pairs(); ++e) {
      lengths->average[e] = 150.0 + 20.0 * static_cast<double>(e);
      lengths->initialized[e] = 1;
    }
    Batch batch{0, 1, 1, {uniform(rng, 256, 0.0, 1.0), uniform(rng, 256, 0.0, 1.0)}};
    GradProbe p;
    p.op = "pipeline/logits";
    p.x0.assign(params->logits.begin(), params->logits.end());
    auto with = [model, params](std::span<const double> x) {
      ParamSet q = *params;
      for (size_t i = 0; i < x.size(); ++i) q.logits[i] = static_cast<float>(x[i]);
      return q;
    };
    // Logits are stored as float; h = 2^-10 keeps x0 +- h exact.
    p.scale = std::ldexp(1.0, -10) / opt.rel_step;
    p.f = [model, lengths, batch, with](std::span<const double> x) {
      ParamSet q = with(x);
      return model->forward(q, batch, *lengths).total;
    };
    p.grad = [model, lengths, batch, with](std::span<const double> x) {
      ParamSet q = with(x);
      auto pass = model->forward(q, batch, *lengths);
      const auto g = model->backward(pass);
      std::vector<double> flat;
      for (int i = 0; i < 2; ++i) {
        for (const auto& v : g.logits[i]) flat.insert(flat.end(), v.begin(), v.end());
      }
      return flat;
    };
    probes.push_back(p);
  }

  std::vector<GradCheckResult> results;
  for (const auto& p : probes) results.push_back(check_gradient(p, opt, rng));
  return results;
}

}  // namespace mvkd
