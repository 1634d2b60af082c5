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

// mvkd: command-line front end for dataset synthesis, training,
// inference, triangulation and evaluation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <omp.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "mvkd/camera.hpp"
#include "mvkd/dataset.hpp"
#include "mvkd/edge_render.hpp"
#include "mvkd/error.hpp"
#include "mvkd/evaluation.hpp"
#include "mvkd/gradcheck.hpp"
#include "mvkd/image_io.hpp"
#include "mvkd/pipeline.hpp"
#include "mvkd/synth.hpp"
#include "mvkd/targets.hpp"
#include "mvkd/triangulation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace mvkd {
namespace {

// Config precedence: flags > --config file > defaults. Flags land in the
// JSON before parsing so that schema checks cover them too.
struct ConfigFlags {
  std::string file;
  std::vector<std::string> sets;  // "key=value" or "scene.key=value"
  std::optional<int> steps, joints, frame_gap, threads;
  std::optional<uint64_t> seed;
  std::optional<double> w_length, w_sep;

  void add_train(CLI::App* app) {
    app->add_option("--config", file, "JSON run config (train/scene/dataset_dir/run_dir)");
    app->add_option("--steps", steps, "Optimizer steps");
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--joints", joints, "Discovered keypoint count");
    app->add_option("--frame-gap", frame_gap, "Frame gap k of the training pairs");
    app->add_option("--w-length", w_length, "Length loss weight");
    app->add_option("--w-sep", w_sep, "Separation loss weight");
    app->add_option("--threads", threads, "Worker threads (1 = bitwise reproducible)");
    app->add_option("--set", sets, "Override any field: key=value or scene.key=value");
  }

  RunConfig resolve() const {
    json j = json::object();
    if (!file.empty()) {
      std::ifstream in(file);
      if (!in) throw IoError("cannot open config file: " + file);
      try {
        j = json::parse(in);
      } catch (const json::exception& e) {
        throw ValidationError(file + ": " + e.what());
      }
    }
    if (!j.contains("train")) j["train"] = json::object();
    if (!j.contains("scene")) j["scene"] = json::object();
    auto& t = j["train"];
    if (steps) t["steps"] = *steps;
    if (seed) t["seed"] = *seed;
    if (joints) t["joints"] = *joints;
    if (frame_gap) t["frame_gap"] = *frame_gap;
    if (w_length) t["w_length"] = *w_length;
    if (w_sep) t["w_sep"] = *w_sep;
    if (threads) t["threads"] = *threads;
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + kv + "'");
      std::string key = kv.substr(0, eq);
      const std::string raw = kv.substr(eq + 1);
      json value;
      try {
        value = json::parse(raw);
      } catch (const json::exception&) {
        value = raw;
      }
      json* target = &t;
      if (key.rfind("scene.", 0) == 0) {
        target = &j["scene"];
        key = key.substr(6);
      } else if (key.rfind("train.", 0) == 0) {
        key = key.substr(6);
      }
      (*target)[key] = value;
    }
    try {
      return j.get<RunConfig>();
    } catch (const json::exception& e) {
      throw ValidationError(std::string("config: ") + e.what());
    }
  }
};

void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

std::vector<Pose> to_poses(const std::vector<KeypointRecord>& recs) {
  std::vector<Pose> out(recs.size());
  for (size_t i = 0; i < recs.size(); ++i) {
    if (recs[i].t != static_cast<int>(i)) {
      throw ValidationError("keypoint records must be ordered by t starting at 0");
    }
    out[i] = recs[i].keypoints_mm;
  }
  return out;
}

// ---- synth ----------------------------------------------------------------

int cmd_synth(const std::string& out, const ConfigFlags& flags, const std::optional<int>& views,
              const std::optional<int>& frames, const std::optional<int>& trajectories,
              const std::optional<uint64_t>& seed, const std::string& preset) {
  ConfigFlags f = flags;
  // Preset-scaled defaults apply to every scene field not set explicitly.
  if (!preset.empty()) f.sets.insert(f.sets.begin(), "scene.preset=" + preset);
  RunConfig rc = f.resolve();
  SceneConfig& sc = rc.scene;
  if (views) sc.views = *views;
  if (frames) sc.frames = *frames;
  if (trajectories) sc.trajectories = *trajectories;
  if (seed) sc.seed = *seed;

  const fs::path man = fs::path(out) / "manifest.json";
  if (fs::exists(man)) {
    try {
      const Dataset ds = load_dataset(out);
      if (ds.manifest.at("scene") == json(sc) && verify_manifest(ds).empty()) {
        std::printf("dataset %s is up to date (hash %s)\n", out.c_str(),
                    ds.manifest.at("hash").get<std::string>().c_str());
        return 0;
      }
    } catch (const Error&) {
      // Fall through and regenerate.
    }
    std::printf("dataset %s is stale or damaged; regenerating\n", out.c_str());
  }
  const Manifest m = generate_dataset(SkeletonSpec::preset(sc.preset), sc, out);
  std::printf("wrote %d views x %d frames to %s (hash %s)\n", m.views, m.frames, out.c_str(),
              m.hash.c_str());
  return 0;
}

// ---- targets --------------------------------------------------------------

int cmd_targets(const std::string& data, const ConfigFlags& flags, const std::string& cache_flag) {
  const RunConfig rc = flags.resolve();
  const Dataset ds = load_dataset(data);
  for (const auto& issue : verify_manifest(ds)) std::fprintf(stderr, "warning: %s\n", issue.c_str());
  TargetOptions to;
  to.raster = rc.train.raster_size;
  to.dissimilarity = rc.train.dissimilarity();
  to.cache_dir = resolve_cache_dir(cache_flag);
  if (to.cache_dir.empty()) to.cache_dir = (fs::path(data) / "targets").string();
  const auto pairs = training_pairs(ds.segments, rc.train.frame_gap);
  TargetStats stats;
  build_targets(ds, pairs, to, &stats);
  std::printf("%zu pairs x %d views: %zu computed, %zu cached in %s\n", pairs.size(), ds.views,
              stats.computed, stats.cached, to.cache_dir.c_str());
  return 0;
}

// ---- train ----------------------------------------------------------------

int cmd_train(const std::string& data, const std::string& run, const ConfigFlags& flags, bool resume,
              int checkpoint_every, int log_every) {
  RunConfig rc = flags.resolve();
  if (!data.empty()) rc.dataset_dir = data;
  if (!run.empty()) rc.run_dir = run;
  if (rc.dataset_dir.empty()) throw ValidationError("train: no dataset (--data or dataset_dir)");
  if (rc.run_dir.empty()) throw ValidationError("train: no run dir (--run or run_dir)");
  set_threads(rc.train.threads);
  TrainRunOptions opt;
  opt.resume = resume;
  opt.checkpoint_every = checkpoint_every;
  opt.cache_dir = resolve_cache_dir("");
  opt.on_step = [&](const TrainState& s) {
    if (log_every > 0 && s.step % log_every == 0) {
      const auto& r = s.log.back();
      std::printf("step %6lld epoch %4d recon %.6f length %.4f sep %.4f total %.6f\n",
                  static_cast<long long>(s.step), r.epoch, r.parts.recon, r.parts.length,
                  r.parts.separation, r.total);
      std::fflush(stdout);
    }
  };
  const TrainRunResult res = run_training(rc, opt);
  if (res.up_to_date) {
    std::printf("run %s already complete at step %lld (config %s)\n", rc.run_dir.c_str(),
                static_cast<long long>(res.state.step), res.config_hash.c_str());
  } else {
    std::printf("trained to step %lld in %.1f s%s; run dir %s\n", static_cast<long long>(res.state.step),
                res.seconds, res.resumed ? " (resumed)" : "", rc.run_dir.c_str());
  }
  return 0;
}

// ---- infer ----------------------------------------------------------------

int cmd_infer(const std::string& run, const std::string& data, std::string out, int threads) {
  set_threads(threads);
  RunConfig rc = load_run_dir_config(run);
  if (!data.empty()) rc.dataset_dir = data;
  const std::vector<CameraModel> cams = load_dataset(rc.dataset_dir).cameras;
  const TrainState st = load_checkpoint(run_checkpoint_path(run), config_hash(rc.train));
  const Model model(cams, rc.train);
  const auto recs = infer_all(model, st.params);
  if (out.empty()) out = (fs::path(run) / "keypoints.jsonl").string();
  write_keypoints_jsonl(out, recs);
  std::printf("wrote %zu frames, %zu active edges to %s\n", recs.size(),
              recs.empty() ? size_t{0} : recs[0].edges.size(), out.c_str());
  return 0;
}

// ---- triangulate ----------------------------------------------------------

int cmd_triangulate(const std::string& kp2d, const std::string& cameras, const std::string& out) {
  const auto cams = load_cameras(cameras);
  const auto Ps = projection_matrices(cams);
  const auto recs = read_keypoints2d_jsonl(kp2d);
  std::vector<KeypointRecord> result;
  int degenerate = 0;
  for (const auto& r : recs) {
    if (r.points.size() != cams.size()) {
      throw ValidationError(kp2d + ": frame " + std::to_string(r.t) + " has " +
                            std::to_string(r.points.size()) + " views, cameras file has " +
                            std::to_string(cams.size()));
    }
    const size_t J = r.points.empty() ? 0 : r.points[0].size();
    KeypointRecord k;
    k.t = r.t;
    for (size_t j = 0; j < J; ++j) {
      std::vector<Observation> obs;
      for (size_t v = 0; v < r.points.size(); ++v) {
        if (r.points[v].size() != J) throw ValidationError(kp2d + ": ragged joint lists");
        if (!r.points[v][j]) continue;
        const double w = r.confidence.empty() ? 1.0 : r.confidence.at(v).at(j);
        obs.push_back({static_cast<int>(v), *r.points[v][j], w});
      }
      Triangulation tri;
      try {
        tri = triangulate_dlt(Ps, obs);
      } catch (const GeometryError& e) {
        throw GeometryError("frame " + std::to_string(r.t) + " joint " + std::to_string(j) + ": " +
                            e.what());
      }
      if (tri.degenerate) {
        ++degenerate;
        std::fprintf(stderr, "warning: frame %d joint %zu: %s\n", r.t, j, tri.warning.c_str());
      }
      k.keypoints_mm.push_back(tri.point);
    }
    result.push_back(std::move(k));
  }
  write_keypoints_jsonl(out, result);
  std::printf("triangulated %zu frames (%d degenerate points) to %s\n", result.size(), degenerate,
              out.c_str());
  return 0;
}

// ---- eval -----------------------------------------------------------------

int cmd_eval(const std::string& keypoints, std::string gt_path, const std::string& data, int test_from,
             const std::string& regressor, bool global_shift, const std::string& out_json,
             const std::string& out_csv) {
  std::vector<std::string> names;
  std::optional<Dataset> ds;
  if (!data.empty()) {
    ds = load_dataset(data);
    names = ds->manifest.at("skeleton").at("joints").get<std::vector<std::string>>();
    if (gt_path.empty()) gt_path = (fs::path(data) / "gt_keypoints.jsonl").string();
  }
  if (gt_path.empty()) throw ValidationError("eval: need --gt or --data");
  const auto disc = to_poses(read_keypoints_jsonl(keypoints));
  const auto gt = read_gt_jsonl(gt_path);
  Split split;
  if (test_from > 0) {
    split = split_at(static_cast<int>(gt.size()), test_from);
  } else if (ds) {
    split = split_by_segment(ds->segments);
  } else {
    throw ValidationError("eval: need --test-from or --data to define the held-out frames");
  }
  EvalOptions opt;
  if (regressor == "mlp") {
    opt.regressor = RegressorKind::kMlp;
  } else if (regressor != "linear") {
    throw ValidationError("eval: unknown regressor '" + regressor + "'");
  }
  opt.mean_shift.per_frame = !global_shift;
  const EvalReport rep = evaluate_split(disc, gt, split, opt);
  std::cout << report_table(rep, names);
  if (!out_json.empty()) {
    std::ofstream o(out_json);
    if (!o) throw IoError("cannot write " + out_json);
    o << report_to_json(rep).dump(2) << "\n";
  }
  if (!out_csv.empty()) write_per_joint_csv(out_csv, rep, names);
  return 0;
}

// ---- gradcheck ------------------------------------------------------------

int cmd_gradcheck(const GradCheckOptions& opt) {
  const auto results = run_gradient_suite(opt);
  std::printf("%-22s %7s %14s %9s %s\n", "op", "probes", "max rel err", "seconds", "result");
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%-22s %7d %14.3e %9.3f %s\n", r.op.c_str(), r.probes, r.max_rel_error, r.seconds,
                r.passed ? "pass" : "FAIL");
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

// ---- render-edges ---------------------------------------------------------

int cmd_render_edges(const std::string& keypoints, const std::string& cameras, int t,
                     const std::string& out_dir, const std::string& format, int size, double sigma) {
  if (format != "png" && format != "pgm") throw ValidationError("render-edges: format must be png or pgm");
  const auto cams = load_cameras(cameras);
  const auto recs = read_keypoints_jsonl(keypoints);
  const KeypointRecord* rec = nullptr;
  for (const auto& r : recs) {
    if (r.t == t) rec = &r;
  }
  if (rec == nullptr) throw ValidationError(keypoints + ": no record for t = " + std::to_string(t));
  const int J = static_cast<int>(rec->keypoints_mm.size());
  EdgeWeights w(J, 0.0);
  for (const auto& e : rec->edges) {
    if (e.m < 0 || e.n < 0 || e.m >= J || e.n >= J || e.m == e.n) {
      throw ValidationError(keypoints + ": bad edge (" + std::to_string(e.m) + "," + std::to_string(e.n) + ")");
    }
    w.set(e.m, e.n, e.w);
  }
  EdgeConfig ec;
  ec.sigma = sigma;
  ec.height = ec.width = size;
  fs::create_directories(out_dir);
  for (size_t v = 0; v < cams.size(); ++v) {
    std::vector<Vec2> uv;
    for (const auto& X : rec->keypoints_mm) {
      uv.push_back(normalize_pixel(project(cams[v].P(), X), cams[v].width(), cams[v].height()));
    }
    const EdgeMap m = aggregate_edges(uv, w, ec);
    Frame f(size, size, 1);
    for (size_t i = 0; i < m.values.size(); ++i) f.values[i] = std::min(1.0, m.values[i]);
    const std::string path =
        (fs::path(out_dir) / ("edges_view" + std::to_string(v) + "_t" + std::to_string(t) + "." + format))
            .string();
    write_image(path, f);
    std::printf("%s\n", path.c_str());
  }
  return 0;
}

}  // namespace
}  // namespace mvkd

int main(int argc, char** argv) {
  using namespace mvkd;
  CLI::App app{"mvkd: multi-view 3D keypoint discovery"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic multi-camera dataset");
  ConfigFlags synth_flags;
  std::string synth_out, synth_preset;
  std::optional<int> synth_views, synth_frames, synth_traj;
  std::optional<uint64_t> synth_seed;
  synth->add_option("--out", synth_out, "Output dataset directory")->required();
  synth->add_option("--config", synth_flags.file, "JSON run config; its scene block is used");
  synth->add_option("--preset", synth_preset, "Skeleton preset (biped, quadruped)");
  synth->add_option("--views", synth_views, "Camera count");
  synth->add_option("--frames", synth_frames, "Total frames");
  synth->add_option("--trajectories", synth_traj, "Independent motion segments");
  synth->add_option("--seed", synth_seed, "Scene seed");
  synth->add_option("--set", synth_flags.sets, "Override a scene field: scene.key=value");

  // targets
  auto* targets = app.add_subcommand("targets", "Precompute dissimilarity targets into the cache");
  ConfigFlags tg_flags;
  std::string tg_data, tg_cache;
  targets->add_option("--data", tg_data, "Dataset directory")->required();
  targets->add_option("--cache", tg_cache, "Cache directory (default $MVKD_CACHE_DIR or <data>/targets)");
  tg_flags.add_train(targets);

  // train
  auto* trn = app.add_subcommand("train", "Train the discovery model");
  ConfigFlags tr_flags;
  std::string tr_data, tr_run;
  bool tr_resume = false;
  int tr_ckpt = 250, tr_log = 100;
  trn->add_option("--data", tr_data, "Dataset directory");
  trn->add_option("--run", tr_run, "Run directory");
  trn->add_flag("--resume", tr_resume, "Continue from the run's checkpoint");
  trn->add_option("--checkpoint-every", tr_ckpt, "Checkpoint interval in steps (0 = end only)");
  trn->add_option("--log-every", tr_log, "Print losses every N steps (0 = quiet)");
  tr_flags.add_train(trn);

  // infer
  auto* inf = app.add_subcommand("infer", "Write per-frame 3D keypoints and active edges");
  std::string in_run, in_data, in_out;
  int in_threads = 0;
  inf->add_option("--run", in_run, "Run directory")->required();
  inf->add_option("--data", in_data, "Dataset directory (default: the run's)");
  inf->add_option("--out", in_out, "Output JSONL (default <run>/keypoints.jsonl)");
  inf->add_option("--threads", in_threads, "Worker threads");

  // triangulate
  auto* tri = app.add_subcommand("triangulate", "Triangulate per-view 2D keypoints");
  std::string tri_kp, tri_cams, tri_out;
  tri->add_option("--keypoints2d", tri_kp, "2D keypoints JSONL")->required();
  tri->add_option("--cameras", tri_cams, "Cameras JSON")->required();
  tri->add_option("--out", tri_out, "Output 3D keypoints JSONL")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Regress to ground truth and report MPJPE / PMPJPE");
  std::string ev_kp, ev_gt, ev_data, ev_json, ev_csv, ev_reg = "linear";
  int ev_test_from = 0;
  bool ev_global = false;
  ev->add_option("--keypoints", ev_kp, "Discovered keypoints JSONL")->required();
  ev->add_option("--gt", ev_gt, "Ground-truth JSONL (default <data>/gt_keypoints.jsonl)");
  ev->add_option("--data", ev_data, "Dataset directory; its last trajectory is the test split");
  ev->add_option("--test-from", ev_test_from, "First test frame (overrides the trajectory split)");
  ev->add_option("--regressor", ev_reg, "linear or mlp");
  ev->add_flag("--global-shift", ev_global, "Remove one global mean offset instead of per frame");
  ev->add_option("--json", ev_json, "Write the report as JSON");
  ev->add_option("--csv", ev_csv, "Write per-joint errors as CSV");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
  GradCheckOptions gc_opt;
  gc->add_option("--probes", gc_opt.probes, "Probes per op");
  gc->add_option("--seed", gc_opt.seed, "Probe seed");
  gc->add_option("--tolerance", gc_opt.tolerance, "Max relative error");

  // render-edges
  auto* re = app.add_subcommand("render-edges", "Render the edge map of one frame in every view");
  std::string re_kp, re_cams, re_out, re_fmt = "png";
  int re_t = 0, re_size = 64;
  double re_sigma = 0.02;
  re->add_option("--keypoints", re_kp, "3D keypoints JSONL with edges")->required();
  re->add_option("--cameras", re_cams, "Cameras JSON")->required();
  re->add_option("--t", re_t, "Frame index");
  re->add_option("--out-dir", re_out, "Output directory")->required();
  re->add_option("--format", re_fmt, "png or pgm");
  re->add_option("--size", re_size, "Raster size");
  re->add_option("--sigma", re_sigma, "Line thickness in normalized units");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      return cmd_synth(synth_out, synth_flags, synth_views, synth_frames, synth_traj, synth_seed,
                       synth_preset);
    }
    if (targets->parsed()) return cmd_targets(tg_data, tg_flags, tg_cache);
    if (trn->parsed()) return cmd_train(tr_data, tr_run, tr_flags, tr_resume, tr_ckpt, tr_log);
    if (inf->parsed()) return cmd_infer(in_run, in_data, in_out, in_threads);
    if (tri->parsed()) return cmd_triangulate(tri_kp, tri_cams, tri_out);
    if (ev->parsed()) {
      return cmd_eval(ev_kp, ev_gt, ev_data, ev_test_from, ev_reg, ev_global, ev_json, ev_csv);
    }
    if (gc->parsed()) return cmd_gradcheck(gc_opt);
    if (re->parsed()) return cmd_render_edges(re_kp, re_cams, re_t, re_out, re_fmt, re_size, re_sigma);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
