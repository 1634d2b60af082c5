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

#include "mvkd/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "mvkd/error.hpp"
#include "mvkd/targets.hpp"

namespace mvkd {

namespace fs = std::filesystem;

std::string resolve_cache_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  const char* env = std::getenv("MVKD_CACHE_DIR");
  return env != nullptr ? std::string(env) : std::string();
}

std::string run_config_path(const std::string& run_dir) { return (fs::path(run_dir) / "config.json").string(); }
std::string run_checkpoint_path(const std::string& run_dir) {
  return (fs::path(run_dir) / "checkpoint.bin").string();
}
std::string run_loss_path(const std::string& run_dir) { return (fs::path(run_dir) / "loss.csv").string(); }

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot write: " + path);
    out << text;
  }
  fs::rename(tmp, path);
}

void checkpoint(const std::string& run_dir, const TrainState& s, const std::string& hash) {
  const std::string path = run_checkpoint_path(run_dir);
  save_checkpoint(path + ".tmp", s, hash);
  fs::rename(path + ".tmp", path);
  write_loss_csv(run_loss_path(run_dir), s.log);
}

}  // namespace

RunConfig load_run_dir_config(const std::string& run_dir) {
  const std::string path = run_config_path(run_dir);
  if (!fs::exists(path)) throw IoError("no resolved config in run dir: " + path);
  return load_run_config(path);
}

TrainRunResult run_training(const RunConfig& rc, const TrainRunOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  rc.train.validate();
  if (rc.run_dir.empty()) throw ValidationError("train: run_dir is empty");
  const Dataset ds = load_dataset(rc.dataset_dir);

  TrainRunResult out;
  out.config_hash = config_hash(rc.train);
  fs::create_directories(rc.run_dir);
  const std::string hash_path = (fs::path(rc.run_dir) / "config.sha256").string();
  if (fs::exists(hash_path)) {
    std::string old = read_text(hash_path);
    while (!old.empty() && (old.back() == '\n' || old.back() == ' ')) old.pop_back();
    if (old != out.config_hash) {
      throw ValidationError("run dir " + rc.run_dir + " holds a different config (hash " + old +
                            "); choose another run dir");
    }
  }
  nlohmann::json resolved = rc;
  write_text(run_config_path(rc.run_dir), resolved.dump(2) + "\n");
  write_text(hash_path, out.config_hash + "\n");

  Model model(ds.cameras, rc.train);
  const std::string ckpt = run_checkpoint_path(rc.run_dir);
  if (fs::exists(ckpt)) {
    TrainState prev = load_checkpoint(ckpt, out.config_hash);
    if (prev.step >= rc.train.steps) {
      out.state = std::move(prev);
      out.up_to_date = true;
      if (!fs::exists(run_loss_path(rc.run_dir))) write_loss_csv(run_loss_path(rc.run_dir), out.state.log);
      return out;
    }
    if (!opt.resume) {
      throw ValidationError("run dir " + rc.run_dir + " has a partial checkpoint at step " +
                            std::to_string(prev.step) + "; pass --resume to continue");
    }
    out.state = std::move(prev);
    out.resumed = true;
  } else {
    out.state = init_train_state(model, ds.frames, rc.train);
  }

  const auto pairs = training_pairs(ds.segments, rc.train.frame_gap);
  TargetOptions to;
  to.raster = rc.train.raster_size;
  to.dissimilarity = rc.train.dissimilarity();
  to.cache_dir = opt.cache_dir;
  const TargetSet targets = build_targets(ds, pairs, to);

  TrainHooks hooks;
  hooks.on_step = [&](const TrainState& s) {
    if (opt.checkpoint_every > 0 && s.step % opt.checkpoint_every == 0 && s.step < rc.train.steps) {
      checkpoint(rc.run_dir, s, out.config_hash);
    }
    if (opt.on_step) opt.on_step(s);
  };
  hooks.on_divergence = [&](const TrainState& s) {
    const std::string path = (fs::path(rc.run_dir) / "diverged.bin").string();
    save_checkpoint(path, s, out.config_hash);
    write_loss_csv(run_loss_path(rc.run_dir), s.log);
  };
  train(out.state, model, targets, pairs, rc.train, hooks);
  checkpoint(rc.run_dir, out.state, out.config_hash);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<KeypointRecord> infer_all(const Model& model, const ParamSet& params) {
  std::vector<EdgeRecord> edges;
  for (const auto& [m, n] : active_edges(params.edges)) edges.push_back({m, n, params.edges(m, n)});
  std::vector<KeypointRecord> out;
  for (int t = 0; t < params.frames; ++t) {
    out.push_back({t, model.infer(params, t).points, edges});
  }
  return out;
}

Split split_by_segment(const std::vector<Segment>& segments) {
  if (segments.size() < 2) throw ValidationError("split: need at least two trajectories");
  Split s;
  for (size_t i = 0; i < segments.size(); ++i) {
    auto& dst = i + 1 == segments.size() ? s.test : s.train;
    for (int t = segments[i].begin; t < segments[i].end; ++t) dst.push_back(t);
  }
  return s;
}

Split split_at(int frames, int test_from) {
  if (test_from <= 0 || test_from >= frames) {
    throw ValidationError("split: test_from must lie inside (0, " + std::to_string(frames) + ")");
  }
  Split s;
  for (int t = 0; t < frames; ++t) (t < test_from ? s.train : s.test).push_back(t);
  return s;
}

EvalReport evaluate_split(const std::vector<Pose>& disc, const std::vector<Pose>& gt,
                          const Split& split, const EvalOptions& opt) {
  if (disc.size() != gt.size()) {
    throw ValidationError("eval: " + std::to_string(disc.size()) + " discovered frames vs " +
                          std::to_string(gt.size()) + " ground-truth frames");
  }
  auto pick = [](const std::vector<Pose>& src, const std::vector<int>& idx) {
    std::vector<Pose> out;
    for (int t : idx) {
      if (t < 0 || t >= static_cast<int>(src.size())) throw ValidationError("eval: split index out of range");
      out.push_back(src[t]);
    }
    return out;
  };
  return evaluate(pick(disc, split.train), pick(gt, split.train), pick(disc, split.test),
                  pick(gt, split.test), opt);
}

}  // namespace mvkd
