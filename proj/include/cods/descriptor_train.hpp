#pragma once

#include <functional>
#include <map>

#include "cods/dataset.hpp"
#include "cods/descriptor.hpp"

namespace cods {

struct DescriptorTrainConfig {
  std::string dataset_root;
  std::string out_dir;
  DescriptorNetConfig net = DescriptorNetConfig::desk_scale();
  int iterations = 5000;
  float lr = 1e-2f;            // swept at this scale; 1e-1 diverges, 3e-4 undertrains
  float lr_decay = 0.9f;
  int lr_decay_every = 5000;
  float weight_decay = 1e-4f;
  bool pooled_nonmatch = false;
  PairSamplingConfig pairs;
  int checkpoint_every = 1000;
  int log_every = 50;
  uint64_t seed = 0;
  int frame_cache_capacity = 512;
  bool use_dataset_depth_stats = true;  // override net depth_mean/std from manifest
  int max_views = 0;  // train on the first N views per scene only (0 = all)
};

struct DescriptorTrainResult {
  std::string checkpoint_path;
  std::string log_path;
  float final_loss = 0;
  int iterations_run = 0;
  int skipped_pairs = 0;  // view pairs with no co-visible object pixels
};

// Loads dataset frames on demand with a bounded cache keyed by (scene, view).
class FrameCache {
 public:
  FrameCache(fs::path root, int capacity) : root_(std::move(root)), capacity_(capacity) {}

  const RGBDFrame& get(int scene, int view) {
    const auto key = std::make_pair(scene, view);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    if (static_cast<int>(cache_.size()) >= capacity_) cache_.clear();
    return cache_.emplace(key, load_frame(root_ / scene_dir_name(scene), view_stem(view)))
        .first->second;
  }

 private:
  fs::path root_;
  int capacity_;
  std::map<std::pair<int, int>, RGBDFrame> cache_;
};

// Single-worker, deterministic training loop: each iteration draws one scene
// and two distinct views, samples pixel pairs, and takes one Adam step on the
// contrastive loss. Periodic checkpoints survive an aborting exception.
inline DescriptorTrainResult train_descriptor(
    const DescriptorTrainConfig& cfg,
    const std::function<void(int, float, float, float)>& progress = {}) {
  const nlohmann::json manifest = load_manifest(cfg.dataset_root);
  const int n_scenes = manifest.at("n_scenes");
  int views = manifest.at("views_per_scene");
  if (cfg.max_views > 0) views = std::min(views, cfg.max_views);
  if (n_scenes < 1 || views < 2)
    throw DomainError("train_descriptor: dataset needs at least one scene with two views");

  DescriptorNetConfig net_cfg = cfg.net;
  if (cfg.use_dataset_depth_stats) {
    net_cfg.depth_mean = manifest.at("depth_mean");
    net_cfg.depth_std = std::max(1e-3, double(manifest.at("depth_std")));
  }
  DescriptorNet net(net_cfg, cfg.seed);
  nn::Adam opt({.lr = cfg.lr, .weight_decay = cfg.weight_decay});
  Rng rng(Rng::splitmix(cfg.seed + 0x5eed));
  FrameCache frames(cfg.dataset_root, cfg.frame_cache_capacity);

  fs::create_directories(cfg.out_dir);
  DescriptorTrainResult result;
  result.checkpoint_path = (fs::path(cfg.out_dir) / "descriptor.ckpt").string();
  result.log_path = (fs::path(cfg.out_dir) / "descriptor_train.csv").string();
  std::ofstream log(result.log_path);
  log << "iteration,lr,loss,match_term,nonmatch_term\n";

  auto save = [&](int iter) {
    net.save(result.checkpoint_path,
             {{"iteration", iter}, {"seed", cfg.seed}, {"dataset", cfg.dataset_root}});
  };

  try {
    for (int iter = 0; iter < cfg.iterations; ++iter) {
      const float lr =
          cfg.lr * std::pow(cfg.lr_decay, static_cast<float>(iter / cfg.lr_decay_every));
      opt.set_lr(lr);

      const int scene = rng.uniform_int(0, n_scenes - 1);
      const int va = rng.uniform_int(0, views - 1);
      int vb = rng.uniform_int(0, views - 2);
      if (vb >= va) ++vb;
      const RGBDFrame& fa = frames.get(scene, va);
      const RGBDFrame& fb = frames.get(scene, vb);
      const PixelMatchSet pairs = sample_training_pairs(fa, fb, cfg.pairs, rng);
      result.iterations_run = iter + 1;
      if (pairs.empty_match_flag) {
        ++result.skipped_pairs;
        continue;
      }

      nn::Graph g;
      auto xa = make_input_tensor(fa, net_cfg.input, net_cfg.depth_mean, net_cfg.depth_std);
      auto xb = make_input_tensor(fb, net_cfg.input, net_cfg.depth_mean, net_cfg.depth_std);
      auto da = net.forward(g, xa).descriptor_map;
      auto db = net.forward(g, xb).descriptor_map;
      auto [loss, lm, lnm] =
          contrastive_loss(g, da, db, pairs, net_cfg.margin, cfg.pooled_nonmatch);
      net.params().zero_grad();
      g.backward(loss);
      opt.step(net.params());

      result.final_loss = loss->v[0];
      if (iter % cfg.log_every == 0 || iter + 1 == cfg.iterations)
        log << iter << "," << lr << "," << loss->v[0] << "," << lm << "," << lnm << "\n"
            << std::flush;
      if (progress) progress(iter, loss->v[0], lm, lnm);
      if ((iter + 1) % cfg.checkpoint_every == 0) save(iter + 1);
    }
  } catch (...) {
    save(result.iterations_run);  // keep the last consistent state
    throw;
  }
  save(result.iterations_run);
  return result;
}

}  // namespace cods
