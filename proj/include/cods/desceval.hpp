#pragma once

#include "cods/descriptor_train.hpp"

namespace cods {

// A descriptor source under evaluation: anything that maps a frame to a dense
// per-pixel descriptor field (a trained net, a random net, or an oracle).
using DescriptorFn = std::function<DescriptorMap(const RGBDFrame&)>;

inline DescriptorFn descriptor_fn_from_net(DescriptorNet& net) {
  return [&net](const RGBDFrame& f) { return net.infer(f); };
}

// Oracle that embeds each pixel's 3D world coordinate; its nearest neighbour
// in descriptor space is the reprojected ground truth by construction.
inline DescriptorFn world_coords_descriptor_fn() {
  return [](const RGBDFrame& f) {
    DescriptorMap m{f.depth.width(), f.depth.height(), 3, {}};
    m.values.resize(static_cast<size_t>(m.width) * m.height * 3, 1e6f);
    for (int y = 0; y < m.height; ++y)
      for (int x = 0; x < m.width; ++x)
        if (f.valid_depth(x, y))
          for (int d = 0; d < 3; ++d)
            m.values[(static_cast<size_t>(d) * m.height + y) * m.width + x] =
                f.world_coords.at(x, y)[d];
    return m;
  };
}

struct MatchingErrorResult {
  std::vector<double> errors;     // per sample, pixels normalized by the diagonal
  double mean_normalized = 0;     // mean of `errors`
  int attempted = 0;              // co-visibility candidates drawn
  int evaluated = 0;              // samples with a valid ground-truth match
};

// Matching-error distance between two views: for object pixels in frame_a with
// a ground-truth correspondence in frame_b, measure the pixel distance between
// the descriptor-space best match and that ground truth, normalized by the
// image diagonal.
inline MatchingErrorResult matching_error_distance(const RGBDFrame& frame_a,
                                                   const RGBDFrame& frame_b,
                                                   const DescriptorFn& descriptor, int n_samples,
                                                   Rng& rng, double occlusion_tol = 0.003) {
  MatchingErrorResult out;
  const auto obj_a = detail::mask_pixels(frame_a, true);
  if (obj_a.empty()) return out;
  const DescriptorMap map_a = descriptor(frame_a);
  const DescriptorMap map_b = descriptor(frame_b);
  const double diagonal = std::hypot(frame_b.depth.width(), frame_b.depth.height());

  const int budget = n_samples * 10;
  for (int i = 0; i < budget && out.evaluated < n_samples; ++i) {
    ++out.attempted;
    const Eigen::Vector2i u_a = obj_a[rng.uniform_int(0, static_cast<int>(obj_a.size()) - 1)];
    const auto truth = find_correspondence(u_a, frame_a, frame_b, occlusion_tol);
    if (!truth) continue;
    const BestMatch bm = best_match(map_a, u_a, map_b);
    out.errors.push_back((bm.pixel - *truth).cast<double>().norm() / diagonal);
    ++out.evaluated;
  }
  for (const double e : out.errors) out.mean_normalized += e;
  if (!out.errors.empty()) out.mean_normalized /= out.errors.size();
  return out;
}

// Monte-Carlo floor: the expected error of predicting a uniformly random
// pixel, under the same ground-truth sampling as matching_error_distance.
inline MatchingErrorResult random_pixel_baseline(const RGBDFrame& frame_a,
                                                 const RGBDFrame& frame_b, int n_samples,
                                                 Rng& rng, double occlusion_tol = 0.003) {
  MatchingErrorResult out;
  const auto obj_a = detail::mask_pixels(frame_a, true);
  if (obj_a.empty()) return out;
  const int W = frame_b.depth.width(), H = frame_b.depth.height();
  const double diagonal = std::hypot(W, H);
  const int budget = n_samples * 10;
  for (int i = 0; i < budget && out.evaluated < n_samples; ++i) {
    ++out.attempted;
    const Eigen::Vector2i u_a = obj_a[rng.uniform_int(0, static_cast<int>(obj_a.size()) - 1)];
    const auto truth = find_correspondence(u_a, frame_a, frame_b, occlusion_tol);
    if (!truth) continue;
    const Eigen::Vector2i guess(rng.uniform_int(0, W - 1), rng.uniform_int(0, H - 1));
    out.errors.push_back((guess - *truth).cast<double>().norm() / diagonal);
    ++out.evaluated;
  }
  for (const double e : out.errors) out.mean_normalized += e;
  if (!out.errors.empty()) out.mean_normalized /= out.errors.size();
  return out;
}

// Aggregate over a dataset: draw view pairs from each scene and pool samples.
inline MatchingErrorResult dataset_matching_error(const std::string& dataset_root,
                                                  const DescriptorFn& descriptor,
                                                  int pairs_per_scene, int samples_per_pair,
                                                  Rng& rng, bool random_baseline = false,
                                                  int view_min = 0) {
  const nlohmann::json manifest = load_manifest(dataset_root);
  const int n_scenes = manifest.at("n_scenes");
  const int views = manifest.at("views_per_scene");
  if (views - view_min < 2)
    throw DomainError("dataset_matching_error: need two views at or past view_min");
  MatchingErrorResult pooled;
  for (int s = 0; s < n_scenes; ++s) {
    for (int p = 0; p < pairs_per_scene; ++p) {
      const int va = rng.uniform_int(view_min, views - 1);
      int vb = rng.uniform_int(view_min, views - 2);
      if (vb >= va) ++vb;
      const fs::path dir = fs::path(dataset_root) / scene_dir_name(s);
      const RGBDFrame fa = load_frame(dir, view_stem(va));
      const RGBDFrame fb = load_frame(dir, view_stem(vb));
      const MatchingErrorResult r =
          random_baseline ? random_pixel_baseline(fa, fb, samples_per_pair, rng)
                          : matching_error_distance(fa, fb, descriptor, samples_per_pair, rng);
      pooled.errors.insert(pooled.errors.end(), r.errors.begin(), r.errors.end());
      pooled.attempted += r.attempted;
      pooled.evaluated += r.evaluated;
    }
  }
  for (const double e : pooled.errors) pooled.mean_normalized += e;
  if (!pooled.errors.empty()) pooled.mean_normalized /= pooled.errors.size();
  return pooled;
}

// --- input-configuration sweep ---

struct SweepInputConfig {
  std::string name;
  InputMode input = InputMode::rgbd;
  bool retexture_per_view = true;
};

inline std::vector<SweepInputConfig> default_sweep_configs() {
  return {{"depth", InputMode::depth, true},
          {"rgb", InputMode::rgb, true},
          {"rgbd", InputMode::rgbd, true},
          {"rgb_fixed_texture", InputMode::rgb, false},
          {"rgbd_fixed_texture", InputMode::rgbd, false}};
}

struct SweepConfig {
  std::string work_dir;               // datasets, checkpoints, csv all land here
  DatasetConfig dataset = DatasetConfig::desk_scale();
  DescriptorTrainConfig train;        // dataset_root/out_dir/net filled per config
  std::vector<SweepInputConfig> configs = default_sweep_configs();
  std::vector<Split> eval_splits = {Split::train, Split::test, Split::novel};
  int eval_pairs_per_scene = 1;
  int eval_samples_per_pair = 10;
  int eval_scenes = 5;                // per split
  int eval_views = 4;
  uint64_t seed = 0;
};

// Trains one descriptor per input configuration on a shared generation recipe
// and reports the mean matching-error distance per (config, split), plus a
// random-pixel floor per split. Writes a CSV and returns its rows.
inline std::vector<std::string> input_config_sweep(const SweepConfig& cfg) {
  fs::create_directories(cfg.work_dir);
  std::vector<std::string> rows;
  rows.push_back("config,input,retexture_per_view,split,mean_error,samples");

  // evaluation datasets, one per split, shared by every config
  std::vector<std::string> eval_roots;
  for (const Split split : cfg.eval_splits) {
    DatasetConfig d = cfg.dataset;
    d.root = (fs::path(cfg.work_dir) / ("eval_" + std::string(split_name(split)))).string();
    d.split = split;
    d.n_scenes = cfg.eval_scenes;
    d.n_single_object_scenes = 0;
    d.views_per_scene = cfg.eval_views;
    d.seed = Rng::splitmix(cfg.seed + 1000 + static_cast<int>(split));
    if (!fs::exists(fs::path(d.root) / "manifest.json")) generate_descriptor_dataset(d);
    eval_roots.push_back(d.root);
  }

  for (const SweepInputConfig& ic : cfg.configs) {
    DatasetConfig d = cfg.dataset;
    d.root = (fs::path(cfg.work_dir) / ("train_" + ic.name)).string();
    d.split = Split::train;
    d.retexture_per_view = ic.retexture_per_view;
    d.seed = Rng::splitmix(cfg.seed + 1);  // same scenes across configs
    if (!fs::exists(fs::path(d.root) / "manifest.json")) generate_descriptor_dataset(d);

    DescriptorTrainConfig tc = cfg.train;
    tc.dataset_root = d.root;
    tc.out_dir = (fs::path(cfg.work_dir) / ("net_" + ic.name)).string();
    tc.net = DescriptorNetConfig::desk_scale(ic.input);
    tc.seed = cfg.seed;
    const DescriptorTrainResult tr = train_descriptor(tc);
    DescriptorNet net = DescriptorNet::load(tr.checkpoint_path);

    for (size_t i = 0; i < cfg.eval_splits.size(); ++i) {
      Rng rng(Rng::splitmix(cfg.seed + 77 + i));
      const MatchingErrorResult r =
          dataset_matching_error(eval_roots[i], descriptor_fn_from_net(net),
                                 cfg.eval_pairs_per_scene, cfg.eval_samples_per_pair, rng);
      rows.push_back(ic.name + "," + input_mode_name(ic.input) + "," +
                     (ic.retexture_per_view ? "true" : "false") + "," +
                     split_name(cfg.eval_splits[i]) + "," + std::to_string(r.mean_normalized) +
                     "," + std::to_string(r.evaluated));
    }
  }

  for (size_t i = 0; i < cfg.eval_splits.size(); ++i) {
    Rng rng(Rng::splitmix(cfg.seed + 77 + i));
    const MatchingErrorResult r = dataset_matching_error(
        eval_roots[i], {}, cfg.eval_pairs_per_scene, cfg.eval_samples_per_pair, rng, true);
    rows.push_back(std::string("random_pixel,none,true,") + split_name(cfg.eval_splits[i]) + "," +
                   std::to_string(r.mean_normalized) + "," + std::to_string(r.evaluated));
  }

  std::ofstream out(fs::path(cfg.work_dir) / "input_config_sweep.csv");
  for (const auto& row : rows) out << row << "\n";
  return rows;
}

}  // namespace cods
