// Command-line front end for the CODs pipeline: dataset generation,
// descriptor training/evaluation, suction policy training/evaluation, the
// ablation suites, and image dumps for inspection.

#include <CLI11.hpp>

#include <iostream>

#include "cods/desceval.hpp"
#include "cods/metrics.hpp"
#include "cods/viz.hpp"

using namespace cods;

namespace {

Split parse_split(const std::string& s) {
  const auto split = split_from_name(s);
  if (!split) throw CLI::ValidationError("split", "unknown split: " + s);
  return *split;
}

void print_metrics(const std::string& label, const PickingMetrics& m) {
  std::cout << label << ": episodes=" << m.episodes << " completion=" << m.completion_rate
            << " avg_picked=" << m.avg_picked << " success_rate=" << m.success_rate
            << " success_rate_all=" << m.success_rate_all << " avg_reward=" << m.avg_reward
            << " unsafe_rate=" << m.unsafe_rate << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"CODs: dense correspondence descriptors for suction bin picking"};
  app.require_subcommand(1);

  // --- gen-data ---
  auto* gen = app.add_subcommand("gen-data", "Generate an RGB-D correspondence dataset");
  DatasetConfig dcfg = DatasetConfig::desk_scale();
  std::string gen_split = "train";
  bool gen_full = false, gen_fixed_texture = false;
  gen->add_option("--root", dcfg.root, "output directory")->required();
  gen->add_flag("--full", gen_full, "full-scale recipe (170 scenes, 80 views, 256px)");
  gen->add_option("--scenes", dcfg.n_scenes);
  gen->add_option("--single-object-scenes", dcfg.n_single_object_scenes);
  gen->add_option("--min-objects", dcfg.min_objects);
  gen->add_option("--max-objects", dcfg.max_objects);
  gen->add_option("--views", dcfg.views_per_scene);
  gen->add_option("--width", dcfg.width);
  gen->add_option("--height", dcfg.height);
  gen->add_option("--split", gen_split, "train|test|novel");
  gen->add_flag("--fixed-texture", gen_fixed_texture, "one texture draw per scene, not per view");
  gen->add_option("--seed", dcfg.seed);
  gen->callback([&] {
    if (gen_full) {
      DatasetConfig full;
      full.root = dcfg.root;
      full.seed = dcfg.seed;
      dcfg = full;
    }
    dcfg.split = parse_split(gen_split);
    dcfg.retexture_per_view = !gen_fixed_texture;
    generate_descriptor_dataset(dcfg);
    std::cout << "wrote " << dcfg.n_scenes << " scenes x " << dcfg.views_per_scene
              << " views to " << dcfg.root << "\n";
  });

  // --- train-cods ---
  auto* tc = app.add_subcommand("train-cods", "Train a dense descriptor network");
  DescriptorTrainConfig tcfg;
  std::string tc_input = "rgbd";
  tc->add_option("--data", tcfg.dataset_root, "dataset root")->required();
  tc->add_option("--out", tcfg.out_dir, "output directory")->required();
  tc->add_option("--input", tc_input, "rgb|depth|rgbd");
  tc->add_option("--iterations", tcfg.iterations);
  tc->add_option("--lr", tcfg.lr);
  tc->add_option("--weight-decay", tcfg.weight_decay);
  tc->add_flag("--pooled-nonmatch", tcfg.pooled_nonmatch,
               "normalize non-match classes jointly instead of per class");
  tc->add_option("--descriptor-dim", tcfg.net.descriptor_dim);
  tc->add_option("--margin", tcfg.net.margin);
  tc->add_option("--seed", tcfg.seed);
  tc->callback([&] {
    tcfg.net = DescriptorNetConfig::desk_scale(input_mode_from_name(tc_input));
    const DescriptorTrainResult r =
        train_descriptor(tcfg, [](int it, float loss, float match, float nonmatch) {
          std::cout << "iter " << it << " loss " << loss << " (match " << match << ", nonmatch "
                    << nonmatch << ")\n";
        });
    std::cout << "checkpoint: " << r.checkpoint_path << "\nfinal loss: " << r.final_loss
              << " (skipped pairs: " << r.skipped_pairs << ")\n";
  });

  // --- eval-cods ---
  auto* ec = app.add_subcommand("eval-cods", "Matching-error distance on a dataset");
  std::string ec_ckpt, ec_data;
  int ec_pairs = 2, ec_samples = 20;
  uint64_t ec_seed = 0;
  bool ec_baseline = false;
  ec->add_option("--checkpoint", ec_ckpt, "descriptor checkpoint");
  ec->add_option("--data", ec_data, "dataset root")->required();
  ec->add_option("--pairs-per-scene", ec_pairs);
  ec->add_option("--samples", ec_samples, "samples per view pair");
  ec->add_option("--seed", ec_seed);
  ec->add_flag("--random-baseline", ec_baseline, "score the uniform random-pixel floor instead");
  ec->callback([&] {
    if (!ec_baseline && ec_ckpt.empty())
      throw CLI::ValidationError("--checkpoint", "required unless --random-baseline");
    Rng rng(Rng::splitmix(ec_seed + 77));
    std::optional<DescriptorNet> net;
    DescriptorFn fn;
    if (!ec_baseline) {
      net.emplace(DescriptorNet::load(ec_ckpt));
      fn = descriptor_fn_from_net(*net);
    }
    const MatchingErrorResult r =
        dataset_matching_error(ec_data, fn, ec_pairs, ec_samples, rng, ec_baseline);
    std::cout << (ec_baseline ? "random_pixel" : ec_ckpt) << ": mean_error=" << r.mean_normalized
              << " samples=" << r.evaluated << "/" << r.attempted << " attempted\n";
  });

  // --- sweep ---
  auto* sw = app.add_subcommand("sweep", "Input-configuration sweep for the descriptor");
  SweepConfig scfg;
  sw->add_option("--work-dir", scfg.work_dir)->required();
  sw->add_option("--iterations", scfg.train.iterations);
  sw->add_option("--scenes", scfg.dataset.n_scenes);
  sw->add_option("--views", scfg.dataset.views_per_scene);
  sw->add_option("--eval-scenes", scfg.eval_scenes);
  sw->add_option("--eval-samples", scfg.eval_samples_per_pair);
  sw->add_option("--seed", scfg.seed);
  sw->callback([&] {
    for (const std::string& row : input_config_sweep(scfg)) std::cout << row << "\n";
  });

  // --- train-policy ---
  auto* tp = app.add_subcommand("train-policy", "Train a suction picking policy");
  PolicyTrainConfig pcfg;
  std::string tp_variant = "depth_only", tp_split = "train";
  tp->add_option("--out", pcfg.out_dir)->required();
  tp->add_option("--variant", tp_variant, "cods_plus_depth|depth_only|cods_only|direct_cods");
  tp->add_option("--cods", pcfg.cods_checkpoint, "descriptor checkpoint for cods variants");
  tp->add_option("--episodes", pcfg.episodes);
  tp->add_option("--workers", pcfg.workers);
  tp->add_option("--objects", pcfg.env.n_objects);
  tp->add_option("--width", pcfg.env.width);
  tp->add_option("--height", pcfg.env.height);
  tp->add_option("--split", tp_split);
  tp->add_option("--gamma", pcfg.gamma);
  tp->add_option("--lr", pcfg.lr);
  tp->add_option("--clip", pcfg.clip_eps, "surrogate clip (0 = plain actor-critic)");
  tp->add_option("--entropy", pcfg.entropy_coef);
  tp->add_option("--seed", pcfg.seed);
  tp->callback([&] {
    pcfg.net = PolicyNetConfig::desk_scale(policy_variant_from_name(tp_variant));
    pcfg.env.split = parse_split(tp_split);
    const PolicyTrainResult r = train_policy(pcfg, [&](int ep, const EpisodeStats& s) {
      if (ep % pcfg.log_every == 0)
        std::cout << "episode " << ep << " picked " << s.picked << "/" << s.initial
                  << " reward " << s.total_reward << "\n";
    });
    std::cout << "checkpoint: " << r.checkpoint_path
              << "\nwindow completion=" << r.window_completion
              << " avg_picked=" << r.window_avg_picked
              << " success_rate=" << r.window_success_rate << "\n";
  });

  // --- eval-policy ---
  auto* ep = app.add_subcommand("eval-policy", "Greedy policy evaluation in the bin environment");
  std::string ep_ckpt, ep_cods, ep_split = "test";
  BinEnvConfig ep_env;
  int ep_episodes = 20;
  uint64_t ep_seed = 0;
  bool ep_random = false;
  ep->add_option("--checkpoint", ep_ckpt, "policy checkpoint");
  ep->add_option("--cods", ep_cods, "descriptor checkpoint for cods variants");
  ep->add_option("--episodes", ep_episodes);
  ep->add_option("--objects", ep_env.n_objects);
  ep->add_option("--width", ep_env.width);
  ep->add_option("--height", ep_env.height);
  ep->add_option("--split", ep_split);
  ep->add_option("--seed", ep_seed);
  ep->add_flag("--random", ep_random, "evaluate the uniform random-pixel policy instead");
  ep->callback([&] {
    ep_env.split = parse_split(ep_split);
    if (ep_random) {
      const EvalResult r = evaluate_policy(random_pick_policy(ep_seed + 5), ep_env, ep_episodes,
                                           ep_seed);
      print_metrics("random_pixel", r.metrics);
      return;
    }
    if (ep_ckpt.empty()) throw CLI::ValidationError("--checkpoint", "required unless --random");
    std::shared_ptr<DescriptorNet> cods;
    if (!ep_cods.empty())
      cods = std::make_shared<DescriptorNet>(DescriptorNet::load(ep_cods));
    PolicyNet net = PolicyNet::load(ep_ckpt, cods);
    const EvalResult r = evaluate_policy(greedy_policy_fn(net), ep_env, ep_episodes, ep_seed);
    print_metrics(policy_variant_name(net.config().variant), r.metrics);
  });

  // --- ablate ---
  auto* ab = app.add_subcommand("ablate", "Train and evaluate every policy variant");
  AblationConfig acfg;
  ab->add_option("--work-dir", acfg.work_dir)->required();
  ab->add_option("--cods", acfg.cods_checkpoint, "descriptor checkpoint")->required();
  ab->add_option("--episodes", acfg.train.episodes, "training episodes per variant");
  ab->add_option("--workers", acfg.train.workers);
  ab->add_option("--objects", acfg.train.env.n_objects, "objects during training");
  ab->add_option("--eval-objects", acfg.eval_object_counts, "object counts to evaluate");
  ab->add_option("--eval-episodes", acfg.eval_episodes);
  ab->add_option("--seed", acfg.seed);
  ab->callback([&] {
    for (const std::string& row : run_ablation_suite(acfg)) std::cout << row << "\n";
  });

  // --- viz ---
  auto* vz = app.add_subcommand("viz", "Render inspection images");
  auto* vd = vz->add_subcommand("descriptor", "Descriptor field and a match heatmap");
  std::string vd_ckpt, vd_data, vd_out;
  int vd_scene = 0, vd_va = 0, vd_vb = 1;
  vd->add_option("--checkpoint", vd_ckpt)->required();
  vd->add_option("--data", vd_data, "dataset root")->required();
  vd->add_option("--out", vd_out, "output directory")->required();
  vd->add_option("--scene", vd_scene);
  vd->add_option("--view-a", vd_va);
  vd->add_option("--view-b", vd_vb);
  vd->callback([&] {
    DescriptorNet net = DescriptorNet::load(vd_ckpt);
    const fs::path dir = fs::path(vd_data) / scene_dir_name(vd_scene);
    const RGBDFrame fa = load_frame(dir, view_stem(vd_va));
    const RGBDFrame fb = load_frame(dir, view_stem(vd_vb));
    const DescriptorMap ma = net.infer(fa), mb = net.infer(fb);
    save_png((fs::path(vd_out) / "descriptor_a.png").string(), descriptor_rgb(ma));
    save_png((fs::path(vd_out) / "descriptor_b.png").string(), descriptor_rgb(mb));
    // heatmap for the first object pixel with a ground-truth correspondence
    Rng rng(1);
    const MatchingErrorResult err =
        matching_error_distance(fa, fb, descriptor_fn_from_net(net), 1, rng);
    for (int y = 0; y < fa.depth.height(); ++y)
      for (int x = 0; x < fa.depth.width(); ++x)
        if (fa.valid_depth(x, y) && fa.instance_mask.at(x, y) > 0 &&
            find_correspondence({x, y}, fa, fb)) {
          const BestMatch bm = best_match(ma, {x, y}, mb);
          save_png((fs::path(vd_out) / "match.png").string(),
                   match_visualization(fa, {x, y}, fb, bm));
          std::cout << "mean matching error (1 sample): " << err.mean_normalized << "\n";
          return;
        }
    std::cout << "no co-visible object pixel found for the heatmap\n";
  });
  auto* vm = vz->add_subcommand("matches", "Sampled pixel correspondences between two views");
  std::string vm_data, vm_out;
  int vm_scene = 0, vm_va = 0, vm_vb = 1;
  vm->add_option("--data", vm_data)->required();
  vm->add_option("--out", vm_out, "output png")->required();
  vm->add_option("--scene", vm_scene);
  vm->add_option("--view-a", vm_va);
  vm->add_option("--view-b", vm_vb);
  vm->callback([&] {
    const fs::path dir = fs::path(vm_data) / scene_dir_name(vm_scene);
    const RGBDFrame fa = load_frame(dir, view_stem(vm_va));
    const RGBDFrame fb = load_frame(dir, view_stem(vm_vb));
    Rng rng(1);
    const PixelMatchSet set = sample_training_pairs(fa, fb, {}, rng);
    save_png(vm_out, correspondence_image(fa, fb, set.matches));
    std::cout << "matches: " << set.matches.size() << " (drawn up to 30) -> " << vm_out << "\n";
  });
  auto* vc = vz->add_subcommand("curve", "Plot a column of a training CSV");
  std::string vc_csv, vc_col = "loss", vc_out;
  vc->add_option("--csv", vc_csv)->required();
  vc->add_option("--column", vc_col);
  vc->add_option("--out", vc_out, "output png")->required();
  vc->callback([&] {
    save_png(vc_out, line_plot({{vc_col, read_csv_column(vc_csv, vc_col)}}));
    std::cout << "wrote " << vc_out << "\n";
  });
  vz->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // 2 on usage errors, 0 for --help
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
