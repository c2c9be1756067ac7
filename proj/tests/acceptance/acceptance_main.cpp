// Acceptance gate: runs every acceptance criterion end to end and prints one
// PASS/FAIL line each. Exit status is the number of failed criteria.
//
// Tolerances are pinned next to each check. Scales are desk-sized (64x64
// images, reduced-width nets) so the whole gate runs on a single CPU core.

#include <iostream>

#include "cods/desceval.hpp"
#include "cods/metrics.hpp"

using namespace cods;

namespace {

struct Gate {
  int failed = 0;
  void report(const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << ": " << name << " (" << detail << ")\n"
              << std::flush;
    failed += !ok;
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// --- 1. geometry round trips ---

void check_geometry(Gate& gate) {
  Rng rng(1);
  double worst_px = 0;
  for (int i = 0; i < 1000; ++i) {
    const CameraView view = sample_camera({}, 64, 64, rng);
    const Eigen::Vector2i px(rng.uniform_int(0, 63), rng.uniform_int(0, 63));
    const double depth = rng.uniform(0.2, 1.5);
    const Projection back = project(unproject(px, depth, view), view);
    worst_px = std::max(worst_px, (back.pixel - px.cast<double>()).norm());
  }
  gate.report("geometry: project/unproject round trip < 1e-6 px on 1000 pixels",
              worst_px < 1e-6, "worst " + fmt(worst_px) + " px");

  SceneSpec spec;
  spec.object_count = 6;
  spec.rng_seed = 77;
  const Scene scene = build_scene(spec, ObjectLibrary{});
  const CameraView v = sample_camera({}, 96, 96, rng);
  const RGBDFrame f = render_frame(scene, v);
  double worst_m = 0;
  int valid = 0;
  for (int y = 0; y < 96; ++y)
    for (int x = 0; x < 96; ++x) {
      if (!f.valid_depth(x, y)) continue;
      ++valid;
      const Vec3 p = unproject({x, y}, f.depth.at(x, y), v);
      worst_m = std::max(worst_m, (p - f.world_coords.at(x, y).cast<double>()).norm());
    }
  gate.report("geometry: rendered world coords match unprojection < 1e-6 m",
              valid > 0 && worst_m < 1e-6,
              "worst " + fmt(worst_m) + " m over " + std::to_string(valid) + " pixels");
}

// --- 2. renderer oracle ---

void check_renderer_oracle(Gate& gate) {
  Rng rng(11);
  auto random_soup = [&](int n) {
    std::vector<SoupTriangle> soup;
    for (int i = 0; i < n; ++i) {
      const Vec3 a(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      soup.push_back({a, a + Vec3(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4),
                                  rng.uniform(-0.4, 0.4)),
                      a + Vec3(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4),
                               rng.uniform(-0.4, 0.4)),
                      i % 7, 1 + i % 3, i});
    }
    return soup;
  };
  int rays = 0, mismatches = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto soup = random_soup(rng.uniform_int(10, 500));
    const Bvh bvh(soup);
    for (int i = 0; i < 200; ++i) {
      Ray ray{Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)),
              Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1))};
      if (ray.dir.norm() < 1e-6) continue;
      ++rays;
      const RayHit a = bvh.raycast(ray);
      const RayHit b = raycast_brute_force(ray, soup);
      if (a.valid != b.valid || (a.valid && (a.t != b.t || a.tri_index != b.tri_index)))
        ++mismatches;  // bit-exact comparison
    }
  }
  gate.report("renderer: BVH equals brute force bit-exactly on 20 random soups",
              rays > 3000 && mismatches == 0,
              std::to_string(mismatches) + " mismatches over " + std::to_string(rays) + " rays");
}

// --- 3. correspondence quality on a desk-scale dataset ---

void check_correspondence(Gate& gate, const std::string& dataset_root) {
  const nlohmann::json manifest = load_manifest(dataset_root);
  const int n_scenes = manifest.at("n_scenes");
  const int views = manifest.at("views_per_scene");
  Rng rng(5);
  int n_matches = 0, tol_violations = 0, sym_checked = 0, sym_ok = 0;
  double worst_world = 0;
  for (int s = 0; n_matches < 10000; s = (s + 1) % n_scenes) {
    const int va = rng.uniform_int(0, views - 1);
    int vb = rng.uniform_int(0, views - 2);
    if (vb >= va) ++vb;
    const fs::path dir = fs::path(dataset_root) / scene_dir_name(s);
    const RGBDFrame fa = load_frame(dir, view_stem(va));
    const RGBDFrame fb = load_frame(dir, view_stem(vb));
    const PixelMatchSet set = sample_training_pairs(fa, fb, {}, rng);
    if (set.empty_match_flag) continue;
    for (const auto& [ua, ub] : set.matches) {
      ++n_matches;
      const double d = (fa.world_coords.at(ua.x(), ua.y()) - fb.world_coords.at(ub.x(), ub.y()))
                           .norm();
      worst_world = std::max(worst_world, d);
      if (d > 0.003) ++tol_violations;  // 3 mm world-point tolerance
      ++sym_checked;
      if (const auto back = find_correspondence(ub, fb, fa))
        sym_ok += ((*back - ua).cast<double>().norm() <= 1.0);  // 1 px rounding slack
    }
  }
  gate.report("correspondence: 10k matches satisfy the 3 mm world tolerance",
              tol_violations == 0,
              std::to_string(tol_violations) + " violations, worst " + fmt(worst_world) + " m");
  const double sym_rate = double(sym_ok) / std::max(1, sym_checked);
  gate.report("correspondence: symmetric within 1 px on >= 99% of matches", sym_rate >= 0.99,
              fmt(100 * sym_rate) + "% of " + std::to_string(sym_checked));
}

// --- 4. contrastive loss correctness ---

void check_loss(Gate& gate) {
  const int W = 16, H = 16, D = 4;
  Rng rng(7);
  std::vector<double> a(W * H * D), b(W * H * D);
  for (auto& v : a) v = rng.uniform(-1, 1);
  for (auto& v : b) v = rng.uniform(-1, 1);
  PixelMatchSet set;
  for (int i = 0; i < 30; ++i)
    set.matches.push_back({{rng.uniform_int(0, W - 1), rng.uniform_int(0, H - 1)},
                           {rng.uniform_int(0, W - 1), rng.uniform_int(0, H - 1)}});
  for (auto* cls : {&set.nonmatch_oo, &set.nonmatch_ob, &set.nonmatch_bb})
    for (int i = 0; i < 40; ++i)
      cls->push_back({{rng.uniform_int(0, W - 1), rng.uniform_int(0, H - 1)},
                      {rng.uniform_int(0, W - 1), rng.uniform_int(0, H - 1)}});

  const double margin = 0.5;
  std::vector<double> ga(a.size(), 0), gb(b.size(), 0);
  contrastive_loss_core<double>(a.data(), b.data(), W, H, D, set, margin, false, ga.data(),
                                gb.data());
  const double eps = 1e-6;
  double worst_rel = 0;
  auto fd_check = [&](std::vector<double>& buf, const std::vector<double>& grad) {
    for (size_t i = 0; i < buf.size(); i += 37) {  // stride keeps the runtime short
      const double keep = buf[i];
      buf[i] = keep + eps;
      const double up =
          contrastive_loss_core<double>(a.data(), b.data(), W, H, D, set, margin, false).total;
      buf[i] = keep - eps;
      const double dn =
          contrastive_loss_core<double>(a.data(), b.data(), W, H, D, set, margin, false).total;
      buf[i] = keep;
      const double numeric = (up - dn) / (2 * eps);
      const double denom = std::max({std::abs(numeric), std::abs(grad[i]), 1e-8});
      worst_rel = std::max(worst_rel, std::abs(numeric - grad[i]) / denom);
    }
  };
  fd_check(a, ga);
  fd_check(b, gb);
  gate.report("loss: analytic gradient matches central differences within 1e-4",
              worst_rel < 1e-4, "worst relative error " + fmt(worst_rel));

  // constructed zero case: identical descriptors at matches, non-matches at
  // distance >= margin
  std::vector<double> za(W * H * D, 0.0), zb(W * H * D, 0.0);
  PixelMatchSet zset;
  zset.matches.push_back({{0, 0}, {0, 0}});
  zset.nonmatch_oo.push_back({{1, 0}, {2, 0}});
  for (int d = 0; d < D; ++d) zb[(size_t(d) * H) * W + 2] = 1.0;  // distance 2 >= margin
  const double zero_loss =
      contrastive_loss_core<double>(za.data(), zb.data(), W, H, D, zset, margin, false).total;
  gate.report("loss: constructed zero case evaluates to exactly 0", zero_loss == 0.0,
              "loss " + fmt(zero_loss));

  // hand-evaluated non-match: single pair at distance 0.3 under margin 0.5
  // -> max(0, 0.5 - 0.3)^2 = 0.04 exactly, plus a zero-distance match term
  std::vector<double> ha(W * H * D, 0.0), hb(W * H * D, 0.0);
  PixelMatchSet hset;
  hset.matches.push_back({{0, 0}, {0, 0}});
  hset.nonmatch_oo.push_back({{1, 0}, {3, 0}});
  hb[3] = 0.3;  // channel 0 only
  const double hand =
      contrastive_loss_core<double>(ha.data(), hb.data(), W, H, D, hset, margin, false).total;
  gate.report("loss: hand-evaluated non-match case yields 0.04 exactly",
              std::abs(hand - 0.04) < 1e-12, "loss " + fmt(hand));
}

// --- 5. descriptor desk-scale training ---
// Full-scale published numbers are not reproducible at this scale; the bar is
// beating the measured random-pixel floor by 2x on held-out views.

void check_descriptor_training(Gate& gate, const std::string& dataset_root,
                               const std::string& work_dir, std::string& checkpoint_out) {
  DescriptorTrainConfig tc;
  tc.dataset_root = dataset_root;
  tc.out_dir = (fs::path(work_dir) / "descriptor").string();
  tc.net = DescriptorNetConfig::desk_scale(InputMode::rgbd);
  tc.iterations = 5000;
  tc.max_views = 16;  // views 16..19 of each scene are held out for evaluation
  tc.seed = 1;
  const DescriptorTrainResult tr = train_descriptor(tc);
  checkpoint_out = tr.checkpoint_path;
  DescriptorNet net = DescriptorNet::load(tr.checkpoint_path);

  const int pairs_per_scene = 2, samples = 25, view_min = 16;
  Rng rng_net(101), rng_floor(101), rng_oracle(101);
  const MatchingErrorResult learned = dataset_matching_error(
      dataset_root, descriptor_fn_from_net(net), pairs_per_scene, samples, rng_net, false,
      view_min);
  const MatchingErrorResult floor = dataset_matching_error(
      dataset_root, {}, pairs_per_scene, samples, rng_floor, true, view_min);
  gate.report("descriptor: held-out matching error <= 0.5x the random-pixel floor",
              learned.evaluated > 200 && floor.evaluated > 200 &&
                  learned.mean_normalized <= 0.5 * floor.mean_normalized,
              "learned " + fmt(learned.mean_normalized) + " vs floor " +
                  fmt(floor.mean_normalized) + " over " + std::to_string(learned.evaluated) +
                  " samples");

  const MatchingErrorResult oracle = dataset_matching_error(
      dataset_root, world_coords_descriptor_fn(), pairs_per_scene, samples, rng_oracle, false,
      view_min);
  gate.report("descriptor: world-coordinate oracle scores < 0.005",
              oracle.evaluated > 200 && oracle.mean_normalized < 0.005,
              "oracle " + fmt(oracle.mean_normalized));
}

// --- 6. suction model vs brute-force oracle ---

PickOutcome oracle_probe(const Scene& scene, const Vec3& contact, const Vec3& normal,
                         const SuctionPadModel& pad) {
  const auto soup = scene_to_soup(scene);
  const Vec3 axis = clip_approach_axis(normal, pad.max_tilt_deg);
  Vec3 u = axis.cross(Vec3(1, 0, 0));
  if (u.norm() < 1e-6) u = axis.cross(Vec3(0, 1, 0));
  u.normalize();
  const Vec3 v = axis.cross(u);
  auto id_at = [&](const Vec3& offset) -> int {
    Ray ray;
    ray.origin = contact + pad.standoff * axis + offset;
    ray.dir = -axis;
    const RayHit hit = raycast_brute_force(ray, soup, pad.standoff + pad.seal_range);
    return hit.valid ? soup[hit.tri_index].instance_id : -1;
  };
  const int center = id_at(Vec3::Zero());
  if (center <= 0) return PickOutcome::miss;
  for (int i = 0; i < pad.ring_sensors; ++i) {
    const double ang = 2 * M_PI * i / pad.ring_sensors;
    if (id_at(pad.pad_radius * (std::cos(ang) * u + std::sin(ang) * v)) != center)
      return PickOutcome::partial_seal;
  }
  return PickOutcome::success;
}

void check_suction(Gate& gate) {
  const SuctionPadModel pad;
  Rng rng(21);
  int checked = 0, mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    SceneSpec spec;
    spec.split = Split::train;
    spec.rng_seed = 500 + trial;
    spec.workspace.kind = WorkspaceKind::basket;
    spec.workspace.extent = {0.25, 0.25};
    spec.object_count = 2 + trial % 6;
    const Scene scene = build_scene(spec, ObjectLibrary());
    SceneRaycaster caster(scene);
    CameraView view;
    view.intrinsics = {76.8, 76.8, 32, 32, 64, 64};
    view.pose = look_at(Vec3(0, 0, 0.55), Vec3(0, 0, 0), Vec3(0, 1, 0));
    const RGBDFrame frame = caster.render(view);
    // 20 valid probes per scene; draws that land on invalid pixels don't count
    for (int valid = 0, draws = 0; valid < 20 && draws < 400; ++draws) {
      const int x = rng.uniform_int(0, 63), y = rng.uniform_int(0, 63);
      if (!frame.valid_depth(x, y)) continue;
      const auto n = normal_at_pixel(frame.depth, view, x, y, pad.pad_radius);
      if (!n) continue;
      const Vec3 contact = frame.world_coords.at(x, y).cast<double>();
      ++checked;
      ++valid;
      if (probe_suction(caster, contact, *n, pad).outcome != oracle_probe(scene, contact, *n, pad))
        ++mismatches;
    }
  }
  gate.report("suction: probe outcomes agree exactly with the brute-force oracle",
              checked >= 1000 && mismatches == 0,
              std::to_string(mismatches) + " mismatches over " + std::to_string(checked) +
                  " probes on 100 scenes");
}

// --- 7. environment contracts under a random policy ---

void check_env_contracts(Gate& gate) {
  BinEnvConfig ec;
  ec.n_objects = 3;
  ec.width = ec.height = 48;
  ec.seed = 99;
  BinEnv env(ec);
  Rng rng(31);
  const std::vector<double> allowed = {0.1, -0.1, -0.9, -1.0, -1.1};
  int episodes = 0, budget_violations = 0, reward_violations = 0, count_violations = 0;
  for (; episodes < 1000; ++episodes) {
    env.reset();
    const int initial = env.initial_count();
    int steps = 0, remaining = initial;
    while (!env.done()) {
      std::vector<Eigen::Vector2i> px;
      const Image<uint8_t> mask = action_mask(env.observation());
      for (int y = 0; y < ec.height; ++y)
        for (int x = 0; x < ec.width; ++x)
          if (mask.at(x, y)) px.push_back({x, y});
      if (px.empty()) break;
      const BinStep step = env.step(px[rng.uniform_int(0, int(px.size()) - 1)]);
      ++steps;
      bool ok = false;
      for (const double r : allowed) ok |= std::abs(step.reward - r) < 1e-9;
      reward_violations += !ok;
      const int expect = remaining - (step.outcome == PickOutcome::success ? 1 : 0);
      count_violations += step.remaining != expect;
      remaining = step.remaining;
    }
    budget_violations += steps > 2 * initial;
  }
  gate.report("environment: 1000 random episodes all terminate within 2 x initial steps",
              budget_violations == 0, std::to_string(budget_violations) + " over-budget episodes");
  gate.report("environment: rewards drawn only from {+0.1,-0.1,-0.9,-1,-1.1}",
              reward_violations == 0, std::to_string(reward_violations) + " violations");
  gate.report("environment: object count decreases by exactly 1 per successful pick",
              count_violations == 0, std::to_string(count_violations) + " violations");
}

// --- 8/9. desk-scale policy training, frozen descriptor stream ---

void check_policy_training(Gate& gate, const std::string& work_dir,
                           const std::string& cods_checkpoint) {
  PolicyTrainConfig tc;
  tc.out_dir = (fs::path(work_dir) / "policy_depth").string();
  tc.net = PolicyNetConfig::desk_scale(PolicyVariant::depth_only);
  tc.env.n_objects = 5;
  tc.env.width = tc.env.height = 64;
  tc.episodes = 2000;
  tc.workers = 4;
  tc.seed = 7;
  const PolicyTrainResult tr = train_policy(tc);

  PolicyNet net = PolicyNet::load(tr.checkpoint_path, nullptr);
  BinEnvConfig ec = tc.env;
  ec.split = Split::train;
  const int eval_episodes = 50;
  const EvalResult learned = evaluate_policy(greedy_policy_fn(net), ec, eval_episodes, 1234);
  const EvalResult random = evaluate_policy(random_pick_policy(55), ec, eval_episodes, 1234);

  gate.report("policy: greedy success rate >= 2x the uniform-random baseline",
              learned.metrics.success_rate_all >= 2 * random.metrics.success_rate_all,
              "learned " + fmt(learned.metrics.success_rate_all) + " vs random " +
                  fmt(random.metrics.success_rate_all) + " over 50 episodes");

  // bootstrap the completion-rate difference over the 50 evaluation episodes
  Rng ci_rng(17);
  std::vector<double> lc, rc;
  for (const EpisodeStats& e : learned.episodes) lc.push_back(e.completed);
  for (const EpisodeStats& e : random.episodes) rc.push_back(e.completed);
  int positive = 0;
  const int resamples = 2000;
  const int n = int(lc.size());
  for (int r = 0; r < resamples; ++r) {
    double sl = 0, sr = 0;
    for (int i = 0; i < n; ++i) sl += lc[ci_rng.uniform_int(0, n - 1)];
    for (int i = 0; i < n; ++i) sr += rc[ci_rng.uniform_int(0, n - 1)];
    positive += sl > sr;
  }
  const double conf = double(positive) / resamples;
  gate.report("policy: completion beats random with 95% bootstrap confidence", conf >= 0.95,
              "learned " + fmt(learned.metrics.completion_rate) + " vs random " +
                  fmt(random.metrics.completion_rate) + ", P(diff>0) = " + fmt(conf));

  // frozen-stream check: a short descriptor-stream run must leave the
  // descriptor parameters bit-identical
  auto cods = std::make_shared<DescriptorNet>(DescriptorNet::load(cods_checkpoint));
  std::vector<std::vector<float>> before;
  for (const auto& [name, t] : cods->params().entries()) before.push_back(t->v);
  PolicyTrainConfig fc = tc;
  fc.out_dir = (fs::path(work_dir) / "policy_frozen").string();
  fc.net = PolicyNetConfig::desk_scale(PolicyVariant::cods_plus_depth);
  fc.cods_checkpoint = cods_checkpoint;
  fc.episodes = 12;
  train_policy(fc);
  // reload: train_policy used its own instance loaded from the same file
  DescriptorNet after = DescriptorNet::load(cods_checkpoint);
  bool identical = true;
  size_t i = 0;
  for (const auto& [name, t] : after.params().entries())
    identical &= (t->v == before[i++]);
  // and a live run against this instance must not touch it either
  PolicyNet live(PolicyNetConfig::desk_scale(PolicyVariant::cods_plus_depth), cods, 3);
  BinEnvConfig fec = tc.env;
  fec.seed = 5;
  BinEnv env(fec);
  env.reset();
  const FrozenFeatures ff = live.frozen_features(env.observation());
  nn::Graph g;
  auto fwd = live.forward(g, env.observation(), &ff);
  live.params().zero_grad();
  g.backward(fwd.value);
  nn::Adam opt({.lr = 1e-3f});
  opt.step(live.params());
  i = 0;
  for (const auto& [name, t] : cods->params().entries()) identical &= (t->v == before[i++]);
  gate.report("policy: descriptor stream parameters bit-identical after training", identical,
              identical ? "all tensors unchanged" : "descriptor parameters changed");
}

// --- 10. metrics hand computation ---

void check_metrics(Gate& gate) {
  EpisodeStats a;
  a.steps = 12;
  a.picked = 10;
  a.initial = 10;
  a.completed = true;
  EpisodeStats b;
  b.steps = 20;
  b.picked = 7;
  b.initial = 10;
  const PickingMetrics m = compute_metrics({a, b});
  const bool ok = m.completion_rate == 0.5 && m.avg_picked == 8.5 &&
                  m.success_rate == 10.0 / 12.0;
  gate.report("metrics: hand-built log yields completion 0.5, avg_picked 8.5, success 10/12",
              ok,
              "completion " + fmt(m.completion_rate) + ", avg_picked " + fmt(m.avg_picked) +
                  ", success " + fmt(m.success_rate));
}

// --- 11. ablation plumbing ---

void check_ablation(Gate& gate, const std::string& work_dir,
                    const std::string& cods_checkpoint) {
  AblationConfig ac;
  ac.work_dir = (fs::path(work_dir) / "ablation").string();
  ac.cods_checkpoint = cods_checkpoint;
  ac.train.env.n_objects = 5;
  ac.train.env.width = ac.train.env.height = 64;
  ac.train.episodes = 40;
  ac.train.workers = 4;
  ac.eval_splits = {Split::test, Split::novel};
  ac.eval_object_counts = {20, 30};
  ac.eval_episodes = 2;
  ac.seed = 3;
  const auto rows = run_ablation_suite(ac);
  // header + (4 variants + random floor) x 4 cells
  bool ok = rows.size() == 1 + 5 * 4;
  for (const char* table : {"table_completion.csv", "table_avg_picked.csv",
                            "table_success_rate.csv"}) {
    std::ifstream t(fs::path(ac.work_dir) / table);
    std::string header;
    ok &= bool(std::getline(t, header)) &&
          header == "policy,test_20,test_30,novel_20,novel_30";
    int body = 0;
    std::string line;
    while (std::getline(t, line)) ++body;
    ok &= body == 5;
  }
  gate.report("ablation: 4 variants x 4 cells run end-to-end with three table CSVs", ok,
              std::to_string(rows.size()) + " result rows in " + ac.work_dir);
}

}  // namespace

int main() {
  Gate gate;
  const fs::path work = fs::temp_directory_path() / "cods_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  check_geometry(gate);
  check_renderer_oracle(gate);

  // shared desk-scale dataset: 20 scenes x 20 views at 64x64; the final 4
  // views per scene are held out from descriptor training
  DatasetConfig dc = DatasetConfig::desk_scale();
  dc.root = (work / "data").string();
  dc.views_per_scene = 20;
  dc.seed = 42;
  generate_descriptor_dataset(dc);

  check_correspondence(gate, dc.root);
  check_loss(gate);
  std::string cods_checkpoint;
  check_descriptor_training(gate, dc.root, work.string(), cods_checkpoint);
  check_suction(gate);
  check_env_contracts(gate);
  check_policy_training(gate, work.string(), cods_checkpoint);
  check_metrics(gate);
  check_ablation(gate, work.string(), cods_checkpoint);

  std::cout << (gate.failed == 0 ? "ALL CRITERIA PASSED" : "FAILED CRITERIA: ")
            << (gate.failed == 0 ? "" : std::to_string(gate.failed)) << "\n";
  return gate.failed;
}
