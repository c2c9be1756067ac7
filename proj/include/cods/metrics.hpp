#pragma once

#include "cods/policy_train.hpp"

namespace cods {

struct PickingMetrics {
  int episodes = 0;
  double completion_rate = 0;    // fraction of episodes that emptied the bin
  double avg_picked = 0;         // mean objects picked per episode
  double success_rate = 0;       // picks / attempts over completed episodes
  double success_rate_all = 0;   // picks / attempts over every episode
  double avg_reward = 0;
  double unsafe_rate = 0;
};

inline PickingMetrics compute_metrics(const std::vector<EpisodeStats>& episodes) {
  PickingMetrics m;
  m.episodes = static_cast<int>(episodes.size());
  if (episodes.empty()) return m;
  int completed_steps = 0, completed_picks = 0, steps = 0, picks = 0;
  for (const EpisodeStats& e : episodes) {
    m.completion_rate += e.completed;
    m.avg_picked += e.picked;
    m.avg_reward += e.total_reward;
    m.unsafe_rate += e.unsafe;
    steps += e.steps;
    picks += e.picked;
    if (e.completed) {
      completed_steps += e.steps;
      completed_picks += e.picked;
    }
  }
  m.completion_rate /= m.episodes;
  m.avg_picked /= m.episodes;
  m.avg_reward /= m.episodes;
  m.unsafe_rate /= m.episodes;
  if (completed_steps) m.success_rate = double(completed_picks) / completed_steps;
  if (steps) m.success_rate_all = double(picks) / steps;
  return m;
}

// Percentile bootstrap confidence interval for the mean of `values`.
struct BootstrapCi {
  double lo = 0, hi = 0, mean = 0;
};

inline BootstrapCi bootstrap_ci(const std::vector<double>& values, Rng& rng,
                                int resamples = 2000, double alpha = 0.05) {
  BootstrapCi out;
  if (values.empty()) return out;
  for (const double v : values) out.mean += v;
  out.mean /= values.size();
  std::vector<double> means(resamples);
  const int n = static_cast<int>(values.size());
  for (int r = 0; r < resamples; ++r) {
    double s = 0;
    for (int i = 0; i < n; ++i) s += values[rng.uniform_int(0, n - 1)];
    means[r] = s / n;
  }
  std::sort(means.begin(), means.end());
  auto pick = [&](double q) {
    const int idx = std::clamp(static_cast<int>(q * (resamples - 1)), 0, resamples - 1);
    return means[idx];
  };
  out.lo = pick(alpha / 2);
  out.hi = pick(1 - alpha / 2);
  return out;
}

// A pixel-picking policy under evaluation; returns the chosen pixel.
using PickPolicyFn = std::function<Eigen::Vector2i(const RGBDFrame&)>;

// Uniformly random choice among object pixels, the floor every learned
// policy must beat.
inline PickPolicyFn random_pick_policy(uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng](const RGBDFrame& obs) {
    std::vector<Eigen::Vector2i> allowed;
    const Image<uint8_t> mask = action_mask(obs);
    for (int y = 0; y < mask.height(); ++y)
      for (int x = 0; x < mask.width(); ++x)
        if (mask.at(x, y)) allowed.push_back({x, y});
    if (allowed.empty()) throw DomainError("random_pick_policy: no object pixels");
    return allowed[rng->uniform_int(0, static_cast<int>(allowed.size()) - 1)];
  };
}

inline PickPolicyFn greedy_policy_fn(PolicyNet& net) {
  return [&net](const RGBDFrame& obs) {
    const FrozenFeatures ff = net.frozen_features(obs);
    nn::Graph g;
    auto fwd = net.forward(g, obs, &ff);
    return select_action(*fwd.logits, action_mask(obs), nullptr).pixel;
  };
}

struct EvalResult {
  PickingMetrics metrics;
  std::vector<EpisodeStats> episodes;
};

// Greedy evaluation over fresh episodes; stops an episode early if no object
// pixels remain visible.
inline EvalResult evaluate_policy(const PickPolicyFn& policy, BinEnvConfig env_cfg,
                                  int episodes, uint64_t seed) {
  env_cfg.seed = Rng::splitmix(seed);
  BinEnv env(env_cfg);
  EvalResult out;
  for (int e = 0; e < episodes; ++e) {
    env.reset();
    EpisodeStats stats;
    stats.initial = env.initial_count();
    while (!env.done()) {
      const Image<uint8_t> mask = action_mask(env.observation());
      bool any = false;
      for (const uint8_t m : mask.data()) any |= m != 0;
      if (!any) break;
      const BinStep step = env.step(policy(env.observation()));
      ++stats.steps;
      stats.total_reward += step.reward;
      stats.unsafe = step.unsafe;
    }
    stats.picked = env.picked();
    stats.completed = env.picked() == env.initial_count();
    out.episodes.push_back(stats);
  }
  out.metrics = compute_metrics(out.episodes);
  return out;
}

// --- ablation suite ---

struct AblationConfig {
  std::string work_dir;
  std::string cods_checkpoint;  // trained descriptor shared by cods variants
  PolicyTrainConfig train;      // out_dir/net/cods_checkpoint filled per variant
  std::vector<PolicyVariant> variants = {PolicyVariant::cods_plus_depth,
                                         PolicyVariant::depth_only, PolicyVariant::cods_only,
                                         PolicyVariant::direct_cods};
  std::vector<Split> eval_splits = {Split::test, Split::novel};
  std::vector<int> eval_object_counts = {20, 30};
  int eval_episodes = 20;
  uint64_t seed = 0;
};

// Trains one policy per variant, then evaluates every variant and a
// random-pick floor over the (split, object count) grid. Writes
// ablation_results.csv (one row per cell), ablation_policies.csv (checkpoint
// inventory), and leaves each variant's training curve under its out_dir.
inline std::vector<std::string> run_ablation_suite(const AblationConfig& cfg) {
  fs::create_directories(cfg.work_dir);
  std::vector<std::string> rows;
  rows.push_back(
      "policy,split,n_objects,episodes,completion_rate,avg_picked,success_rate,"
      "success_rate_all,picked_ci_lo,picked_ci_hi");

  std::vector<std::string> inventory;
  inventory.push_back("policy,checkpoint,train_curve,episodes");

  std::vector<std::pair<std::string, PickPolicyFn>> policies;
  std::vector<std::unique_ptr<PolicyNet>> nets;  // keep them alive for the fns
  std::shared_ptr<DescriptorNet> cods;

  for (const PolicyVariant variant : cfg.variants) {
    PolicyTrainConfig tc = cfg.train;
    tc.net = PolicyNetConfig::desk_scale(variant);
    tc.out_dir = (fs::path(cfg.work_dir) / policy_variant_name(variant)).string();
    tc.cods_checkpoint = variant_uses_cods(variant) ? cfg.cods_checkpoint : "";
    tc.seed = cfg.seed;
    const PolicyTrainResult tr = train_policy(tc);
    if (variant_uses_cods(variant) && !cods)
      cods = std::make_shared<DescriptorNet>(DescriptorNet::load(cfg.cods_checkpoint));
    nets.push_back(std::make_unique<PolicyNet>(
        PolicyNet::load(tr.checkpoint_path, variant_uses_cods(variant) ? cods : nullptr)));
    policies.emplace_back(policy_variant_name(variant), greedy_policy_fn(*nets.back()));
    inventory.push_back(std::string(policy_variant_name(variant)) + "," + tr.checkpoint_path +
                        "," + tr.log_path + "," + std::to_string(tr.episodes_run));
  }
  policies.emplace_back("random_pixel", random_pick_policy(Rng::splitmix(cfg.seed + 5)));

  // long-format rows plus one pivoted table per metric, mirroring the usual
  // results layout: one row per policy, one column per (split, count) cell
  std::vector<std::string> cells;
  for (const Split split : cfg.eval_splits)
    for (const int n_objects : cfg.eval_object_counts)
      cells.push_back(std::string(split_name(split)) + "_" + std::to_string(n_objects));
  std::map<std::string, std::map<std::string, PickingMetrics>> grid;  // policy -> cell
  std::vector<std::string> policy_order;

  Rng ci_rng(Rng::splitmix(cfg.seed + 9));
  for (const auto& [name, policy] : policies) {
    policy_order.push_back(name);
    for (const Split split : cfg.eval_splits) {
      for (const int n_objects : cfg.eval_object_counts) {
        BinEnvConfig ec = cfg.train.env;
        ec.split = split;
        ec.n_objects = n_objects;
        const EvalResult r =
            evaluate_policy(policy, ec, cfg.eval_episodes, cfg.seed + 31 * n_objects);
        std::vector<double> picked;
        for (const EpisodeStats& e : r.episodes) picked.push_back(e.picked);
        const BootstrapCi ci = bootstrap_ci(picked, ci_rng);
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s,%s,%d,%d,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f",
                      name.c_str(), split_name(split), n_objects, r.metrics.episodes,
                      r.metrics.completion_rate, r.metrics.avg_picked, r.metrics.success_rate,
                      r.metrics.success_rate_all, ci.lo, ci.hi);
        rows.push_back(buf);
        grid[name][std::string(split_name(split)) + "_" + std::to_string(n_objects)] = r.metrics;
      }
    }
  }

  std::ofstream out(fs::path(cfg.work_dir) / "ablation_results.csv");
  for (const auto& row : rows) out << row << "\n";

  const std::pair<std::string, double PickingMetrics::*> tables[] = {
      {"table_completion.csv", &PickingMetrics::completion_rate},
      {"table_avg_picked.csv", &PickingMetrics::avg_picked},
      {"table_success_rate.csv", &PickingMetrics::success_rate}};
  for (const auto& [filename, field] : tables) {
    std::ofstream t(fs::path(cfg.work_dir) / filename);
    t << "policy";
    for (const std::string& cell : cells) t << "," << cell;
    t << "\n";
    for (const std::string& name : policy_order) {
      t << name;
      for (const std::string& cell : cells) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", grid[name][cell].*field);
        t << "," << buf;
      }
      t << "\n";
    }
  }
  std::ofstream inv(fs::path(cfg.work_dir) / "ablation_policies.csv");
  for (const auto& row : inventory) inv << row << "\n";
  return rows;
}

}  // namespace cods
