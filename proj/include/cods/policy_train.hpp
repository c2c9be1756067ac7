#pragma once

#include <thread>

#include "cods/policy.hpp"

namespace cods {

struct PolicyTrainConfig {
  std::string out_dir;
  PolicyNetConfig net = PolicyNetConfig::desk_scale(PolicyVariant::depth_only);
  std::string cods_checkpoint;  // required when the variant uses the descriptor stream
  BinEnvConfig env;             // template; worker seeds are derived from it
  int episodes = 2000;          // total across workers
  int workers = 4;
  float gamma = 0.3f;
  float lr = 5e-4f;
  float adam_beta1 = 0.9f;
  float clip_eps = 0.2f;        // 0 = plain advantage actor-critic
  int update_epochs = 1;        // gradient passes per episode; clipping keeps extras safe
  float value_coef = 0.5f;
  float entropy_coef = 0.001f;
  int checkpoint_every = 200;   // episodes
  int log_every = 20;
  int stats_window = 100;       // rolling window for the training curve
  uint64_t seed = 0;
};

struct EpisodeStats {
  int steps = 0;
  int picked = 0;
  int initial = 0;
  double total_reward = 0;
  bool completed = false;  // bin emptied
  bool unsafe = false;
  bool failed = false;     // worker crashed; episode discarded
};

struct PolicyTrainResult {
  std::string checkpoint_path;
  std::string log_path;
  int episodes_run = 0;
  int failed_episodes = 0;
  double window_completion = 0;   // over the final stats window
  double window_avg_picked = 0;
  double window_success_rate = 0;  // successful picks / attempts
};

namespace detail {

struct Transition {
  FrozenFeatures frozen;
  RGBDFrame obs;
  Image<uint8_t> mask;
  int action = 0;
  float logp = 0;
  float value = 0;
  double reward = 0;
};

struct Rollout {
  std::vector<Transition> transitions;
  EpisodeStats stats;
};

inline uint64_t params_hash(const nn::ParamStore& params) {
  uint64_t h = 1469598103934665603ull;
  for (const auto& [name, t] : params.entries())
    for (const float f : t->v) {
      uint32_t u;
      std::memcpy(&u, &f, sizeof(u));
      h = (h ^ u) * 1099511628211ull;
    }
  return h;
}

}  // namespace detail

// Synchronous advantage actor-critic: `workers` environments roll out one
// episode each against the current policy in parallel, then their updates are
// applied sequentially in worker order, so training is deterministic for a
// fixed seed. A crashing worker forfeits its episode; training continues.
inline PolicyTrainResult train_policy(
    const PolicyTrainConfig& cfg,
    const std::function<void(int, const EpisodeStats&)>& progress = {}) {
  std::shared_ptr<DescriptorNet> cods;
  if (variant_uses_cods(cfg.net.variant)) {
    if (cfg.cods_checkpoint.empty())
      throw DomainError("train_policy: variant needs cods_checkpoint");
    cods = std::make_shared<DescriptorNet>(DescriptorNet::load(cfg.cods_checkpoint));
  }
  PolicyNet net(cfg.net, cods, cfg.seed);
  nn::Adam opt({.lr = cfg.lr, .beta1 = cfg.adam_beta1});

  std::vector<std::unique_ptr<BinEnv>> envs;
  std::vector<Rng> rngs;
  for (int w = 0; w < cfg.workers; ++w) {
    BinEnvConfig ec = cfg.env;
    ec.seed = Rng::splitmix(cfg.seed + 101 * (w + 1));
    if (!ec.log_path.empty())
      ec.log_path += ".worker" + std::to_string(w);
    envs.push_back(std::make_unique<BinEnv>(ec));
    rngs.emplace_back(Rng::splitmix(cfg.seed + 37 * (w + 1)));
  }

  fs::create_directories(cfg.out_dir);
  PolicyTrainResult result;
  result.checkpoint_path = (fs::path(cfg.out_dir) / "policy.ckpt").string();
  result.log_path = (fs::path(cfg.out_dir) / "policy_train.csv").string();
  std::ofstream log(result.log_path);
  log << "episode,avg_reward,completion_rate,avg_picked,pick_success_rate\n";

  const uint64_t cods_hash = cods ? detail::params_hash(cods->params()) : 0;
  auto save = [&](int episode) {
    net.save(result.checkpoint_path, {{"episode", episode},
                                      {"seed", cfg.seed},
                                      {"cods_checkpoint", cfg.cods_checkpoint},
                                      {"cods_params_hash", cods_hash}});
  };

  std::vector<EpisodeStats> window;
  auto window_stats = [&](PolicyTrainResult& r) {
    int n = 0, completed = 0, picked = 0, attempts = 0, successes = 0;
    const size_t start = window.size() > size_t(cfg.stats_window)
                             ? window.size() - cfg.stats_window
                             : 0;
    for (size_t i = start; i < window.size(); ++i) {
      const EpisodeStats& s = window[i];
      ++n;
      completed += s.completed;
      picked += s.picked;
      attempts += s.steps;
      successes += s.picked;
    }
    if (n) {
      r.window_completion = double(completed) / n;
      r.window_avg_picked = double(picked) / n;
    }
    if (attempts) r.window_success_rate = double(successes) / attempts;
  };

  for (int episode = 0; episode < cfg.episodes;) {
    const int batch = std::min(cfg.workers, cfg.episodes - episode);
    std::vector<detail::Rollout> rollouts(batch);

    auto run_worker = [&](int w) {
      detail::Rollout& ro = rollouts[w];
      try {
        BinEnv& env = *envs[w];
        env.reset();
        ro.stats.initial = env.initial_count();
        while (!env.done()) {
          detail::Transition tr;
          tr.obs = env.observation();
          tr.frozen = net.frozen_features(tr.obs);
          tr.mask = action_mask(tr.obs);
          nn::Graph g;
          auto fwd = net.forward(g, tr.obs, &tr.frozen);
          tr.value = fwd.value->v[0];
          bool any = false;
          for (const uint8_t m : tr.mask.data()) any |= m != 0;
          if (!any) break;  // nothing visible to aim at; forfeit the episode
          const ActionChoice choice = select_action(*fwd.logits, tr.mask, &rngs[w]);
          tr.action = choice.index;
          tr.logp = choice.logp;
          const BinStep step = env.step(choice.pixel);
          tr.reward = step.reward;
          ro.stats.total_reward += step.reward;
          ro.stats.unsafe = step.unsafe;
          ro.transitions.push_back(std::move(tr));
        }
        ro.stats.steps = static_cast<int>(ro.transitions.size());
        ro.stats.picked = env.picked();
        ro.stats.completed = env.picked() == env.initial_count();
      } catch (...) {
        ro.stats.failed = true;
      }
    };

    if (batch == 1) {
      run_worker(0);
    } else {
      std::vector<std::thread> threads;
      for (int w = 0; w < batch; ++w) threads.emplace_back(run_worker, w);
      for (auto& t : threads) t.join();  // in worker order
    }

    // one batched update over every worker's rollout (mean over all
    // transitions), like synchronous advantage actor-critic; per-episode
    // Monte-Carlo returns and advantages under the rollout-time values
    std::vector<const detail::Transition*> flat;
    std::vector<float> flat_returns;
    for (int w = 0; w < batch; ++w) {
      const detail::Rollout& ro = rollouts[w];
      if (ro.stats.failed || ro.transitions.empty()) continue;
      double g_acc = 0;
      std::vector<float> returns(ro.transitions.size());
      for (int t = static_cast<int>(ro.transitions.size()) - 1; t >= 0; --t) {
        g_acc = ro.transitions[t].reward + cfg.gamma * g_acc;
        returns[t] = static_cast<float>(g_acc);
      }
      for (size_t t = 0; t < ro.transitions.size(); ++t) {
        flat.push_back(&ro.transitions[t]);
        flat_returns.push_back(returns[t]);
      }
    }
    const int epochs = std::max(1, cfg.clip_eps > 0 ? cfg.update_epochs : 1);
    for (int epoch = 0; epoch < epochs && !flat.empty(); ++epoch) {
      net.params().zero_grad();
      nn::Graph g;
      nn::TensorPtr total = nn::make_tensor({1});
      std::vector<nn::TensorPtr> losses;
      for (size_t t = 0; t < flat.size(); ++t) {
        const detail::Transition& tr = *flat[t];
        auto fwd = net.forward(g, tr.obs, &tr.frozen);
        auto [loss, terms] =
            policy_loss(g, fwd.logits, fwd.value, tr.mask, tr.action, flat_returns[t] - tr.value,
                        flat_returns[t], tr.logp, cfg.clip_eps, cfg.value_coef, cfg.entropy_coef);
        losses.push_back(loss);
        total->v[0] += loss->v[0] / flat.size();
      }
      const float inv_n = 1.0f / flat.size();
      g.record([losses, total, inv_n]() {
        for (const auto& l : losses) l->g[0] += total->g[0] * inv_n;
      });
      g.backward(total);
      opt.step(net.params());
    }

    for (int w = 0; w < batch; ++w) {
      const detail::Rollout& ro = rollouts[w];
      ++episode;
      ++result.episodes_run;
      if (ro.stats.failed || ro.transitions.empty()) {
        result.failed_episodes += ro.stats.failed;
        continue;
      }
      window.push_back(ro.stats);
      if (progress) progress(episode, ro.stats);
      if (episode % cfg.log_every == 0 || episode == cfg.episodes) {
        PolicyTrainResult snap;
        window_stats(snap);
        double avg_reward = 0;
        const size_t start = window.size() > size_t(cfg.stats_window)
                                 ? window.size() - cfg.stats_window
                                 : 0;
        for (size_t i = start; i < window.size(); ++i)
          avg_reward += window[i].total_reward;
        avg_reward /= std::max<size_t>(1, window.size() - start);
        log << episode << "," << avg_reward << "," << snap.window_completion << ","
            << snap.window_avg_picked << "," << snap.window_success_rate << "\n"
            << std::flush;
      }
      if (episode % cfg.checkpoint_every == 0) save(episode);
    }
  }
  window_stats(result);
  save(result.episodes_run);
  return result;
}

}  // namespace cods
