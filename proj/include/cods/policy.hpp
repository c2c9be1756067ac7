#pragma once

#include "cods/binsim.hpp"
#include "cods/descriptor.hpp"

namespace cods {

// Which observation streams feed the picking policy.
enum class PolicyVariant { cods_plus_depth, depth_only, cods_only, direct_cods };

inline const char* policy_variant_name(PolicyVariant v) {
  switch (v) {
    case PolicyVariant::cods_plus_depth: return "cods_plus_depth";
    case PolicyVariant::depth_only: return "depth_only";
    case PolicyVariant::cods_only: return "cods_only";
    case PolicyVariant::direct_cods: return "direct_cods";
  }
  return "?";
}
inline PolicyVariant policy_variant_from_name(const std::string& s) {
  for (PolicyVariant v : {PolicyVariant::cods_plus_depth, PolicyVariant::depth_only,
                          PolicyVariant::cods_only, PolicyVariant::direct_cods})
    if (s == policy_variant_name(v)) return v;
  throw DomainError("unknown policy variant: " + s);
}

struct PolicyNetConfig {
  PolicyVariant variant = PolicyVariant::cods_plus_depth;
  nn::BackboneConfig stream_backbone = nn::BackboneConfig::small(1);  // channels set per stream
  int decoder_width = 32;
  int value_hidden = 32;
  float depth_mean = 0.7f, depth_std = 0.15f;
  // depth-stream featurization: window radius (pixels) matching the pad
  // footprint at the observation scale, and the seal sensor range (metres)
  // used to normalize the local depth span channel
  int seal_window = 2;
  float seal_range = 0.007f;

  static PolicyNetConfig desk_scale(PolicyVariant v) {
    PolicyNetConfig c;
    c.variant = v;
    return c;
  }
};

inline void to_json(nlohmann::json& j, const PolicyNetConfig& c) {
  j = {{"variant", policy_variant_name(c.variant)},
       {"stream_backbone", c.stream_backbone},
       {"decoder_width", c.decoder_width},
       {"value_hidden", c.value_hidden},
       {"depth_mean", c.depth_mean},
       {"depth_std", c.depth_std},
       {"seal_window", c.seal_window},
       {"seal_range", c.seal_range}};
}
inline void from_json(const nlohmann::json& j, PolicyNetConfig& c) {
  c.variant = policy_variant_from_name(j.at("variant"));
  j.at("stream_backbone").get_to(c.stream_backbone);
  j.at("decoder_width").get_to(c.decoder_width);
  j.at("value_hidden").get_to(c.value_hidden);
  j.at("depth_mean").get_to(c.depth_mean);
  j.at("depth_std").get_to(c.depth_std);
  j.at("seal_window").get_to(c.seal_window);
  j.at("seal_range").get_to(c.seal_range);
}

inline bool variant_uses_cods(PolicyVariant v) { return v != PolicyVariant::depth_only; }
inline bool variant_uses_depth_stream(PolicyVariant v) {
  return v == PolicyVariant::cods_plus_depth || v == PolicyVariant::depth_only;
}

// Frozen-stream activations for one observation; they carry no gradient and
// can be cached across the rollout and the update that replays it.
struct FrozenFeatures {
  std::vector<nn::TensorPtr> stages;  // strides {2,4,8,8}; empty for depth_only
  nn::TensorPtr descriptor_map;       // full-res {D,H,W}; only for direct_cods
};

// Two-stream picking policy: a frozen descriptor stream plus a trainable
// depth stream, fused at stride 8. A U-Net decoder emits one pick logit per
// pixel; a value head reads the fused bottleneck.
class PolicyNet {
 public:
  PolicyNet(PolicyNetConfig cfg, std::shared_ptr<DescriptorNet> cods, uint64_t init_seed = 0)
      : cfg_(std::move(cfg)), cods_(std::move(cods)), rng_(init_seed) {
    if (variant_uses_cods(cfg_.variant) && !cods_)
      throw DomainError("PolicyNet: this variant needs a descriptor network");
    if (variant_uses_depth_stream(cfg_.variant) || cfg_.variant == PolicyVariant::direct_cods) {
      nn::BackboneConfig bb = cfg_.stream_backbone;
      bb.input_channels =
          cfg_.variant == PolicyVariant::direct_cods ? cods_->config().descriptor_dim : 2;
      backbone_.emplace(bb, params_, "stream.", rng_);
    }
    // materialize decoder/value parameters with a dummy pass
    init_mode_ = true;
    RGBDFrame dummy;
    dummy.rgb = Image<Color>(16, 16, Color{0, 0, 0});
    dummy.depth = Image<float>(16, 16, 0.5f);
    dummy.instance_mask = Image<int32_t>(16, 16, 0);
    nn::Graph scratch;
    const FrozenFeatures ff = frozen_features(dummy);
    forward(scratch, dummy, &ff);
    init_mode_ = false;
  }

  // The stream backbone holds a pointer into params_, so moves must rebind it.
  PolicyNet(PolicyNet&& other) noexcept
      : cfg_(std::move(other.cfg_)),
        cods_(std::move(other.cods_)),
        rng_(other.rng_),
        params_(std::move(other.params_)),
        backbone_(std::move(other.backbone_)),
        init_mode_(other.init_mode_) {
    if (backbone_) backbone_->rebind(params_);
  }
  PolicyNet& operator=(PolicyNet&& other) noexcept {
    cfg_ = std::move(other.cfg_);
    cods_ = std::move(other.cods_);
    rng_ = other.rng_;
    params_ = std::move(other.params_);
    backbone_ = std::move(other.backbone_);
    init_mode_ = other.init_mode_;
    if (backbone_) backbone_->rebind(params_);
    return *this;
  }
  PolicyNet(const PolicyNet&) = delete;
  PolicyNet& operator=(const PolicyNet&) = delete;

  const PolicyNetConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const std::shared_ptr<DescriptorNet>& cods() const { return cods_; }

  // Runs the frozen descriptor stream outside any training graph.
  FrozenFeatures frozen_features(const RGBDFrame& obs) {
    FrozenFeatures out;
    if (!variant_uses_cods(cfg_.variant)) return out;
    nn::Graph g;  // throwaway: nothing back-propagates into the frozen net
    auto x = make_input_tensor(obs, cods_->config().input, cods_->config().depth_mean,
                               cods_->config().depth_std);
    auto fwd = cods_->forward(g, x);
    out.stages = fwd.stages;
    out.descriptor_map = fwd.descriptor_map;
    return out;
  }

  struct Forward {
    nn::TensorPtr logits;  // {1,H,W} at observation resolution
    nn::TensorPtr value;   // {1}
  };

  Forward forward(nn::Graph& g, const RGBDFrame& obs, const FrozenFeatures* frozen) {
    if (variant_uses_cods(cfg_.variant) && (!frozen || frozen->stages.empty()))
      throw DomainError("PolicyNet: frozen features required for this variant");
    const int H = obs.depth.height(), W = obs.depth.width();

    // gather per-stride stage stacks from the active streams
    std::vector<std::vector<nn::TensorPtr>> levels(4);
    if (variant_uses_depth_stream(cfg_.variant)) {
      auto x = depth_input(obs);
      auto bf = backbone_->forward(g, x);
      for (int i = 0; i < 4; ++i) levels[i].push_back(bf.stages[i]);
    }
    if (cfg_.variant == PolicyVariant::direct_cods) {
      auto bf = backbone_->forward(g, frozen->descriptor_map);
      for (int i = 0; i < 4; ++i) levels[i].push_back(bf.stages[i]);
    }
    if (cfg_.variant == PolicyVariant::cods_plus_depth ||
        cfg_.variant == PolicyVariant::cods_only)
      for (int i = 0; i < 4; ++i) levels[i].push_back(frozen->stages[i]);

    auto fuse = [&](int level) {
      return levels[level].size() == 1 ? levels[level][0] : nn::concat_channels(g, levels[level]);
    };

    nn::TensorPtr bottleneck =
        conv_block(g, nn::concat_channels(g, {fuse(2), fuse(3)}), cfg_.decoder_width, 1, "neck");

    // value head off the pooled bottleneck
    nn::TensorPtr pooled = nn::global_avg_pool(g, bottleneck);
    nn::TensorPtr h = nn::relu(
        g, nn::linear(g, pooled, param("value.w1", {cfg_.value_hidden, cfg_.decoder_width}, cfg_.decoder_width),
                      param("value.b1", {cfg_.value_hidden}, 0)));
    nn::TensorPtr value = nn::linear(g, h, param("value.w2", {1, cfg_.value_hidden}, cfg_.value_hidden),
                                     param("value.b2", {1}, 0));

    // U-Net decoder with skip connections at strides 4 and 2
    nn::TensorPtr up = bottleneck;
    up = nn::resize_bilinear(g, up, fuse(1)->dim(1), fuse(1)->dim(2));
    up = conv_block(g, nn::concat_channels(g, {up, fuse(1)}), cfg_.decoder_width, 3, "up4");
    up = nn::resize_bilinear(g, up, fuse(0)->dim(1), fuse(0)->dim(2));
    up = conv_block(g, nn::concat_channels(g, {up, fuse(0)}), cfg_.decoder_width, 3, "up2");
    up = nn::resize_bilinear(g, up, H, W);

    // full-resolution skip: seal success hinges on pad-radius-scale geometry
    // (an edge one or two pixels away), which the strided stages smooth out.
    // The 5x5 kernel covers the whole pad footprint at the working image
    // scale. Each variant contributes only its own streams' full-resolution
    // signal.
    std::vector<nn::TensorPtr> full;
    if (variant_uses_depth_stream(cfg_.variant)) full.push_back(depth_input(obs));
    if (variant_uses_cods(cfg_.variant)) full.push_back(frozen->descriptor_map);
    std::vector<nn::TensorPtr> up1_in = full;
    up1_in.insert(up1_in.begin(), up);
    up = conv_block(g, nn::concat_channels(g, up1_in), cfg_.decoder_width, 5, "up1");
    // the raw features also feed the head linearly, bypassing the norm/ReLU,
    // so a single weight can gate the logit on e.g. the depth-span channel
    std::vector<nn::TensorPtr> head_in = full;
    head_in.insert(head_in.begin(), up);
    nn::TensorPtr hx = nn::concat_channels(g, head_in);
    // initialized as a suction prior: zero everywhere except a negative
    // weight on the depth-span channel, so the untrained policy already
    // prefers flat pad-footprint pixels and learning refines from there
    const int span_c = variant_uses_depth_stream(cfg_.variant) ? cfg_.decoder_width + 1 : -1;
    nn::TensorPtr hw = params_.get("head.w", {1, hx->dim(0), 1, 1}, [&](nn::Tensor& t) {
      std::fill(t.v.begin(), t.v.end(), 0.0f);
      if (span_c >= 0) t.v[span_c] = -2.0f;
    });
    nn::TensorPtr logits = nn::conv2d(g, hx, hw, param("head.b", {1}, 0), 1, 0);
    return {logits, value};
  }

  void save(const std::string& path, nlohmann::json extra_meta = {}) const {
    nlohmann::json meta = extra_meta;
    meta["kind"] = "policy";
    meta["config"] = cfg_;
    nn::save_checkpoint(path, meta, params_);
  }
  static PolicyNet load(const std::string& path, std::shared_ptr<DescriptorNet> cods) {
    const nlohmann::json meta = nn::read_checkpoint_meta(path);
    PolicyNet net(meta.at("config").get<PolicyNetConfig>(), std::move(cods));
    nn::load_checkpoint_params(path, net.params_);
    return net;
  }

  // Depth stream input: standardized depth plus a fixed geometric feature,
  // the local depth span over the pad-footprint window, in units of the seal
  // sensor range. A seal needs every pad sensor within range of one surface,
  // so this channel encodes pickability directly; windows crossing a depth
  // hole or the image border are capped at the maximum span.
  nn::TensorPtr depth_input(const RGBDFrame& obs) const {
    const int H = obs.depth.height(), W = obs.depth.width();
    nn::TensorPtr x = nn::make_tensor({2, H, W});
    const int r = cfg_.seal_window;
    const float cap = 4.0f;
    for (int y = 0; y < H; ++y)
      for (int xx = 0; xx < W; ++xx) {
        const float d = obs.depth.at(xx, y);
        x->v[static_cast<size_t>(y) * W + xx] =
            d > 0 ? (d - cfg_.depth_mean) / cfg_.depth_std : 0.0f;
        float lo = d, hi = d;
        bool gap = d <= 0;
        for (int dy = -r; dy <= r && !gap; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            if (dx * dx + dy * dy > r * r + 1) continue;  // circular footprint
            const int px = xx + dx, py = y + dy;
            if (px < 0 || py < 0 || px >= W || py >= H) { gap = true; break; }
            const float nd = obs.depth.at(px, py);
            if (nd <= 0) { gap = true; break; }
            lo = std::min(lo, nd);
            hi = std::max(hi, nd);
          }
        x->v[(static_cast<size_t>(H) + y) * W + xx] =
            gap ? cap : std::min((hi - lo) / cfg_.seal_range, cap);
      }
    return x;
  }

 private:
  nn::TensorPtr param(const std::string& name, std::vector<int> shape, int fan_in) {
    return params_.get(name, std::move(shape),
                      init_mode_ ? (fan_in > 0 ? nn::he_init(rng_, fan_in)
                                               : nn::const_init(0.0f))
                                 : nn::const_init(0.0f));
  }

  nn::TensorPtr conv_block(nn::Graph& g, nn::TensorPtr x, int out_c, int k,
                           const std::string& name) {
    const int in_c = x->dim(0);
    nn::TensorPtr w = param(name + ".w", {out_c, in_c, k, k}, in_c * k * k);
    nn::TensorPtr b = param(name + ".b", {out_c}, 0);
    nn::TensorPtr gamma = params_.get(name + ".gamma", {out_c}, nn::const_init(1.0f));
    nn::TensorPtr beta = params_.get(name + ".beta", {out_c}, nn::const_init(0.0f));
    return nn::relu(g, nn::instance_norm(g, nn::conv2d(g, x, w, b, 1, k / 2), gamma, beta));
  }

  PolicyNetConfig cfg_;
  std::shared_ptr<DescriptorNet> cods_;
  Rng rng_;
  nn::ParamStore params_;
  std::optional<nn::Backbone> backbone_;
  bool init_mode_ = false;
};

// --- action selection ---

inline Image<uint8_t> action_mask(const RGBDFrame& obs) {
  Image<uint8_t> mask(obs.depth.width(), obs.depth.height(), 0);
  for (int y = 0; y < obs.depth.height(); ++y)
    for (int x = 0; x < obs.depth.width(); ++x)
      if (obs.valid_depth(x, y) && obs.instance_mask.at(x, y) > 0) mask.at(x, y) = 1;
  return mask;
}

struct ActionChoice {
  Eigen::Vector2i pixel;
  int index = 0;     // row-major pixel index
  float logp = 0;    // log-probability under the masked softmax
};

// Masked softmax over allowed pixels; samples when rng is given, otherwise
// greedy (ties resolve to the first pixel in row-major order).
inline ActionChoice select_action(const nn::Tensor& logits, const Image<uint8_t>& mask,
                                  Rng* rng) {
  const int H = logits.shape[1], W = logits.shape[2];
  if (mask.width() != W || mask.height() != H)
    throw DomainError("select_action: mask size mismatch");
  float max_logit = -std::numeric_limits<float>::infinity();
  for (int i = 0; i < W * H; ++i)
    if (mask.data()[i] && logits.v[i] > max_logit) max_logit = logits.v[i];
  if (!std::isfinite(max_logit)) throw DomainError("select_action: no allowed pixels");

  double z = 0;
  for (int i = 0; i < W * H; ++i)
    if (mask.data()[i]) z += std::exp(double(logits.v[i]) - max_logit);

  int chosen = -1;
  if (rng) {
    const double u = rng->uniform(0, 1) * z;
    double acc = 0;
    for (int i = 0; i < W * H; ++i) {
      if (!mask.data()[i]) continue;
      acc += std::exp(double(logits.v[i]) - max_logit);
      chosen = i;
      if (acc >= u) break;  // last allowed pixel absorbs rounding
    }
  } else {
    for (int i = 0; i < W * H; ++i)
      if (mask.data()[i] && logits.v[i] == max_logit) {
        chosen = i;
        break;
      }
  }
  ActionChoice out;
  out.index = chosen;
  out.pixel = {chosen % W, chosen / W};
  out.logp = static_cast<float>(double(logits.v[chosen]) - max_logit - std::log(z));
  return out;
}

// --- actor-critic surrogate loss ---

template <typename T>
struct PolicyLossTerms {
  T total{}, policy_term{}, value_term{}, entropy{};
};

// Core loss for one transition, on raw logits. With clip_eps > 0 this is the
// clipped-ratio surrogate; otherwise the plain policy gradient. Analytic
// gradients are exact (and double-instantiable for finite-difference checks).
template <typename T>
PolicyLossTerms<T> policy_loss_core(const T* logits, const uint8_t* mask, int n, int action,
                                    T value, T advantage, T target_return, T old_logp,
                                    T clip_eps, T value_coef, T entropy_coef,
                                    T* grad_logits = nullptr, T* grad_value = nullptr) {
  if (action < 0 || action >= n || !mask[action])
    throw DomainError("policy_loss: action outside the mask");
  T max_logit = -std::numeric_limits<T>::infinity();
  for (int i = 0; i < n; ++i)
    if (mask[i] && logits[i] > max_logit) max_logit = logits[i];
  T z = 0;
  for (int i = 0; i < n; ++i)
    if (mask[i]) z += std::exp(logits[i] - max_logit);
  std::vector<T> p(n, T(0));
  for (int i = 0; i < n; ++i)
    if (mask[i]) p[i] = std::exp(logits[i] - max_logit) / z;
  const T logp = logits[action] - max_logit - std::log(z);

  PolicyLossTerms<T> out;
  T entropy = 0;
  for (int i = 0; i < n; ++i)
    if (mask[i] && p[i] > 0) entropy -= p[i] * std::log(p[i]);
  out.entropy = entropy;

  // policy term and its scale on d(logp)/d(logits)
  T policy_scale;  // dL_pi/dlogp
  if (clip_eps > 0) {
    const T ratio = std::exp(logp - old_logp);
    const T clipped = std::clamp(ratio, 1 - clip_eps, 1 + clip_eps);
    const T surr1 = ratio * advantage, surr2 = clipped * advantage;
    out.policy_term = -std::min(surr1, surr2);
    policy_scale = surr1 <= surr2 ? -advantage * ratio : T(0);
  } else {
    out.policy_term = -logp * advantage;
    policy_scale = -advantage;
  }
  const T verr = value - target_return;
  out.value_term = value_coef * verr * verr;
  out.total = out.policy_term + out.value_term - entropy_coef * entropy;

  if (grad_logits) {
    for (int i = 0; i < n; ++i) {
      if (!mask[i]) continue;
      const T dlogp = (i == action ? T(1) : T(0)) - p[i];
      const T dentropy = -p[i] * (std::log(std::max(p[i], std::numeric_limits<T>::min())) + entropy);
      grad_logits[i] += policy_scale * dlogp - entropy_coef * dentropy;
    }
  }
  if (grad_value) *grad_value += 2 * value_coef * verr;
  return out;
}

// Tape op for one transition; returns the scalar loss on the graph.
inline std::tuple<nn::TensorPtr, PolicyLossTerms<float>> policy_loss(
    nn::Graph& g, nn::TensorPtr logits, nn::TensorPtr value, const Image<uint8_t>& mask,
    int action, float advantage, float target_return, float old_logp, float clip_eps,
    float value_coef, float entropy_coef) {
  const int n = static_cast<int>(logits->size());
  auto gl = std::make_shared<std::vector<float>>(n, 0.0f);
  auto gv = std::make_shared<float>(0.0f);
  const auto terms = policy_loss_core<float>(
      logits->v.data(), mask.data().data(), n, action, value->v[0], advantage, target_return,
      old_logp, clip_eps, value_coef, entropy_coef, gl->data(), gv.get());
  nn::TensorPtr loss = nn::make_tensor({1});
  loss->v[0] = terms.total;
  g.record([=]() {
    const float d = loss->g[0];
    for (int i = 0; i < n; ++i) logits->g[i] += d * (*gl)[i];
    value->g[0] += d * *gv;
  });
  return {loss, terms};
}

}  // namespace cods
