#pragma once

#include "cods/correspond.hpp"
#include "cods/nn/backbone.hpp"
#include "cods/nn/checkpoint.hpp"

namespace cods {

enum class InputMode { depth, rgb, rgbd };

inline int input_mode_channels(InputMode m) {
  switch (m) {
    case InputMode::depth: return 1;
    case InputMode::rgb: return 3;
    case InputMode::rgbd: return 4;
  }
  return 0;
}
inline const char* input_mode_name(InputMode m) {
  switch (m) {
    case InputMode::depth: return "depth";
    case InputMode::rgb: return "rgb";
    case InputMode::rgbd: return "rgbd";
  }
  return "?";
}
inline InputMode input_mode_from_name(const std::string& s) {
  if (s == "depth") return InputMode::depth;
  if (s == "rgb") return InputMode::rgb;
  if (s == "rgbd") return InputMode::rgbd;
  throw DomainError("unknown input mode: " + s);
}

// Channel-major per-pixel descriptor field.
struct DescriptorMap {
  int width = 0, height = 0, dim = 0;
  std::vector<float> values;  // layout [d][y][x]

  float at(int x, int y, int d) const {
    return values[(static_cast<size_t>(d) * height + y) * width + x];
  }
  static DescriptorMap from_tensor(const nn::Tensor& t) {
    return {t.shape[2], t.shape[1], t.shape[0], t.v};
  }
};

struct DescriptorNetConfig {
  InputMode input = InputMode::rgbd;
  int descriptor_dim = 8;
  float margin = 0.5f;
  nn::BackboneConfig backbone = nn::BackboneConfig::resnet34(4);
  // input scaling: rgb mapped to [0,1], depth standardized by these
  float depth_mean = 0.7f;
  float depth_std = 0.15f;

  static DescriptorNetConfig desk_scale(InputMode mode = InputMode::rgbd) {
    DescriptorNetConfig c;
    c.input = mode;
    c.backbone = nn::BackboneConfig::small(input_mode_channels(mode));
    return c;
  }
};

inline void to_json(nlohmann::json& j, const DescriptorNetConfig& c) {
  j = {{"input", input_mode_name(c.input)}, {"descriptor_dim", c.descriptor_dim},
       {"margin", c.margin},               {"backbone", c.backbone},
       {"depth_mean", c.depth_mean},       {"depth_std", c.depth_std}};
}
inline void from_json(const nlohmann::json& j, DescriptorNetConfig& c) {
  c.input = input_mode_from_name(j.at("input"));
  j.at("descriptor_dim").get_to(c.descriptor_dim);
  j.at("margin").get_to(c.margin);
  j.at("backbone").get_to(c.backbone);
  j.at("depth_mean").get_to(c.depth_mean);
  j.at("depth_std").get_to(c.depth_std);
}

// Build the network input tensor from a frame. Invalid depth maps to 0 after
// standardization.
inline nn::TensorPtr make_input_tensor(const RGBDFrame& frame, InputMode mode, float depth_mean,
                                       float depth_std) {
  const int W = frame.depth.width(), H = frame.depth.height();
  nn::TensorPtr x = nn::make_tensor({input_mode_channels(mode), H, W});
  int c = 0;
  if (mode == InputMode::rgb || mode == InputMode::rgbd) {
    for (int ch = 0; ch < 3; ++ch, ++c)
      for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx)
          x->v[(static_cast<size_t>(c) * H + y) * W + xx] = frame.rgb.at(xx, y)[ch] / 255.0f;
  }
  if (mode == InputMode::depth || mode == InputMode::rgbd) {
    for (int y = 0; y < H; ++y)
      for (int xx = 0; xx < W; ++xx) {
        const float d = frame.depth.at(xx, y);
        x->v[(static_cast<size_t>(c) * H + y) * W + xx] =
            d > 0 ? (d - depth_mean) / depth_std : 0.0f;
      }
  }
  return x;
}

// The CODs network: residual backbone plus a 1x1 projection to D channels,
// bilinearly upsampled back to input resolution.
class DescriptorNet {
 public:
  DescriptorNet(DescriptorNetConfig cfg, uint64_t init_seed = 0)
      : cfg_(std::move(cfg)), rng_(init_seed) {
    if (cfg_.backbone.input_channels != input_mode_channels(cfg_.input))
      throw DomainError("DescriptorNet: backbone channels do not match input mode");
    if (cfg_.descriptor_dim < 2) throw DomainError("DescriptorNet: descriptor_dim must be >= 2");
    if (cfg_.margin <= 0) throw DomainError("DescriptorNet: margin must be positive");
    backbone_.emplace(cfg_.backbone, params_, "backbone.", rng_);
    const int fc = cfg_.backbone.stage_widths.back();
    head_w_ = params_.get("head.w", {cfg_.descriptor_dim, fc, 1, 1}, nn::he_init(rng_, fc));
    head_b_ = params_.get("head.b", {cfg_.descriptor_dim}, nn::const_init(0.0f));
  }

  // The backbone holds a pointer into params_, so moves must rebind it.
  DescriptorNet(DescriptorNet&& other) noexcept
      : cfg_(std::move(other.cfg_)),
        rng_(other.rng_),
        params_(std::move(other.params_)),
        backbone_(std::move(other.backbone_)),
        head_w_(std::move(other.head_w_)),
        head_b_(std::move(other.head_b_)) {
    if (backbone_) backbone_->rebind(params_);
  }
  DescriptorNet& operator=(DescriptorNet&& other) noexcept {
    cfg_ = std::move(other.cfg_);
    rng_ = other.rng_;
    params_ = std::move(other.params_);
    backbone_ = std::move(other.backbone_);
    head_w_ = std::move(other.head_w_);
    head_b_ = std::move(other.head_b_);
    if (backbone_) backbone_->rebind(params_);
    return *this;
  }
  DescriptorNet(const DescriptorNet&) = delete;
  DescriptorNet& operator=(const DescriptorNet&) = delete;

  struct Forward {
    nn::TensorPtr descriptor_map;       // {D,H,W} at input resolution
    std::vector<nn::TensorPtr> stages;  // strides {2,4,8,8}
  };

  Forward forward(nn::Graph& g, nn::TensorPtr input) {
    if (input->dim(0) != cfg_.backbone.input_channels)
      throw DomainError("DescriptorNet: input channel mismatch");
    auto out = backbone_->forward(g, input);
    nn::TensorPtr low = nn::conv2d(g, out.features, head_w_, head_b_, 1, 0);
    return {nn::resize_bilinear(g, low, input->dim(1), input->dim(2)), out.stages};
  }

  DescriptorMap infer(const RGBDFrame& frame) {
    nn::Graph g;
    auto x = make_input_tensor(frame, cfg_.input, cfg_.depth_mean, cfg_.depth_std);
    return DescriptorMap::from_tensor(*forward(g, x).descriptor_map);
  }

  const DescriptorNetConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  void save(const std::string& path, nlohmann::json extra_meta = {}) const {
    nlohmann::json meta = extra_meta;
    meta["kind"] = "descriptor";
    meta["config"] = cfg_;
    nn::save_checkpoint(path, meta, params_);
  }
  static DescriptorNet load(const std::string& path) {
    const nlohmann::json meta = nn::read_checkpoint_meta(path);
    DescriptorNet net(meta.at("config").get<DescriptorNetConfig>());
    nn::load_checkpoint_params(path, net.params_);
    return net;
  }

 private:
  DescriptorNetConfig cfg_;
  Rng rng_;
  nn::ParamStore params_;
  std::optional<nn::Backbone> backbone_;
  nn::TensorPtr head_w_, head_b_;
};

// --- pixel-wise contrastive loss ---

template <typename T>
struct ContrastiveTerms {
  T total{}, match_term{}, nonmatch_term{};
};

// Core loss on raw channel-major maps, usable at double precision for the
// finite-difference oracle. Non-match classes are computed separately and
// summed with equal weight unless `pooled`.
template <typename T>
ContrastiveTerms<T> contrastive_loss_core(const T* a, const T* b, int W, int H, int D,
                                          const PixelMatchSet& pairs, T margin, bool pooled,
                                          T* grad_a = nullptr, T* grad_b = nullptr) {
  if (pairs.matches.empty()) throw DomainError("contrastive_loss: empty match set");
  auto idx = [W, H](const Eigen::Vector2i& u, int d) {
    return (static_cast<size_t>(d) * H + u.y()) * W + u.x();
  };
  auto check = [W, H](const Eigen::Vector2i& u) {
    if (u.x() < 0 || u.x() >= W || u.y() < 0 || u.y() >= H)
      throw DomainError("contrastive_loss: pixel out of bounds");
  };

  ContrastiveTerms<T> out;
  const T nm = static_cast<T>(pairs.matches.size());
  for (const auto& [ua, ub] : pairs.matches) {
    check(ua);
    check(ub);
    for (int d = 0; d < D; ++d) {
      const T diff = a[idx(ua, d)] - b[idx(ub, d)];
      out.match_term += diff * diff / nm;
      if (grad_a) {
        grad_a[idx(ua, d)] += 2 * diff / nm;
        grad_b[idx(ub, d)] -= 2 * diff / nm;
      }
    }
  }

  std::vector<const std::vector<PixelPair>*> classes;
  if (pooled) {
    static thread_local std::vector<PixelPair> all;
    all.clear();
    for (const auto* v : {&pairs.nonmatch_oo, &pairs.nonmatch_ob, &pairs.nonmatch_bb})
      all.insert(all.end(), v->begin(), v->end());
    classes = {&all};
  } else {
    classes = {&pairs.nonmatch_oo, &pairs.nonmatch_ob, &pairs.nonmatch_bb};
  }

  for (const auto* cls : classes) {
    // first pass: count the non-zero hinge terms (N_{nm>0})
    int active = 0;
    for (const auto& [ua, ub] : *cls) {
      check(ua);
      check(ub);
      T d2 = 0;
      for (int d = 0; d < D; ++d) {
        const T diff = a[idx(ua, d)] - b[idx(ub, d)];
        d2 += diff * diff;
      }
      if (std::sqrt(d2) < margin) ++active;
    }
    if (active == 0) continue;
    T cls_term = 0;
    for (const auto& [ua, ub] : *cls) {
      T d2 = 0;
      for (int d = 0; d < D; ++d) {
        const T diff = a[idx(ua, d)] - b[idx(ub, d)];
        d2 += diff * diff;
      }
      const T dist = std::sqrt(d2);
      if (dist >= margin) continue;
      const T hinge = margin - dist;
      cls_term += hinge * hinge / active;
      if (grad_a && dist > 0) {
        const T scale = -2 * hinge / (dist * active);
        for (int d = 0; d < D; ++d) {
          const T diff = a[idx(ua, d)] - b[idx(ub, d)];
          grad_a[idx(ua, d)] += scale * diff;
          grad_b[idx(ub, d)] -= scale * diff;
        }
      }
    }
    out.nonmatch_term += cls_term;
  }
  out.total = out.match_term + out.nonmatch_term;
  return out;
}

// Tape op over descriptor-map tensors; returns (L, L_m, L_nm) with L on the
// graph.
inline std::tuple<nn::TensorPtr, float, float> contrastive_loss(nn::Graph& g, nn::TensorPtr map_a,
                                                                nn::TensorPtr map_b,
                                                                const PixelMatchSet& pairs,
                                                                float margin,
                                                                bool pooled = false) {
  const int D = map_a->dim(0), H = map_a->dim(1), W = map_a->dim(2);
  auto ga = std::make_shared<std::vector<float>>(map_a->size(), 0.0f);
  auto gb = std::make_shared<std::vector<float>>(map_b->size(), 0.0f);
  const auto terms = contrastive_loss_core<float>(map_a->v.data(), map_b->v.data(), W, H, D,
                                                  pairs, margin, pooled, ga->data(), gb->data());
  nn::TensorPtr loss = nn::make_tensor({1});
  loss->v[0] = terms.total;
  g.record([=]() {
    const float d = loss->g[0];
    for (int64_t i = 0; i < map_a->size(); ++i) map_a->g[i] += d * (*ga)[i];
    for (int64_t i = 0; i < map_b->size(); ++i) map_b->g[i] += d * (*gb)[i];
  });
  return {loss, terms.match_term, terms.nonmatch_term};
}

// --- best match lookup ---

struct BestMatch {
  Eigen::Vector2i pixel;
  float distance = 0;
  Image<float> heatmap;  // descriptor distance per pixel
};

inline BestMatch best_match(const DescriptorMap& map_a, const Eigen::Vector2i& u_a,
                            const DescriptorMap& map_b) {
  if (u_a.x() < 0 || u_a.x() >= map_a.width || u_a.y() < 0 || u_a.y() >= map_a.height)
    throw DomainError("best_match: query pixel out of bounds");
  BestMatch out;
  out.heatmap = Image<float>(map_b.width, map_b.height, 0.0f);
  float best = std::numeric_limits<float>::infinity();
  for (int y = 0; y < map_b.height; ++y)
    for (int x = 0; x < map_b.width; ++x) {
      float d2 = 0;
      for (int d = 0; d < map_a.dim; ++d) {
        const float diff = map_a.at(u_a.x(), u_a.y(), d) - map_b.at(x, y, d);
        d2 += diff * diff;
      }
      const float dist = std::sqrt(d2);
      out.heatmap.at(x, y) = dist;
      if (dist < best) {  // strict: row-major first occurrence wins ties
        best = dist;
        out.pixel = {x, y};
        out.distance = dist;
      }
    }
  return out;
}

}  // namespace cods
