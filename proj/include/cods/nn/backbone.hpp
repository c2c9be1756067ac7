#pragma once

#include "json.hpp"

#include "cods/nn/ops.hpp"

namespace cods::nn {

// Residual backbone with effective stride 8: stem (stride 2) then four stages
// at strides {2,4,8,8} relative to the input. Stage outputs are exposed for
// U-Net style consumers.
struct BackboneConfig {
  int input_channels = 4;
  int stem_width = 64;
  std::vector<int> stage_widths = {64, 128, 256, 512};
  std::vector<int> stage_blocks = {3, 4, 6, 3};  // 34-layer residual net

  static BackboneConfig resnet34(int input_channels) {
    BackboneConfig c;
    c.input_channels = input_channels;
    return c;
  }
  static BackboneConfig small(int input_channels) {
    BackboneConfig c;
    c.input_channels = input_channels;
    c.stem_width = 16;
    c.stage_widths = {16, 32, 48, 48};
    c.stage_blocks = {1, 1, 1, 1};
    return c;
  }
};

inline void to_json(nlohmann::json& j, const BackboneConfig& c) {
  j = {{"input_channels", c.input_channels},
       {"stem_width", c.stem_width},
       {"stage_widths", c.stage_widths},
       {"stage_blocks", c.stage_blocks}};
}
inline void from_json(const nlohmann::json& j, BackboneConfig& c) {
  j.at("input_channels").get_to(c.input_channels);
  j.at("stem_width").get_to(c.stem_width);
  j.at("stage_widths").get_to(c.stage_widths);
  j.at("stage_blocks").get_to(c.stage_blocks);
}

// Builds/reuses parameters from `params` under `prefix`; call forward once per
// graph. The same instance can be shared across graphs (weights persist in the
// store).
class Backbone {
 public:
  Backbone(BackboneConfig cfg, ParamStore& params, std::string prefix, Rng& rng)
      : cfg_(std::move(cfg)), params_(&params), prefix_(std::move(prefix)) {
    // materialize all parameters up front so checkpoints can be loaded
    // before the first forward
    Graph scratch;
    TensorPtr dummy = make_tensor({cfg_.input_channels, 16, 16});
    init_rng_ = &rng;
    forward(scratch, dummy);
    init_rng_ = nullptr;
  }

  // Re-point at the owning network's store after the owner is moved.
  void rebind(ParamStore& params) { params_ = &params; }

  struct Output {
    TensorPtr features;               // last stage, stride 8
    std::vector<TensorPtr> stages;    // strides {2,4,8,8}
  };

  Output forward(Graph& g, TensorPtr x) {
    int c = 0;
    TensorPtr h = conv_norm_relu(g, x, cfg_.stem_width, 7, 2, 3, c);
    Output out;
    int width = cfg_.stem_width;
    for (size_t s = 0; s < cfg_.stage_widths.size(); ++s) {
      const int stride = (s == 1 || s == 2) ? 2 : 1;  // strides 2,4,8,8
      for (int b = 0; b < cfg_.stage_blocks[s]; ++b)
        h = residual_block(g, h, width, cfg_.stage_widths[s], b == 0 ? stride : 1, c),
        width = cfg_.stage_widths[s];
      out.stages.push_back(h);
    }
    out.features = h;
    return out;
  }

  const BackboneConfig& config() const { return cfg_; }

 private:
  TensorPtr param(const std::string& name, std::vector<int> shape, int fan_in, float fill) {
    return params_->get(prefix_ + name, shape,
                        init_rng_ ? (fan_in > 0 ? he_init(*init_rng_, fan_in) : const_init(fill))
                                  : const_init(fill));
  }

  TensorPtr conv_norm_relu(Graph& g, TensorPtr x, int out_c, int k, int stride, int pad,
                           int& counter) {
    const std::string base = "conv" + std::to_string(counter++);
    const int in_c = x->dim(0);
    TensorPtr w = param(base + ".w", {out_c, in_c, k, k}, in_c * k * k, 0);
    TensorPtr b = param(base + ".b", {out_c}, 0, 0.0f);
    TensorPtr gamma = param(base + ".gamma", {out_c}, 0, 1.0f);
    TensorPtr beta = param(base + ".beta", {out_c}, 0, 0.0f);
    return relu(g, instance_norm(g, conv2d(g, x, w, b, stride, pad), gamma, beta));
  }

  TensorPtr residual_block(Graph& g, TensorPtr x, int in_c, int out_c, int stride,
                           int& counter) {
    const std::string base = "block" + std::to_string(counter++);
    TensorPtr w1 = param(base + ".w1", {out_c, in_c, 3, 3}, in_c * 9, 0);
    TensorPtr b1 = param(base + ".b1", {out_c}, 0, 0.0f);
    TensorPtr g1 = param(base + ".g1", {out_c}, 0, 1.0f);
    TensorPtr be1 = param(base + ".be1", {out_c}, 0, 0.0f);
    TensorPtr w2 = param(base + ".w2", {out_c, out_c, 3, 3}, out_c * 9, 0);
    TensorPtr b2 = param(base + ".b2", {out_c}, 0, 0.0f);
    TensorPtr g2 = param(base + ".g2", {out_c}, 0, 1.0f);
    TensorPtr be2 = param(base + ".be2", {out_c}, 0, 0.0f);

    TensorPtr h = relu(g, instance_norm(g, conv2d(g, x, w1, b1, stride, 1), g1, be1));
    h = instance_norm(g, conv2d(g, h, w2, b2, 1, 1), g2, be2);

    TensorPtr skip = x;
    if (stride != 1 || in_c != out_c) {
      TensorPtr ws = param(base + ".ws", {out_c, in_c, 1, 1}, in_c, 0);
      TensorPtr bs = param(base + ".bs", {out_c}, 0, 0.0f);
      TensorPtr gs = param(base + ".gs", {out_c}, 0, 1.0f);
      TensorPtr bes = param(base + ".bes", {out_c}, 0, 0.0f);
      skip = instance_norm(g, conv2d(g, x, ws, bs, stride, 0), gs, bes);
    }
    return relu(g, add(g, h, skip));
  }

  BackboneConfig cfg_;
  ParamStore* params_;
  std::string prefix_;
  Rng* init_rng_ = nullptr;
};

}  // namespace cods::nn
