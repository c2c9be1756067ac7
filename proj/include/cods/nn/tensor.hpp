#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "cods/random.hpp"

namespace cods::nn {

struct Tensor {
  std::vector<int> shape;
  std::vector<float> v;  // values
  std::vector<float> g;  // gradient, same layout

  int64_t size() const { return static_cast<int64_t>(v.size()); }
  int dim(int i) const { return shape[i]; }
  void zero_grad() { std::fill(g.begin(), g.end(), 0.0f); }
};

using TensorPtr = std::shared_ptr<Tensor>;

inline TensorPtr make_tensor(std::vector<int> shape) {
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  const int64_t n = std::accumulate(t->shape.begin(), t->shape.end(), int64_t{1},
                                    std::multiplies<int64_t>());
  t->v.assign(n, 0.0f);
  t->g.assign(n, 0.0f);
  return t;
}

// Reverse-mode tape. Ops append closures; backward() runs them in reverse.
class Graph {
 public:
  void record(std::function<void()> fn) { tape_.push_back(std::move(fn)); }

  void backward(const TensorPtr& loss) {
    if (loss->size() != 1) throw std::runtime_error("backward: loss must be scalar");
    loss->g[0] = 1.0f;
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
  }

  void clear() { tape_.clear(); }

 private:
  std::vector<std::function<void()>> tape_;
};

// Named parameter set with stable iteration order.
class ParamStore {
 public:
  TensorPtr get(const std::string& name, const std::vector<int>& shape,
                const std::function<void(Tensor&)>& init) {
    auto it = index_.find(name);
    if (it != index_.end()) {
      if (params_[it->second].second->shape != shape)
        throw std::runtime_error("param shape mismatch: " + name);
      return params_[it->second].second;
    }
    TensorPtr t = make_tensor(shape);
    init(*t);
    index_[name] = params_.size();
    params_.emplace_back(name, t);
    return t;
  }

  const std::vector<std::pair<std::string, TensorPtr>>& entries() const { return params_; }

  TensorPtr find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].second;
  }

  void zero_grad() {
    for (auto& [name, t] : params_) t->zero_grad();
  }

  int64_t parameter_count() const {
    int64_t n = 0;
    for (const auto& [name, t] : params_) n += t->size();
    return n;
  }

 private:
  std::vector<std::pair<std::string, TensorPtr>> params_;
  std::map<std::string, size_t> index_;
};

inline std::function<void(Tensor&)> he_init(Rng& rng, int fan_in) {
  const double stddev = std::sqrt(2.0 / std::max(1, fan_in));
  return [&rng, stddev](Tensor& t) {
    for (auto& x : t.v) x = static_cast<float>(rng.gaussian(0.0, stddev));
  };
}

inline std::function<void(Tensor&)> const_init(float value) {
  return [value](Tensor& t) { std::fill(t.v.begin(), t.v.end(), value); };
}

// Adam with classic L2 weight decay folded into the gradient.
class Adam {
 public:
  struct Config {
    float lr = 3e-4f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    float weight_decay = 0.0f;
  };

  explicit Adam(Config cfg) : cfg_(cfg) {}

  void set_lr(float lr) { cfg_.lr = lr; }
  float lr() const { return cfg_.lr; }

  void step(ParamStore& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (const auto& [name, p] : params.entries()) {
      auto& st = state_[name];
      if (st.m.empty()) {
        st.m.assign(p->size(), 0.0f);
        st.v.assign(p->size(), 0.0f);
      }
      for (int64_t i = 0; i < p->size(); ++i) {
        const float grad = p->g[i] + cfg_.weight_decay * p->v[i];
        st.m[i] = cfg_.beta1 * st.m[i] + (1 - cfg_.beta1) * grad;
        st.v[i] = cfg_.beta2 * st.v[i] + (1 - cfg_.beta2) * grad * grad;
        const double mhat = st.m[i] / bc1, vhat = st.v[i] / bc2;
        p->v[i] -= static_cast<float>(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

 private:
  struct State {
    std::vector<float> m, v;
  };
  Config cfg_;
  int64_t t_ = 0;
  std::map<std::string, State> state_;
};

}  // namespace cods::nn
