#pragma once

#include "cods/nn/tensor.hpp"

namespace cods::nn {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

// --- conv2d on {C,H,W} tensors via im2col + GEMM ---

namespace detail {

inline void im2col(const float* x, int C, int H, int W, int kh, int kw, int stride, int pad,
                   int OH, int OW, float* cols) {
  // cols layout: (C*kh*kw) x (OH*OW)
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        float* row = cols + ((static_cast<int64_t>(c) * kh + ky) * kw + kx) * OH * OW;
        for (int oy = 0; oy < OH; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= H) {
            std::fill(row + oy * OW, row + (oy + 1) * OW, 0.0f);
            continue;
          }
          const float* src = x + (static_cast<int64_t>(c) * H + iy) * W;
          for (int ox = 0; ox < OW; ++ox) {
            const int ix = ox * stride + kx - pad;
            row[oy * OW + ox] = (ix < 0 || ix >= W) ? 0.0f : src[ix];
          }
        }
      }
}

inline void col2im_accumulate(const float* cols, int C, int H, int W, int kh, int kw, int stride,
                              int pad, int OH, int OW, float* x_grad) {
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const float* row = cols + ((static_cast<int64_t>(c) * kh + ky) * kw + kx) * OH * OW;
        for (int oy = 0; oy < OH; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= H) continue;
          float* dst = x_grad + (static_cast<int64_t>(c) * H + iy) * W;
          for (int ox = 0; ox < OW; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < W) dst[ix] += row[oy * OW + ox];
          }
        }
      }
}

}  // namespace detail

// x: {C,H,W}; w: {OC,C,kh,kw}; b: {OC}. Returns {OC,OH,OW}.
inline TensorPtr conv2d(Graph& g, TensorPtr x, TensorPtr w, TensorPtr b, int stride = 1,
                        int pad = 0) {
  const int C = x->dim(0), H = x->dim(1), W = x->dim(2);
  const int OC = w->dim(0), kh = w->dim(2), kw = w->dim(3);
  if (w->dim(1) != C) throw std::runtime_error("conv2d: channel mismatch");
  const int OH = (H + 2 * pad - kh) / stride + 1;
  const int OW = (W + 2 * pad - kw) / stride + 1;
  TensorPtr y = make_tensor({OC, OH, OW});

  auto cols = std::make_shared<std::vector<float>>(
      static_cast<size_t>(C) * kh * kw * OH * OW);
  detail::im2col(x->v.data(), C, H, W, kh, kw, stride, pad, OH, OW, cols->data());
  {
    CMapMat wm(w->v.data(), OC, C * kh * kw);
    CMapMat cm(cols->data(), C * kh * kw, OH * OW);
    MapMat ym(y->v.data(), OC, OH * OW);
    ym.noalias() = wm * cm;
    for (int oc = 0; oc < OC; ++oc) ym.row(oc).array() += b->v[oc];
  }
  g.record([=]() {
    CMapMat dym(y->g.data(), OC, OH * OW);
    CMapMat cm(cols->data(), C * kh * kw, OH * OW);
    MapMat dwm(w->g.data(), OC, C * kh * kw);
    dwm.noalias() += dym * cm.transpose();
    // plain loop: Eigen's vectorized sum peels to runtime pointer alignment,
    // which makes results depend on where the heap placed the buffer
    for (int oc = 0; oc < OC; ++oc) {
      double s = 0;
      for (int i = 0; i < OH * OW; ++i) s += y->g[static_cast<int64_t>(oc) * OH * OW + i];
      b->g[oc] += static_cast<float>(s);
    }
    CMapMat wm(w->v.data(), OC, C * kh * kw);
    std::vector<float> dcols(cols->size());
    MapMat dcm(dcols.data(), C * kh * kw, OH * OW);
    dcm.noalias() = wm.transpose() * dym;
    detail::col2im_accumulate(dcols.data(), C, H, W, kh, kw, stride, pad, OH, OW, x->g.data());
  });
  return y;
}

inline TensorPtr relu(Graph& g, TensorPtr x) {
  TensorPtr y = make_tensor(x->shape);
  for (int64_t i = 0; i < x->size(); ++i) y->v[i] = std::max(0.0f, x->v[i]);
  g.record([=]() {
    for (int64_t i = 0; i < x->size(); ++i)
      if (x->v[i] > 0) x->g[i] += y->g[i];
  });
  return y;
}

inline TensorPtr add(Graph& g, TensorPtr a, TensorPtr b) {
  if (a->shape != b->shape) throw std::runtime_error("add: shape mismatch");
  TensorPtr y = make_tensor(a->shape);
  for (int64_t i = 0; i < a->size(); ++i) y->v[i] = a->v[i] + b->v[i];
  g.record([=]() {
    for (int64_t i = 0; i < a->size(); ++i) {
      a->g[i] += y->g[i];
      b->g[i] += y->g[i];
    }
  });
  return y;
}

inline TensorPtr concat_channels(Graph& g, const std::vector<TensorPtr>& xs) {
  int C = 0;
  const int H = xs.at(0)->dim(1), W = xs[0]->dim(2);
  for (const auto& x : xs) {
    if (x->dim(1) != H || x->dim(2) != W) throw std::runtime_error("concat: spatial mismatch");
    C += x->dim(0);
  }
  TensorPtr y = make_tensor({C, H, W});
  int64_t off = 0;
  for (const auto& x : xs) {
    std::copy(x->v.begin(), x->v.end(), y->v.begin() + off);
    off += x->size();
  }
  g.record([=]() {
    int64_t o = 0;
    for (const auto& x : xs) {
      for (int64_t i = 0; i < x->size(); ++i) x->g[i] += y->g[o + i];
      o += x->size();
    }
  });
  return y;
}

// Per-channel normalization over the spatial dims (batch size is 1 throughout),
// with learnable scale/shift.
inline TensorPtr instance_norm(Graph& g, TensorPtr x, TensorPtr gamma, TensorPtr beta,
                               float eps = 1e-5f) {
  const int C = x->dim(0);
  const int64_t N = x->dim(1) * static_cast<int64_t>(x->dim(2));
  TensorPtr y = make_tensor(x->shape);
  auto xhat = std::make_shared<std::vector<float>>(x->size());
  auto inv_std = std::make_shared<std::vector<float>>(C);
  for (int c = 0; c < C; ++c) {
    const float* xc = x->v.data() + c * N;
    double mu = 0;
    for (int64_t i = 0; i < N; ++i) mu += xc[i];
    mu /= N;
    double var = 0;
    for (int64_t i = 0; i < N; ++i) var += (xc[i] - mu) * (xc[i] - mu);
    var /= N;
    const float is = static_cast<float>(1.0 / std::sqrt(var + eps));
    (*inv_std)[c] = is;
    float* xh = xhat->data() + c * N;
    float* yc = y->v.data() + c * N;
    for (int64_t i = 0; i < N; ++i) {
      xh[i] = (xc[i] - static_cast<float>(mu)) * is;
      yc[i] = gamma->v[c] * xh[i] + beta->v[c];
    }
  }
  g.record([=]() {
    for (int c = 0; c < C; ++c) {
      const float* xh = xhat->data() + c * N;
      const float* dy = y->g.data() + c * N;
      double dgamma = 0, dbeta = 0, dxh_sum = 0, dxh_xh_sum = 0;
      for (int64_t i = 0; i < N; ++i) {
        dgamma += dy[i] * xh[i];
        dbeta += dy[i];
        const double dxh = dy[i] * gamma->v[c];
        dxh_sum += dxh;
        dxh_xh_sum += dxh * xh[i];
      }
      gamma->g[c] += static_cast<float>(dgamma);
      beta->g[c] += static_cast<float>(dbeta);
      float* dx = x->g.data() + c * N;
      const double scale = (*inv_std)[c] / double(N);
      for (int64_t i = 0; i < N; ++i) {
        const double dxh = double(dy[i]) * gamma->v[c];
        dx[i] += static_cast<float>(scale * (N * dxh - dxh_sum - xh[i] * dxh_xh_sum));
      }
    }
  });
  return y;
}

// Bilinear resize with half-pixel sampling.
inline TensorPtr resize_bilinear(Graph& g, TensorPtr x, int OH, int OW) {
  const int C = x->dim(0), H = x->dim(1), W = x->dim(2);
  TensorPtr y = make_tensor({C, OH, OW});
  struct Tap {
    int x0, x1, y0, y1;
    float wx, wy;
  };
  auto taps = std::make_shared<std::vector<Tap>>(static_cast<size_t>(OH) * OW);
  const double sy = double(H) / OH, sx = double(W) / OW;
  for (int oy = 0; oy < OH; ++oy)
    for (int ox = 0; ox < OW; ++ox) {
      const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, double(H - 1));
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, double(W - 1));
      Tap& t = (*taps)[oy * OW + ox];
      t.y0 = static_cast<int>(fy);
      t.x0 = static_cast<int>(fx);
      t.y1 = std::min(t.y0 + 1, H - 1);
      t.x1 = std::min(t.x0 + 1, W - 1);
      t.wy = static_cast<float>(fy - t.y0);
      t.wx = static_cast<float>(fx - t.x0);
    }
  for (int c = 0; c < C; ++c) {
    const float* xc = x->v.data() + static_cast<int64_t>(c) * H * W;
    float* yc = y->v.data() + static_cast<int64_t>(c) * OH * OW;
    for (size_t i = 0; i < taps->size(); ++i) {
      const Tap& t = (*taps)[i];
      const float top = xc[t.y0 * W + t.x0] * (1 - t.wx) + xc[t.y0 * W + t.x1] * t.wx;
      const float bot = xc[t.y1 * W + t.x0] * (1 - t.wx) + xc[t.y1 * W + t.x1] * t.wx;
      yc[i] = top * (1 - t.wy) + bot * t.wy;
    }
  }
  g.record([=]() {
    for (int c = 0; c < C; ++c) {
      float* dx = x->g.data() + static_cast<int64_t>(c) * H * W;
      const float* dy = y->g.data() + static_cast<int64_t>(c) * OH * OW;
      for (size_t i = 0; i < taps->size(); ++i) {
        const Tap& t = (*taps)[i];
        const float d = dy[i];
        dx[t.y0 * W + t.x0] += d * (1 - t.wx) * (1 - t.wy);
        dx[t.y0 * W + t.x1] += d * t.wx * (1 - t.wy);
        dx[t.y1 * W + t.x0] += d * (1 - t.wx) * t.wy;
        dx[t.y1 * W + t.x1] += d * t.wx * t.wy;
      }
    }
  });
  return y;
}

// x: {N}; w: {O,N}; b: {O}.
inline TensorPtr linear(Graph& g, TensorPtr x, TensorPtr w, TensorPtr b) {
  const int O = w->dim(0), N = w->dim(1);
  if (x->size() != N) throw std::runtime_error("linear: size mismatch");
  TensorPtr y = make_tensor({O});
  // plain loops: these layers are small, and Eigen's vector kernels can pick
  // accumulation orders based on runtime pointer alignment
  for (int o = 0; o < O; ++o) {
    double s = b->v[o];
    for (int n = 0; n < N; ++n) s += w->v[static_cast<int64_t>(o) * N + n] * x->v[n];
    y->v[o] = static_cast<float>(s);
  }
  g.record([=]() {
    for (int o = 0; o < O; ++o) {
      const float dy = y->g[o];
      b->g[o] += dy;
      for (int n = 0; n < N; ++n) {
        x->g[n] += w->v[static_cast<int64_t>(o) * N + n] * dy;
        w->g[static_cast<int64_t>(o) * N + n] += x->v[n] * dy;
      }
    }
  });
  return y;
}

// {C,H,W} -> per-channel mean {C}
inline TensorPtr global_avg_pool(Graph& g, TensorPtr x) {
  const int C = x->dim(0);
  const int64_t N = x->dim(1) * static_cast<int64_t>(x->dim(2));
  TensorPtr y = make_tensor({C});
  for (int c = 0; c < C; ++c) {
    double s = 0;
    for (int64_t i = 0; i < N; ++i) s += x->v[c * N + i];
    y->v[c] = static_cast<float>(s / N);
  }
  g.record([=]() {
    for (int c = 0; c < C; ++c) {
      const float d = y->g[c] / N;
      for (int64_t i = 0; i < N; ++i) x->g[c * N + i] += d;
    }
  });
  return y;
}

}  // namespace cods::nn
