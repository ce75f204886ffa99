// Forward and backward passes for every layer the CRNN needs: 2D
// convolution (im2col + GEMM), group normalization, ReLU, 2x2 max
// pooling, adaptive frequency pooling, GRU, linear head, softmax and
// cross-entropy. Parameters are flat-store offsets so a pass is a pure
// function of (params, input); gradients accumulate into a caller-owned
// buffer with the same layout.
#ifndef ANCLAB_NEURAL_LAYERS_HPP
#define ANCLAB_NEURAL_LAYERS_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "anclab/neural/tensor.hpp"

namespace anclab::nn {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline void check_shape(bool ok, const char* what) {
  require(ok, ErrorCode::ShapeError, what);
}

// ---- 2D convolution, stride 1, zero padding preserving H x W ----

template <typename T>
struct Conv2d {
  int cin = 0, cout = 0, k = 3, pad = 1;
  std::size_t w_entry = 0, b_entry = 0;

  void init(ParamStore<T>& store, const std::string& name, int cin_, int cout_, int k_) {
    cin = cin_;
    cout = cout_;
    k = k_;
    pad = k_ / 2;
    w_entry = store.add(name + ".weight", {cout, cin, k, k});
    b_entry = store.add(name + ".bias", {cout});
  }

  struct Ctx {
    Tensor<T> x;  // kept for the weight gradient
  };

  // scratch column strip sized to stay cache-friendly
  int strip_rows(int width) const {
    const std::size_t target = (1u << 21) / sizeof(T);  // ~2 MB
    const std::size_t per_row = static_cast<std::size_t>(cin) * k * k * width;
    return std::max<int>(1, static_cast<int>(target / std::max<std::size_t>(per_row, 1)));
  }

  void im2col(const Tensor<T>& x, int h0, int h1, std::vector<T>& col) const {
    const int H = x.shape[1], W = x.shape[2];
    const int S = (h1 - h0) * W;
    col.assign(static_cast<std::size_t>(cin) * k * k * S, T(0));
    std::size_t row = 0;
    for (int c = 0; c < cin; ++c) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx, ++row) {
          T* dst = col.data() + row * S;
          for (int h = h0; h < h1; ++h) {
            const int sy = h + ky - pad;
            if (sy < 0 || sy >= H) continue;
            const int w_lo = std::max(0, pad - kx);
            const int w_hi = std::min(W, W + pad - kx);
            const T* src = &x.data[(static_cast<std::size_t>(c) * H + sy) * W];
            T* out = dst + static_cast<std::size_t>(h - h0) * W;
            for (int w = w_lo; w < w_hi; ++w) out[w] = src[w + kx - pad];
          }
        }
      }
    }
  }

  Tensor<T> forward(const T* params, const Tensor<T>& x, Ctx* ctx,
                    const ParamStore<T>& store) const {
    check_shape(x.shape.size() == 3 && x.shape[0] == cin, "conv input channels mismatch");
    const int H = x.shape[1], W = x.shape[2];
    Tensor<T> y({cout, H, W});
    const T* wp = params + store.entry(w_entry).offset;
    const T* bp = params + store.entry(b_entry).offset;
    const int kk = cin * k * k;
    std::vector<T> col;
    const int rows = strip_rows(W);
    for (int h0 = 0; h0 < H; h0 += rows) {
      const int h1 = std::min(H, h0 + rows);
      const int S = (h1 - h0) * W;
      im2col(x, h0, h1, col);
      ConstMatMap<T> wm(wp, cout, kk);
      ConstMatMap<T> cm(col.data(), kk, S);
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>, 0,
                 Eigen::OuterStride<>>
          ym(y.data.data() + static_cast<std::size_t>(h0) * W, cout, S,
             Eigen::OuterStride<>(static_cast<long>(H) * W));
      ym.noalias() = wm * cm;
    }
    for (int c = 0; c < cout; ++c) {
      T* yc = &y.data[static_cast<std::size_t>(c) * H * W];
      const T b = bp[c];
      for (int i = 0; i < H * W; ++i) yc[i] += b;
    }
    if (ctx) ctx->x = x;
    return y;
  }

  Tensor<T> backward(const T* /*params_unused*/, const T* params, const Ctx& ctx,
                     const Tensor<T>& dy, T* grads, const ParamStore<T>& store) const {
    const Tensor<T>& x = ctx.x;
    const int H = x.shape[1], W = x.shape[2];
    const int kk = cin * k * k;
    const T* wp = params + store.entry(w_entry).offset;
    T* gw = grads + store.entry(w_entry).offset;
    T* gb = grads + store.entry(b_entry).offset;

    for (int c = 0; c < cout; ++c) {
      const T* dyc = &dy.data[static_cast<std::size_t>(c) * H * W];
      T acc = T(0);
      for (int i = 0; i < H * W; ++i) acc += dyc[i];
      gb[c] += acc;
    }

    Tensor<T> dx({cin, H, W});
    std::vector<T> col, colg;
    const int rows = strip_rows(W);
    for (int h0 = 0; h0 < H; h0 += rows) {
      const int h1 = std::min(H, h0 + rows);
      const int S = (h1 - h0) * W;
      im2col(x, h0, h1, col);
      Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>, 0,
                 Eigen::OuterStride<>>
          dym(dy.data.data() + static_cast<std::size_t>(h0) * W, cout, S,
              Eigen::OuterStride<>(static_cast<long>(H) * W));
      ConstMatMap<T> cm(col.data(), kk, S);
      MatMap<T> gwm(gw, cout, kk);
      gwm.noalias() += dym * cm.transpose();

      colg.assign(static_cast<std::size_t>(kk) * S, T(0));
      ConstMatMap<T> wm(wp, cout, kk);
      MatMap<T> cgm(colg.data(), kk, S);
      cgm.noalias() = wm.transpose() * dym;

      // col2im accumulate
      std::size_t row = 0;
      for (int c = 0; c < cin; ++c) {
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx, ++row) {
            const T* src = colg.data() + row * S;
            for (int h = h0; h < h1; ++h) {
              const int sy = h + ky - pad;
              if (sy < 0 || sy >= H) continue;
              const int w_lo = std::max(0, pad - kx);
              const int w_hi = std::min(W, W + pad - kx);
              T* dst = &dx.data[(static_cast<std::size_t>(c) * H + sy) * W];
              const T* sp = src + static_cast<std::size_t>(h - h0) * W;
              for (int w = w_lo; w < w_hi; ++w) dst[w + kx - pad] += sp[w];
            }
          }
        }
      }
    }
    return dx;
  }
};

// ---- group normalization with per-channel affine ----

template <typename T>
struct GroupNorm {
  int channels = 0, groups = 4;
  T eps = T(1e-5);
  std::size_t g_entry = 0, b_entry = 0;

  void init(ParamStore<T>& store, const std::string& name, int channels_, int groups_) {
    channels = channels_;
    groups = groups_;
    check_shape(channels % groups == 0, "channels must divide into groups");
    g_entry = store.add(name + ".gamma", {channels});
    b_entry = store.add(name + ".beta", {channels});
    // gamma initialized to one
  }

  void default_init(ParamStore<T>& store) {
    T* g = store.data() + store.entry(g_entry).offset;
    for (int c = 0; c < channels; ++c) g[c] = T(1);
  }

  struct Ctx {
    Tensor<T> xhat;
    std::vector<T> inv_std;  // per group
  };

  Tensor<T> forward(const T* params, const Tensor<T>& x, Ctx* ctx,
                    const ParamStore<T>& store) const {
    check_shape(x.shape.size() == 3 && x.shape[0] == channels, "group norm channel mismatch");
    const int H = x.shape[1], W = x.shape[2];
    const int gs = channels / groups;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const std::size_t gelems = plane * gs;
    const T* gamma = params + store.entry(g_entry).offset;
    const T* beta = params + store.entry(b_entry).offset;

    Tensor<T> y({channels, H, W});
    Tensor<T> xhat({channels, H, W});
    std::vector<T> inv_std(static_cast<std::size_t>(groups));
    for (int g = 0; g < groups; ++g) {
      const T* xg = x.data.data() + static_cast<std::size_t>(g) * gelems;
      T mean = T(0);
      for (std::size_t i = 0; i < gelems; ++i) mean += xg[i];
      mean /= static_cast<T>(gelems);
      T var = T(0);
      for (std::size_t i = 0; i < gelems; ++i) {
        const T d = xg[i] - mean;
        var += d * d;
      }
      var /= static_cast<T>(gelems);
      const T istd = T(1) / std::sqrt(var + eps);
      inv_std[g] = istd;
      T* xh = xhat.data.data() + static_cast<std::size_t>(g) * gelems;
      for (std::size_t i = 0; i < gelems; ++i) xh[i] = (xg[i] - mean) * istd;
      for (int c = g * gs; c < (g + 1) * gs; ++c) {
        const T* xhc = xhat.data.data() + static_cast<std::size_t>(c) * plane;
        T* yc = y.data.data() + static_cast<std::size_t>(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) yc[i] = gamma[c] * xhc[i] + beta[c];
      }
    }
    if (ctx) {
      ctx->xhat = std::move(xhat);
      ctx->inv_std = std::move(inv_std);
    }
    return y;
  }

  Tensor<T> backward(const T* params, const Ctx& ctx, const Tensor<T>& dy, T* grads,
                     const ParamStore<T>& store) const {
    const int H = dy.shape[1], W = dy.shape[2];
    const int gs = channels / groups;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const std::size_t gelems = plane * gs;
    const T* gamma = params + store.entry(g_entry).offset;
    T* ggamma = grads + store.entry(g_entry).offset;
    T* gbeta = grads + store.entry(b_entry).offset;

    Tensor<T> dx({channels, H, W});
    for (int g = 0; g < groups; ++g) {
      const T istd = ctx.inv_std[g];
      // dxhat = dy * gamma; also accumulate affine grads
      T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
      for (int c = g * gs; c < (g + 1) * gs; ++c) {
        const T* dyc = dy.data.data() + static_cast<std::size_t>(c) * plane;
        const T* xhc = ctx.xhat.data.data() + static_cast<std::size_t>(c) * plane;
        T sg = T(0), sb = T(0);
        for (std::size_t i = 0; i < plane; ++i) {
          sg += dyc[i] * xhc[i];
          sb += dyc[i];
        }
        ggamma[c] += sg;
        gbeta[c] += sb;
        sum_dxhat += gamma[c] * sb;
        sum_dxhat_xhat += gamma[c] * sg;
      }
      const T m = static_cast<T>(gelems);
      const T mean_dxhat = sum_dxhat / m;
      const T mean_dxhat_xhat = sum_dxhat_xhat / m;
      for (int c = g * gs; c < (g + 1) * gs; ++c) {
        const T* dyc = dy.data.data() + static_cast<std::size_t>(c) * plane;
        const T* xhc = ctx.xhat.data.data() + static_cast<std::size_t>(c) * plane;
        T* dxc = dx.data.data() + static_cast<std::size_t>(c) * plane;
        const T gc = gamma[c];
        for (std::size_t i = 0; i < plane; ++i)
          dxc[i] = istd * (gc * dyc[i] - mean_dxhat - xhc[i] * mean_dxhat_xhat);
      }
    }
    return dx;
  }
};

// ---- ReLU ----

template <typename T>
struct Relu {
  struct Ctx {
    std::vector<bool> active;
  };

  Tensor<T> forward(const Tensor<T>& x, Ctx* ctx) const {
    Tensor<T> y = x;
    if (ctx) ctx->active.assign(x.size(), false);
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y.data[i] > T(0)) {
        if (ctx) ctx->active[i] = true;
      } else {
        y.data[i] = T(0);
      }
    }
    return y;
  }

  Tensor<T> backward(const Ctx& ctx, const Tensor<T>& dy) const {
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (!ctx.active[i]) dx.data[i] = T(0);
    return dx;
  }
};

// ---- 2x2 max pooling, stride 2, floor on odd dims ----

template <typename T>
struct MaxPool2x2 {
  struct Ctx {
    std::vector<std::size_t> argmax;  // flat source index per output cell
    std::vector<int> in_shape;
  };

  Tensor<T> forward(const Tensor<T>& x, Ctx* ctx) const {
    const int C = x.shape[0], H = x.shape[1], W = x.shape[2];
    const int H2 = H / 2, W2 = W / 2;
    check_shape(H2 >= 1 && W2 >= 1, "pool input too small");
    Tensor<T> y({C, H2, W2});
    if (ctx) {
      ctx->argmax.resize(y.size());
      ctx->in_shape = x.shape;
    }
    for (int c = 0; c < C; ++c) {
      for (int h = 0; h < H2; ++h) {
        for (int w = 0; w < W2; ++w) {
          std::size_t best_idx = (static_cast<std::size_t>(c) * H + 2 * h) * W + 2 * w;
          T best = x.data[best_idx];
          for (int dy_ = 0; dy_ < 2; ++dy_) {
            for (int dx_ = 0; dx_ < 2; ++dx_) {
              const std::size_t idx =
                  (static_cast<std::size_t>(c) * H + 2 * h + dy_) * W + 2 * w + dx_;
              if (x.data[idx] > best) {
                best = x.data[idx];
                best_idx = idx;
              }
            }
          }
          y.at(c, h, w) = best;
          if (ctx) ctx->argmax[(static_cast<std::size_t>(c) * H2 + h) * W2 + w] = best_idx;
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Ctx& ctx, const Tensor<T>& dy) const {
    Tensor<T> dx(ctx.in_shape);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.data[ctx.argmax[i]] += dy.data[i];
    return dx;
  }
};

// ---- conv block: conv -> group norm -> ReLU -> 2x2 max pool ----

template <typename T>
struct ConvBlock {
  Conv2d<T> conv;
  GroupNorm<T> norm;
  Relu<T> relu;
  MaxPool2x2<T> pool;
  bool with_norm = true;

  void init(ParamStore<T>& store, const std::string& name, int cin, int cout, int k,
            int groups, bool with_norm_ = true) {
    with_norm = with_norm_;
    conv.init(store, name + ".conv", cin, cout, k);
    if (with_norm) norm.init(store, name + ".norm", cout, groups);
  }

  void default_init(ParamStore<T>& store) {
    if (with_norm) norm.default_init(store);
  }

  struct Ctx {
    typename Conv2d<T>::Ctx conv;
    typename GroupNorm<T>::Ctx norm;
    typename Relu<T>::Ctx relu;
    typename MaxPool2x2<T>::Ctx pool;
  };

  Tensor<T> forward(const T* params, const Tensor<T>& x, Ctx* ctx,
                    const ParamStore<T>& store) const {
    Tensor<T> h = conv.forward(params, x, ctx ? &ctx->conv : nullptr, store);
    if (with_norm) h = norm.forward(params, h, ctx ? &ctx->norm : nullptr, store);
    h = relu.forward(h, ctx ? &ctx->relu : nullptr);
    return pool.forward(h, ctx ? &ctx->pool : nullptr);
  }

  Tensor<T> backward(const T* params, const Ctx& ctx, const Tensor<T>& dy, T* grads,
                     const ParamStore<T>& store) const {
    Tensor<T> g = pool.backward(ctx.pool, dy);
    g = relu.backward(ctx.relu, g);
    if (with_norm) g = norm.backward(params, ctx.norm, g, grads, store);
    return conv.backward(params, params, ctx.conv, g, grads, store);
  }
};

// ---- adaptive average pooling along the frequency axis ----
// input C x Hf x Wt, output Wt x C (time-major feature sequence)

template <typename T>
struct AdaptiveAvgPoolFreq {
  struct Ctx {
    std::vector<int> in_shape;
  };

  Tensor<T> forward(const Tensor<T>& x, Ctx* ctx) const {
    check_shape(x.shape.size() == 3 && x.shape[1] >= 1, "empty frequency axis");
    const int C = x.shape[0], H = x.shape[1], W = x.shape[2];
    Tensor<T> y({W, C});
    for (int c = 0; c < C; ++c) {
      for (int w = 0; w < W; ++w) {
        T acc = T(0);
        for (int h = 0; h < H; ++h) acc += x.at(c, h, w);
        y.at(w, c) = acc / static_cast<T>(H);
      }
    }
    if (ctx) ctx->in_shape = x.shape;
    return y;
  }

  Tensor<T> backward(const Ctx& ctx, const Tensor<T>& dy) const {
    const int C = ctx.in_shape[0], H = ctx.in_shape[1], W = ctx.in_shape[2];
    Tensor<T> dx(ctx.in_shape);
    const T scale = T(1) / static_cast<T>(H);
    for (int c = 0; c < C; ++c)
      for (int w = 0; w < W; ++w) {
        const T g = dy.at(w, c) * scale;
        for (int h = 0; h < H; ++h) dx.at(c, h, w) += g;
      }
    return dx;
  }
};

// ---- GRU ----
// r = sig(Wr z + Ur h + br), u = sig(Wu z + Uu h + bu),
// c = tanh(Wc z + Uc (r.h) + bc), h' = (1-u).h + u.c
// (reset gate applied inside the candidate)

template <typename T>
struct Gru {
  int in_dim = 0, hidden = 0;
  std::size_t w_entry = 0, u_entry = 0, b_entry = 0;  // packed rows [r; u; c]

  void init(ParamStore<T>& store, const std::string& name, int in_dim_, int hidden_) {
    in_dim = in_dim_;
    hidden = hidden_;
    w_entry = store.add(name + ".w", {3 * hidden, in_dim});
    u_entry = store.add(name + ".u", {3 * hidden, hidden});
    b_entry = store.add(name + ".b", {3 * hidden});
  }

  struct StepCtx {
    std::vector<T> h_prev, r, u, c;
  };

  static T sig(T x) { return T(1) / (T(1) + std::exp(-x)); }

  // one step; h_prev and h_out are hidden-sized, z is in_dim-sized
  void step(const T* params, const ParamStore<T>& store, const T* z, const T* h_prev,
            T* h_out, StepCtx* ctx) const {
    const T* W = params + store.entry(w_entry).offset;
    const T* U = params + store.entry(u_entry).offset;
    const T* b = params + store.entry(b_entry).offset;
    const int H = hidden;

    std::vector<T> gates(static_cast<std::size_t>(3) * H);
    ConstMatMap<T> wm(W, 3 * H, in_dim);
    ConstMatMap<T> um(U, 3 * H, H);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gm(gates.data(), 3 * H);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> zm(z, in_dim);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> hm(h_prev, H);

    gm.noalias() = wm * zm;
    gm.segment(0, 2 * H).noalias() += um.topRows(2 * H) * hm;
    for (int i = 0; i < 3 * H; ++i) gates[i] += b[i];

    std::vector<T> r(static_cast<std::size_t>(H)), u(static_cast<std::size_t>(H)),
        c(static_cast<std::size_t>(H)), rh(static_cast<std::size_t>(H));
    for (int i = 0; i < H; ++i) {
      r[i] = sig(gates[i]);
      u[i] = sig(gates[H + i]);
      rh[i] = r[i] * h_prev[i];
    }
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> cm(gates.data() + 2 * H, H);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> rhm(rh.data(), H);
    cm.noalias() += um.bottomRows(H) * rhm;
    for (int i = 0; i < H; ++i) {
      c[i] = std::tanh(gates[2 * H + i]);
      h_out[i] = (T(1) - u[i]) * h_prev[i] + u[i] * c[i];
      require(std::isfinite(static_cast<double>(h_out[i])), ErrorCode::NumericFault,
              "non-finite GRU state");
    }
    if (ctx) {
      ctx->h_prev.assign(h_prev, h_prev + H);
      ctx->r = std::move(r);
      ctx->u = std::move(u);
      ctx->c = std::move(c);
    }
  }

  struct SeqCtx {
    std::vector<StepCtx> steps;
    Tensor<T> z;  // input sequence, T' x in_dim
  };

  // returns the final hidden state after running the whole sequence
  std::vector<T> forward(const T* params, const ParamStore<T>& store, const Tensor<T>& z,
                         SeqCtx* ctx) const {
    check_shape(z.shape.size() == 2 && z.shape[1] == in_dim, "GRU input dim mismatch");
    const int steps = z.shape[0];
    std::vector<T> h(static_cast<std::size_t>(hidden), T(0));
    std::vector<T> h_next(static_cast<std::size_t>(hidden));
    if (ctx) ctx->steps.resize(static_cast<std::size_t>(steps));
    for (int t = 0; t < steps; ++t) {
      step(params, store, z.data.data() + static_cast<std::size_t>(t) * in_dim, h.data(),
           h_next.data(), ctx ? &ctx->steps[t] : nullptr);
      std::swap(h, h_next);
    }
    if (ctx) ctx->z = z;
    return h;
  }

  // dh_final: gradient w.r.t. the final hidden state. Returns dz.
  Tensor<T> backward(const T* params, const ParamStore<T>& store, const SeqCtx& ctx,
                     const std::vector<T>& dh_final, T* grads) const {
    const int H = hidden;
    const int steps = static_cast<int>(ctx.steps.size());
    const T* W = params + store.entry(w_entry).offset;
    const T* U = params + store.entry(u_entry).offset;
    T* gW = grads + store.entry(w_entry).offset;
    T* gU = grads + store.entry(u_entry).offset;
    T* gb = grads + store.entry(b_entry).offset;

    ConstMatMap<T> wm(W, 3 * H, in_dim);
    ConstMatMap<T> um(U, 3 * H, H);
    MatMap<T> gWm(gW, 3 * H, in_dim);
    MatMap<T> gUm(gU, 3 * H, H);

    Tensor<T> dz({steps, in_dim});
    std::vector<T> dh = dh_final;
    std::vector<T> da(static_cast<std::size_t>(3) * H);
    std::vector<T> rh(static_cast<std::size_t>(H));
    std::vector<T> dh_prev(static_cast<std::size_t>(H));
    for (int t = steps - 1; t >= 0; --t) {
      const StepCtx& s = ctx.steps[t];
      for (int i = 0; i < H; ++i) {
        const T du = dh[i] * (s.c[i] - s.h_prev[i]);
        const T dc = dh[i] * s.u[i];
        da[H + i] = du * s.u[i] * (T(1) - s.u[i]);
        da[2 * H + i] = dc * (T(1) - s.c[i] * s.c[i]);
        dh_prev[i] = dh[i] * (T(1) - s.u[i]);
        rh[i] = s.r[i] * s.h_prev[i];
      }
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dam(da.data(), 3 * H);
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dhp(dh_prev.data(), H);
      // through the candidate's U_h (r.h) product
      std::vector<T> drh(static_cast<std::size_t>(H));
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> drhm(drh.data(), H);
      drhm.noalias() = um.bottomRows(H).transpose() * dam.segment(2 * H, H);
      for (int i = 0; i < H; ++i) {
        const T dr = drh[i] * s.h_prev[i];
        da[i] = dr * s.r[i] * (T(1) - s.r[i]);
        dh_prev[i] += drh[i] * s.r[i];
      }
      dhp.noalias() += um.topRows(2 * H).transpose() * dam.segment(0, 2 * H);

      const T* z_t = ctx.z.data.data() + static_cast<std::size_t>(t) * in_dim;
      Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> zm(z_t, in_dim);
      Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> hpm(s.h_prev.data(), H);
      Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> rhm(rh.data(), H);
      gWm.noalias() += dam * zm.transpose();
      gUm.topRows(2 * H).noalias() += dam.segment(0, 2 * H) * hpm.transpose();
      gUm.bottomRows(H).noalias() += dam.segment(2 * H, H) * rhm.transpose();
      for (int i = 0; i < 3 * H; ++i) gb[i] += da[i];

      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dzm(
          dz.data.data() + static_cast<std::size_t>(t) * in_dim, in_dim);
      dzm.noalias() = wm.transpose() * dam;
      dh = dh_prev;
    }
    return dz;
  }
};

// ---- linear head ----

template <typename T>
struct Linear {
  int in_dim = 0, out_dim = 0;
  std::size_t w_entry = 0, b_entry = 0;

  void init(ParamStore<T>& store, const std::string& name, int in_dim_, int out_dim_) {
    in_dim = in_dim_;
    out_dim = out_dim_;
    w_entry = store.add(name + ".weight", {out_dim, in_dim});
    b_entry = store.add(name + ".bias", {out_dim});
  }

  struct Ctx {
    std::vector<T> x;
  };

  std::vector<T> forward(const T* params, const ParamStore<T>& store, const std::vector<T>& x,
                         Ctx* ctx) const {
    check_shape(static_cast<int>(x.size()) == in_dim, "linear input size mismatch");
    const T* W = params + store.entry(w_entry).offset;
    const T* b = params + store.entry(b_entry).offset;
    std::vector<T> y(static_cast<std::size_t>(out_dim));
    ConstMatMap<T> wm(W, out_dim, in_dim);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> xm(x.data(), in_dim);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> ym(y.data(), out_dim);
    ym.noalias() = wm * xm;
    for (int i = 0; i < out_dim; ++i) y[i] += b[i];
    if (ctx) ctx->x = x;
    return y;
  }

  std::vector<T> backward(const T* params, const ParamStore<T>& store, const Ctx& ctx,
                          const std::vector<T>& dy, T* grads) const {
    const T* W = params + store.entry(w_entry).offset;
    T* gW = grads + store.entry(w_entry).offset;
    T* gb = grads + store.entry(b_entry).offset;
    MatMap<T> gWm(gW, out_dim, in_dim);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> dym(dy.data(), out_dim);
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> xm(ctx.x.data(), in_dim);
    gWm.noalias() += dym * xm.transpose();
    for (int i = 0; i < out_dim; ++i) gb[i] += dy[i];

    std::vector<T> dx(static_cast<std::size_t>(in_dim));
    ConstMatMap<T> wm(W, out_dim, in_dim);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dxm(dx.data(), in_dim);
    dxm.noalias() = wm.transpose() * dym;
    return dx;
  }
};

// ---- softmax and cross-entropy ----

// max-subtracted softmax; probabilities sum to one
template <typename T>
std::vector<T> softmax(const std::vector<T>& logits) {
  check_shape(!logits.empty(), "empty logits");
  T mx = logits[0];
  for (T v : logits) mx = std::max(mx, v);
  std::vector<T> p(logits.size());
  T sum = T(0);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (T& v : p) v /= sum;
  return p;
}

template <typename T>
struct CrossEntropyResult {
  T loss;
  std::vector<T> dlogits;  // p - y
  bool clamped = false;    // true when the true-class probability hit the floor
};

// loss = -log p[label]; gradient w.r.t. the logits is p - onehot(label)
template <typename T>
CrossEntropyResult<T> cross_entropy_with_logits(const std::vector<T>& logits, int label) {
  check_shape(label >= 0 && label < static_cast<int>(logits.size()), "label out of range");
  CrossEntropyResult<T> res;
  res.dlogits = softmax(logits);
  T p = res.dlogits[static_cast<std::size_t>(label)];
  if (p < T(1e-30)) {
    p = T(1e-30);
    res.clamped = true;
  }
  res.loss = -std::log(p);
  res.dlogits[static_cast<std::size_t>(label)] -= T(1);
  return res;
}

}  // namespace anclab::nn

#endif  // ANCLAB_NEURAL_LAYERS_HPP
