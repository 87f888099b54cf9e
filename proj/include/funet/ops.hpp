#pragma once

#include <algorithm>
#include <cmath>

#include "funet/parallel.hpp"
#include "funet/tensor.hpp"

namespace funet {

// ---------------------------------------------------------------------------
// Convolutions. Cross-correlation convention (no kernel flip), zero padding,
// NCHW layout throughout.
// ---------------------------------------------------------------------------

// x: (n, c_in, h, w), weight: (c_out, c_in, k, k), bias: (c_out).
template <class T>
TensorPtr<T> conv2d(const TensorPtr<T>& x, const TensorPtr<T>& weight,
                    const TensorPtr<T>& bias, int stride = 1, int pad = 0) {
  if (x->shape.rank() != 4 || weight->shape.rank() != 4)
    throw Error("conv2d: expected rank-4 input and weight");
  const int n = x->shape.n(), cin = x->shape.c(), h = x->shape.h(), w = x->shape.w();
  const int cout = weight->shape[0], k = weight->shape[2];
  if (weight->shape[1] != cin)
    throw Error("conv2d: weight expects " + std::to_string(weight->shape[1]) +
                " input channels, got " + std::to_string(cin));
  if (weight->shape[3] != k) throw Error("conv2d: kernel must be square");
  if (bias->numel() != cout) throw Error("conv2d: bias size mismatch");
  if (h + 2 * pad < k || w + 2 * pad < k)
    throw Error("conv2d: kernel larger than padded input");
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (w + 2 * pad - k) / stride + 1;

  auto out = make_tensor<T>(Shape::nchw(n, cout, oh, ow));
  const T* xd = x->data.data();
  const T* wd = weight->data.data();
  const T* bd = bias->data.data();
  T* od = out->data.data();

  parallel_for(0, std::int64_t(n) * cout, [&](std::int64_t job) {
    const int ni = int(job / cout), oc = int(job % cout);
    const T* xn = xd + std::int64_t(ni) * cin * h * w;
    T* on = od + (std::int64_t(ni) * cout + oc) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        T acc = bd[oc];
        for (int ic = 0; ic < cin; ++ic) {
          const T* xc = xn + std::int64_t(ic) * h * w;
          const T* wc = wd + ((std::int64_t(oc) * cin + ic)) * k * k;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= w) continue;
              acc += xc[iy * w + ix] * wc[ky * k + kx];
            }
          }
        }
        on[oy * ow + ox] = acc;
      }
    }
  });

  if (auto* tape = TapeT<T>::active();
      tape && (x->requires_grad || weight->requires_grad || bias->requires_grad)) {
    tape->record("conv2d", {x, weight, bias}, {out},
                 [x, weight, bias, out, n, cin, cout, h, w, k, oh, ow, stride, pad] {
      const T* god = out->grad.data();
      const T* wd = weight->data.data();
      const T* xd = x->data.data();
      if (x->requires_grad) {
        T* gx = x->grad.data();
        parallel_for(0, std::int64_t(n) * cin, [&](std::int64_t job) {
          const int ni = int(job / cin), ic = int(job % cin);
          T* gxc = gx + (std::int64_t(ni) * cin + ic) * h * w;
          for (int oc = 0; oc < cout; ++oc) {
            const T* gon = god + (std::int64_t(ni) * cout + oc) * oh * ow;
            const T* wc = wd + (std::int64_t(oc) * cin + ic) * k * k;
            for (int oy = 0; oy < oh; ++oy)
              for (int ox = 0; ox < ow; ++ox) {
                const T g = gon[oy * ow + ox];
                for (int ky = 0; ky < k; ++ky) {
                  const int iy = oy * stride - pad + ky;
                  if (iy < 0 || iy >= h) continue;
                  for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= w) continue;
                    gxc[iy * w + ix] += g * wc[ky * k + kx];
                  }
                }
              }
          }
        });
      }
      if (weight->requires_grad || bias->requires_grad) {
        T* gw = weight->requires_grad ? weight->grad.data() : nullptr;
        T* gb = bias->requires_grad ? bias->grad.data() : nullptr;
        parallel_for(0, cout, [&](std::int64_t oc) {
          for (int ni = 0; ni < n; ++ni) {
            const T* gon = god + (std::int64_t(ni) * cout + oc) * oh * ow;
            const T* xn = xd + std::int64_t(ni) * cin * h * w;
            for (int oy = 0; oy < oh; ++oy)
              for (int ox = 0; ox < ow; ++ox) {
                const T g = gon[oy * ow + ox];
                if (gb) gb[oc] += g;
                if (!gw) continue;
                for (int ic = 0; ic < cin; ++ic) {
                  const T* xc = xn + std::int64_t(ic) * h * w;
                  T* gwc = gw + (oc * cin + ic) * k * k;
                  for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < k; ++kx) {
                      const int ix = ox * stride - pad + kx;
                      if (ix < 0 || ix >= w) continue;
                      gwc[ky * k + kx] += g * xc[iy * w + ix];
                    }
                  }
                }
              }
          }
        });
      }
    });
  }
  return out;
}

// Depthwise stage: weight (c, 1, k, k), same padding, stride 1.
template <class T>
TensorPtr<T> depthwise_conv2d(const TensorPtr<T>& x, const TensorPtr<T>& weight) {
  if (x->shape.rank() != 4 || weight->shape.rank() != 4)
    throw Error("depthwise_conv2d: expected rank-4 tensors");
  const int n = x->shape.n(), c = x->shape.c(), h = x->shape.h(), w = x->shape.w();
  const int k = weight->shape[2];
  if (weight->shape[0] != c || weight->shape[1] != 1)
    throw Error("depthwise_conv2d: weight channels " + std::to_string(weight->shape[0]) +
                " do not match input channels " + std::to_string(c));
  const int pad = (k - 1) / 2;
  auto out = make_tensor<T>(x->shape);
  const T* xd = x->data.data();
  const T* wd = weight->data.data();
  T* od = out->data.data();

  parallel_for(0, std::int64_t(n) * c, [&](std::int64_t job) {
    const T* xc = xd + job * h * w;
    const T* wc = wd + (job % c) * k * k;
    T* oc = od + job * h * w;
    for (int oy = 0; oy < h; ++oy)
      for (int ox = 0; ox < w; ++ox) {
        T acc = 0;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox - pad + kx;
            if (ix < 0 || ix >= w) continue;
            acc += xc[iy * w + ix] * wc[ky * k + kx];
          }
        }
        oc[oy * w + ox] = acc;
      }
  });

  if (auto* tape = TapeT<T>::active(); tape && (x->requires_grad || weight->requires_grad)) {
    tape->record("depthwise_conv2d", {x, weight}, {out}, [x, weight, out, n, c, h, w, k, pad] {
      const T* god = out->grad.data();
      const T* wd = weight->data.data();
      const T* xd = x->data.data();
      if (x->requires_grad) {
        T* gx = x->grad.data();
        parallel_for(0, std::int64_t(n) * c, [&](std::int64_t job) {
          const T* gon = god + job * h * w;
          const T* wc = wd + (job % c) * k * k;
          T* gxc = gx + job * h * w;
          for (int oy = 0; oy < h; ++oy)
            for (int ox = 0; ox < w; ++ox) {
              const T g = gon[oy * w + ox];
              for (int ky = 0; ky < k; ++ky) {
                const int iy = oy - pad + ky;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < k; ++kx) {
                  const int ix = ox - pad + kx;
                  if (ix < 0 || ix >= w) continue;
                  gxc[iy * w + ix] += g * wc[ky * k + kx];
                }
              }
            }
        });
      }
      if (weight->requires_grad) {
        T* gw = weight->grad.data();
        parallel_for(0, c, [&](std::int64_t ci) {
          T* gwc = gw + ci * k * k;
          for (int ni = 0; ni < n; ++ni) {
            const std::int64_t base = (std::int64_t(ni) * c + ci) * h * w;
            const T* gon = god + base;
            const T* xc = xd + base;
            for (int oy = 0; oy < h; ++oy)
              for (int ox = 0; ox < w; ++ox) {
                const T g = gon[oy * w + ox];
                for (int ky = 0; ky < k; ++ky) {
                  const int iy = oy - pad + ky;
                  if (iy < 0 || iy >= h) continue;
                  for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox - pad + kx;
                    if (ix < 0 || ix >= w) continue;
                    gwc[ky * k + kx] += g * xc[iy * w + ix];
                  }
                }
              }
          }
        });
      }
    });
  }
  return out;
}

// Depthwise then pointwise; same spatial dims as the input.
template <class T>
TensorPtr<T> depthwise_separable_conv2d(const TensorPtr<T>& x, const TensorPtr<T>& dw_weight,
                                        const TensorPtr<T>& pw_weight, const TensorPtr<T>& pw_bias) {
  return conv2d(depthwise_conv2d(x, dw_weight), pw_weight, pw_bias, 1, 0);
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

enum class Act { relu, sigmoid, tanh };

template <class T>
TensorPtr<T> activation(Act kind, const TensorPtr<T>& x) {
  auto out = make_tensor<T>(x->shape);
  switch (kind) {
    case Act::relu:
      for (size_t i = 0; i < x->data.size(); ++i) out->data[i] = x->data[i] > 0 ? x->data[i] : T(0);
      break;
    case Act::sigmoid:
      for (size_t i = 0; i < x->data.size(); ++i) out->data[i] = T(1) / (T(1) + std::exp(-x->data[i]));
      break;
    case Act::tanh:
      for (size_t i = 0; i < x->data.size(); ++i) out->data[i] = std::tanh(x->data[i]);
      break;
  }
  if (auto* tape = TapeT<T>::active(); tape && x->requires_grad) {
    tape->record("activation", {x}, {out}, [x, out, kind] {
      switch (kind) {
        case Act::relu:  // derivative at exactly 0 is 0
          for (size_t i = 0; i < x->data.size(); ++i)
            accum_grad(x, i, x->data[i] > 0 ? out->grad[i] : T(0));
          break;
        case Act::sigmoid:
          for (size_t i = 0; i < x->data.size(); ++i)
            accum_grad(x, i, out->grad[i] * out->data[i] * (T(1) - out->data[i]));
          break;
        case Act::tanh:
          for (size_t i = 0; i < x->data.size(); ++i)
            accum_grad(x, i, out->grad[i] * (T(1) - out->data[i] * out->data[i]));
          break;
      }
    });
  }
  return out;
}

template <class T>
TensorPtr<T> relu(const TensorPtr<T>& x) { return activation(Act::relu, x); }
template <class T>
TensorPtr<T> sigmoid(const TensorPtr<T>& x) { return activation(Act::sigmoid, x); }
template <class T>
TensorPtr<T> tanh_act(const TensorPtr<T>& x) { return activation(Act::tanh, x); }

// Softmax over the flattened spatial positions of each (sample, channel),
// computed with max subtraction.
template <class T>
TensorPtr<T> softmax_spatial(const TensorPtr<T>& x) {
  if (x->shape.rank() != 4) throw Error("softmax_spatial: expected rank-4 input");
  const std::int64_t groups = std::int64_t(x->shape.n()) * x->shape.c();
  const std::int64_t m = std::int64_t(x->shape.h()) * x->shape.w();
  auto out = make_tensor<T>(x->shape);
  for (std::int64_t g = 0; g < groups; ++g) {
    const T* xi = x->data.data() + g * m;
    T* oi = out->data.data() + g * m;
    T mx = xi[0];
    for (std::int64_t i = 1; i < m; ++i) mx = std::max(mx, xi[i]);
    T sum = 0;
    for (std::int64_t i = 0; i < m; ++i) {
      oi[i] = std::exp(xi[i] - mx);
      sum += oi[i];
    }
    for (std::int64_t i = 0; i < m; ++i) oi[i] /= sum;
  }
  if (auto* tape = TapeT<T>::active(); tape && x->requires_grad) {
    tape->record("softmax_spatial", {x}, {out}, [x, out, groups, m] {
      for (std::int64_t g = 0; g < groups; ++g) {
        const T* y = out->data.data() + g * m;
        const T* gy = out->grad.data() + g * m;
        T dot = 0;
        for (std::int64_t i = 0; i < m; ++i) dot += gy[i] * y[i];
        for (std::int64_t i = 0; i < m; ++i)
          accum_grad(x, size_t(g * m + i), (gy[i] - dot) * y[i]);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

template <class T>
struct BatchNormStateT {
  TensorPtr<T> gamma, beta;          // trainable, shape (c)
  std::vector<T> running_mean, running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  explicit BatchNormStateT(int channels = 0) {
    gamma = full<T>(Shape{std::max(channels, 1)}, T(1), true);
    beta = zeros<T>(Shape{std::max(channels, 1)}, true);
    running_mean.assign(size_t(std::max(channels, 1)), T(0));
    running_var.assign(size_t(std::max(channels, 1)), T(1));
  }
};

enum class Mode { train, eval };

template <class T>
TensorPtr<T> batch_norm2d(const TensorPtr<T>& x, BatchNormStateT<T>& st, Mode mode) {
  if (x->shape.rank() != 4) throw Error("batch_norm2d: expected rank-4 input");
  const int n = x->shape.n(), c = x->shape.c(), h = x->shape.h(), w = x->shape.w();
  if (st.gamma->numel() != c)
    throw Error("batch_norm2d: state has " + std::to_string(st.gamma->numel()) +
                " channels, input has " + std::to_string(c));
  const std::int64_t m = std::int64_t(n) * h * w;  // elements per channel
  auto out = make_tensor<T>(x->shape);
  const auto at = [c, h, w](int ni, int ci) {
    return (std::int64_t(ni) * c + ci) * h * w;
  };

  if (mode == Mode::eval) {
    for (int ci = 0; ci < c; ++ci) {
      const T invstd = T(1) / std::sqrt(st.running_var[size_t(ci)] + st.eps);
      const T g = st.gamma->data[size_t(ci)], b = st.beta->data[size_t(ci)];
      const T mean = st.running_mean[size_t(ci)];
      for (int ni = 0; ni < n; ++ni) {
        const T* xi = x->data.data() + at(ni, ci);
        T* oi = out->data.data() + at(ni, ci);
        for (std::int64_t i = 0; i < std::int64_t(h) * w; ++i)
          oi[i] = g * (xi[i] - mean) * invstd + b;
      }
    }
    if (auto* tape = TapeT<T>::active();
        tape && (x->requires_grad || st.gamma->requires_grad || st.beta->requires_grad)) {
      auto gamma = st.gamma;
      auto beta = st.beta;
      auto rm = st.running_mean;
      auto rv = st.running_var;
      const T eps = st.eps;
      tape->record("batch_norm2d_eval", {x, gamma, beta}, {out},
                   [x, gamma, beta, out, rm, rv, eps, n, c, h, w, at] {
        for (int ci = 0; ci < c; ++ci) {
          const T invstd = T(1) / std::sqrt(rv[size_t(ci)] + eps);
          const T g = gamma->data[size_t(ci)];
          for (int ni = 0; ni < n; ++ni) {
            const std::int64_t base = at(ni, ci);
            for (std::int64_t i = 0; i < std::int64_t(h) * w; ++i) {
              const T go = out->grad[size_t(base + i)];
              accum_grad(x, size_t(base + i), go * g * invstd);
              accum_grad(gamma, size_t(ci),
                         go * (x->data[size_t(base + i)] - rm[size_t(ci)]) * invstd);
              accum_grad(beta, size_t(ci), go);
            }
          }
        }
      });
    }
    return out;
  }

  // train mode: batch statistics, biased variance
  auto xhat = std::make_shared<std::vector<T>>(x->data.size());
  auto invstd = std::make_shared<std::vector<T>>(size_t(c));
  for (int ci = 0; ci < c; ++ci) {
    T mean = 0, var = 0;
    for (int ni = 0; ni < n; ++ni) {
      const T* xi = x->data.data() + at(ni, ci);
      for (std::int64_t i = 0; i < std::int64_t(h) * w; ++i) mean += xi[i];
    }
    mean /= T(m);
    for (int ni = 0; ni < n; ++ni) {
      const T* xi = x->data.data() + at(ni, ci);
      for (std::int64_t i = 0; i < std::int64_t(h) * w; ++i) {
        const T d = xi[i] - mean;
        var += d * d;
      }
    }
    var /= T(m);
    const T is = T(1) / std::sqrt(var + st.eps);
    (*invstd)[size_t(ci)] = is;
    const T g = st.gamma->data[size_t(ci)], b = st.beta->data[size_t(ci)];
    for (int ni = 0; ni < n; ++ni) {
      const T* xi = x->data.data() + at(ni, ci);
      T* oi = out->data.data() + at(ni, ci);
      T* xh = xhat->data() + at(ni, ci);
      for (std::int64_t i = 0; i < std::int64_t(h) * w; ++i) {
        xh[i] = (xi[i] - mean) * is;
        oi[i] = g * xh[i] + b;
      }
    }
    st.running_mean[size_t(ci)] = (T(1) - st.momentum) * st.running_mean[size_t(ci)] + st.momentum * mean;
    st.running_var[size_t(ci)] = (T(1) - st.momentum) * st.running_var[size_t(ci)] + st.momentum * var;
  }

  if (auto* tape = TapeT<T>::active();
      tape && (x->requires_grad || st.gamma->requires_grad || st.beta->requires_grad)) {
    auto gamma = st.gamma;
    auto beta = st.beta;
    tape->record("batch_norm2d", {x, gamma, beta}, {out},
                 [x, gamma, beta, out, xhat, invstd, n, c, h, w, m, at] {
      for (int ci = 0; ci < c; ++ci) {
        const T g = gamma->data[size_t(ci)];
        const T is = (*invstd)[size_t(ci)];
        T sum_gxh = 0, sum_gxh_xh = 0;
        for (int ni = 0; ni < n; ++ni) {
          const std::int64_t base = at(ni, ci);
          for (std::int64_t i = 0; i < std::int64_t(h) * w; ++i) {
            const T go = out->grad[size_t(base + i)];
            sum_gxh += go;
            sum_gxh_xh += go * (*xhat)[size_t(base + i)];
          }
        }
        accum_grad(beta, size_t(ci), sum_gxh);
        accum_grad(gamma, size_t(ci), sum_gxh_xh);
        if (!x->requires_grad) continue;
        for (int ni = 0; ni < n; ++ni) {
          const std::int64_t base = at(ni, ci);
          for (std::int64_t i = 0; i < std::int64_t(h) * w; ++i) {
            const T go = out->grad[size_t(base + i)];
            const T xh = (*xhat)[size_t(base + i)];
            accum_grad(x, size_t(base + i),
                       g * is / T(m) * (T(m) * go - sum_gxh - xh * sum_gxh_xh));
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Max pooling, fixed 2x2 window / stride 2, first-index tie-break.
// ---------------------------------------------------------------------------

template <class T>
TensorPtr<T> max_pool2d(const TensorPtr<T>& x) {
  if (x->shape.rank() != 4) throw Error("max_pool2d: expected rank-4 input");
  const int n = x->shape.n(), c = x->shape.c(), h = x->shape.h(), w = x->shape.w();
  if (h % 2 != 0 || w % 2 != 0)
    throw Error("max_pool2d: spatial dims must be even, got " + x->shape.str());
  const int oh = h / 2, ow = w / 2;
  auto out = make_tensor<T>(Shape::nchw(n, c, oh, ow));
  auto argmax = std::make_shared<std::vector<std::int64_t>>(out->data.size());
  for (std::int64_t g = 0; g < std::int64_t(n) * c; ++g) {
    const T* xi = x->data.data() + g * h * w;
    T* oi = out->data.data() + g * oh * ow;
    std::int64_t* am = argmax->data() + g * oh * ow;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        std::int64_t best = std::int64_t(2 * oy) * w + 2 * ox;
        T bv = xi[best];
        const std::int64_t cand[3] = {best + 1, best + w, best + w + 1};
        for (std::int64_t ci : cand)
          if (xi[ci] > bv) { bv = xi[ci]; best = ci; }
        oi[oy * ow + ox] = bv;
        am[oy * ow + ox] = g * h * w + best;
      }
  }
  if (auto* tape = TapeT<T>::active(); tape && x->requires_grad) {
    tape->record("max_pool2d", {x}, {out}, [x, out, argmax] {
      for (size_t i = 0; i < out->data.size(); ++i)
        accum_grad(x, size_t((*argmax)[i]), out->grad[i]);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Channel concatenation (decoder skip connections)
// ---------------------------------------------------------------------------

template <class T>
TensorPtr<T> concat_channels(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  if (a->shape.rank() != 4 || b->shape.rank() != 4)
    throw Error("concat_channels: expected rank-4 tensors");
  if (a->shape.n() != b->shape.n() || a->shape.h() != b->shape.h() || a->shape.w() != b->shape.w())
    throw Error("concat_channels: incompatible shapes " + a->shape.str() + " vs " + b->shape.str());
  const int n = a->shape.n(), ca = a->shape.c(), cb = b->shape.c();
  const std::int64_t hw = std::int64_t(a->shape.h()) * a->shape.w();
  auto out = make_tensor<T>(Shape::nchw(n, ca + cb, a->shape.h(), a->shape.w()));
  for (int ni = 0; ni < n; ++ni) {
    std::copy_n(a->data.data() + std::int64_t(ni) * ca * hw, ca * hw,
                out->data.data() + std::int64_t(ni) * (ca + cb) * hw);
    std::copy_n(b->data.data() + std::int64_t(ni) * cb * hw, cb * hw,
                out->data.data() + std::int64_t(ni) * (ca + cb) * hw + ca * hw);
  }
  if (auto* tape = TapeT<T>::active(); tape && (a->requires_grad || b->requires_grad)) {
    tape->record("concat_channels", {a, b}, {out}, [a, b, out, n, ca, cb, hw] {
      for (int ni = 0; ni < n; ++ni) {
        const std::int64_t ob = std::int64_t(ni) * (ca + cb) * hw;
        for (std::int64_t i = 0; i < ca * hw; ++i)
          accum_grad(a, size_t(std::int64_t(ni) * ca * hw + i), out->grad[size_t(ob + i)]);
        for (std::int64_t i = 0; i < cb * hw; ++i)
          accum_grad(b, size_t(std::int64_t(ni) * cb * hw + i), out->grad[size_t(ob + ca * hw + i)]);
      }
    });
  }
  return out;
}

// Parameter counts of plain vs depthwise-separable conv layers.
inline std::int64_t conv_param_count(int c_in, int c_out, int k) {
  return std::int64_t(c_out) * c_in * k * k + c_out;
}
inline std::int64_t ds_conv_param_count(int c_in, int c_out, int k) {
  return std::int64_t(c_in) * k * k + std::int64_t(c_in) * c_out + c_out;
}

}  // namespace funet
