#pragma once

#include "funet/ops.hpp"
#include "funet/tensor.hpp"

namespace funet {

// Orthonormal Haar analysis/synthesis on 2x2 blocks. With block entries
// a (top-left), b (top-right), c (bottom-left), d (bottom-right):
//   ll = (a+b+c+d)/2   lh = (a+b-c-d)/2   (horizontal details)
//   hl = (a-b+c-d)/2   hh = (a-b-c+d)/2   (vertical / diagonal details)
// The transform is its own inverse up to the same 1/2 scaling, so the
// backward pass of dwt2d is idwt2d applied to the subband gradients.

template <class T>
struct SubbandsT {
  TensorPtr<T> ll, lh, hl, hh;
};

using Subbands = SubbandsT<Scalar>;

namespace detail {

template <class T>
void haar_analysis(const T* x, int h, int w, T* ll, T* lh, T* hl, T* hh) {
  const int oh = h / 2, ow = w / 2;
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      const T a = x[(2 * oy) * w + 2 * ox];
      const T b = x[(2 * oy) * w + 2 * ox + 1];
      const T c = x[(2 * oy + 1) * w + 2 * ox];
      const T d = x[(2 * oy + 1) * w + 2 * ox + 1];
      ll[oy * ow + ox] = (a + b + c + d) / 2;
      lh[oy * ow + ox] = (a + b - c - d) / 2;
      hl[oy * ow + ox] = (a - b + c - d) / 2;
      hh[oy * ow + ox] = (a - b - c + d) / 2;
    }
}

template <class T>
void haar_synthesis(const T* ll, const T* lh, const T* hl, const T* hh, int oh, int ow, T* x) {
  const int w = 2 * ow;
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      const T l = ll[oy * ow + ox], m = lh[oy * ow + ox];
      const T p = hl[oy * ow + ox], q = hh[oy * ow + ox];
      x[(2 * oy) * w + 2 * ox] = (l + m + p + q) / 2;
      x[(2 * oy) * w + 2 * ox + 1] = (l + m - p - q) / 2;
      x[(2 * oy + 1) * w + 2 * ox] = (l - m + p - q) / 2;
      x[(2 * oy + 1) * w + 2 * ox + 1] = (l - m - p + q) / 2;
    }
}

}  // namespace detail

template <class T>
SubbandsT<T> dwt2d(const TensorPtr<T>& x) {
  if (x->shape.rank() != 4) throw Error("dwt2d: expected rank-4 input");
  const int n = x->shape.n(), c = x->shape.c(), h = x->shape.h(), w = x->shape.w();
  if (h % 2 != 0 || w % 2 != 0)
    throw Error("dwt2d: spatial dims must be even, got " + x->shape.str());
  const int oh = h / 2, ow = w / 2;
  const Shape ss = Shape::nchw(n, c, oh, ow);
  SubbandsT<T> s{make_tensor<T>(ss), make_tensor<T>(ss), make_tensor<T>(ss), make_tensor<T>(ss)};
  for (std::int64_t g = 0; g < std::int64_t(n) * c; ++g) {
    detail::haar_analysis(x->data.data() + g * h * w, h, w,
                          s.ll->data.data() + g * oh * ow, s.lh->data.data() + g * oh * ow,
                          s.hl->data.data() + g * oh * ow, s.hh->data.data() + g * oh * ow);
  }
  if (auto* tape = TapeT<T>::active(); tape && x->requires_grad) {
    tape->record("dwt2d", {x}, {s.ll, s.lh, s.hl, s.hh}, [x, s, n, c, h, w, oh, ow] {
      std::vector<T> gx(size_t(h) * w);
      for (std::int64_t g = 0; g < std::int64_t(n) * c; ++g) {
        detail::haar_synthesis(s.ll->grad.data() + g * oh * ow, s.lh->grad.data() + g * oh * ow,
                               s.hl->grad.data() + g * oh * ow, s.hh->grad.data() + g * oh * ow,
                               oh, ow, gx.data());
        for (std::int64_t i = 0; i < std::int64_t(h) * w; ++i)
          accum_grad(x, size_t(g * h * w + i), gx[size_t(i)]);
      }
    });
  }
  return s;
}

template <class T>
TensorPtr<T> idwt2d(const SubbandsT<T>& s) {
  for (const auto& t : {s.lh, s.hl, s.hh})
    if (t->shape != s.ll->shape)
      throw Error("idwt2d: subband shape mismatch " + s.ll->shape.str() + " vs " + t->shape.str());
  if (s.ll->shape.rank() != 4) throw Error("idwt2d: expected rank-4 subbands");
  const int n = s.ll->shape.n(), c = s.ll->shape.c(), oh = s.ll->shape.h(), ow = s.ll->shape.w();
  auto out = make_tensor<T>(Shape::nchw(n, c, 2 * oh, 2 * ow));
  for (std::int64_t g = 0; g < std::int64_t(n) * c; ++g) {
    detail::haar_synthesis(s.ll->data.data() + g * oh * ow, s.lh->data.data() + g * oh * ow,
                           s.hl->data.data() + g * oh * ow, s.hh->data.data() + g * oh * ow,
                           oh, ow, out->data.data() + g * 4 * oh * ow);
  }
  const bool wants = s.ll->requires_grad || s.lh->requires_grad || s.hl->requires_grad || s.hh->requires_grad;
  if (auto* tape = TapeT<T>::active(); tape && wants) {
    tape->record("idwt2d", {s.ll, s.lh, s.hl, s.hh}, {out}, [s, out, n, c, oh, ow] {
      const int h = 2 * oh, w = 2 * ow;
      std::vector<T> gll(size_t(oh) * ow), glh(size_t(oh) * ow), ghl(size_t(oh) * ow), ghh(size_t(oh) * ow);
      for (std::int64_t g = 0; g < std::int64_t(n) * c; ++g) {
        detail::haar_analysis(out->grad.data() + g * h * w, h, w, gll.data(), glh.data(),
                              ghl.data(), ghh.data());
        for (std::int64_t i = 0; i < std::int64_t(oh) * ow; ++i) {
          accum_grad(s.ll, size_t(g * oh * ow + i), gll[size_t(i)]);
          accum_grad(s.lh, size_t(g * oh * ow + i), glh[size_t(i)]);
          accum_grad(s.hl, size_t(g * oh * ow + i), ghl[size_t(i)]);
          accum_grad(s.hh, size_t(g * oh * ow + i), ghh[size_t(i)]);
        }
      }
    });
  }
  return out;
}

// Wavelet-attention downsampling: softmax of lh+hl over spatial positions
// per (sample, channel) reweights ll, and the result augments ll. hh is
// never read.
template <class T>
TensorPtr<T> wavelet_attention(const TensorPtr<T>& x) {
  auto s = dwt2d(x);
  auto detail_sum = add(s.lh, s.hl);
  auto x_g = softmax_spatial(detail_sum);
  auto attn = mul(s.ll, x_g);
  return add(s.ll, attn);
}

// Decoder upsampling: synthesize with ll = x and zero detail subbands,
// i.e. each 2x2 output block is the constant x/2.
template <class T>
TensorPtr<T> idwt_upsample(const TensorPtr<T>& x) {
  if (x->shape.rank() != 4) throw Error("idwt_upsample: expected rank-4 input");
  SubbandsT<T> s{x, zeros<T>(x->shape), zeros<T>(x->shape), zeros<T>(x->shape)};
  return idwt2d(s);
}

}  // namespace funet
