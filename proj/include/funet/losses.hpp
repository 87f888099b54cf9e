#pragma once

#include <cmath>

#include "funet/tensor.hpp"

namespace funet {

template <class T>
struct LossWeightsT {
  T lambda_r = T(0.8);
  T lambda_m = T(0.1);
  T lambda_o = T(0.1);
};

template <class T>
struct LossBreakdownT {
  T l_r = 0, l_m = 0, l_o = 0, l_total = 0;
};

using LossWeights = LossWeightsT<Scalar>;
using LossBreakdown = LossBreakdownT<Scalar>;

// Mean absolute difference; subgradient 0 at exact ties.
template <class T>
TensorPtr<T> l1_loss(const TensorPtr<T>& pred, const TensorPtr<T>& target) {
  check_same_shape("l1_loss", pred, target);
  auto out = make_tensor<T>(Shape{1});
  T acc = 0;
  for (size_t i = 0; i < pred->data.size(); ++i) acc += std::fabs(pred->data[i] - target->data[i]);
  const T inv = T(1) / T(pred->numel());
  out->data[0] = acc * inv;
  if (auto* tape = TapeT<T>::active(); tape && (pred->requires_grad || target->requires_grad)) {
    tape->record("l1_loss", {pred, target}, {out}, [pred, target, out, inv] {
      const T g = out->grad[0] * inv;
      for (size_t i = 0; i < pred->data.size(); ++i) {
        const T d = pred->data[i] - target->data[i];
        const T s = d > 0 ? T(1) : (d < 0 ? T(-1) : T(0));
        accum_grad(pred, i, g * s);
        accum_grad(target, i, -g * s);
      }
    });
  }
  return out;
}

// Mean squared error (kept for the l1-vs-l2 reconstruction ablation).
template <class T>
TensorPtr<T> l2_loss(const TensorPtr<T>& pred, const TensorPtr<T>& target) {
  check_same_shape("l2_loss", pred, target);
  auto out = make_tensor<T>(Shape{1});
  T acc = 0;
  for (size_t i = 0; i < pred->data.size(); ++i) {
    const T d = pred->data[i] - target->data[i];
    acc += d * d;
  }
  const T inv = T(1) / T(pred->numel());
  out->data[0] = acc * inv;
  if (auto* tape = TapeT<T>::active(); tape && (pred->requires_grad || target->requires_grad)) {
    tape->record("l2_loss", {pred, target}, {out}, [pred, target, out, inv] {
      const T g = out->grad[0] * inv;
      for (size_t i = 0; i < pred->data.size(); ++i) {
        const T d = pred->data[i] - target->data[i];
        accum_grad(pred, i, g * 2 * d);
        accum_grad(target, i, -g * 2 * d);
      }
    });
  }
  return out;
}

// MSE over masked pixels and both orientation channels. mask is (n,1,h,w)
// with {0,1} entries; an all-zero mask yields loss 0.
template <class T>
TensorPtr<T> orientation_loss_mse(const TensorPtr<T>& pred, const TensorPtr<T>& target,
                                  const TensorPtr<T>& mask) {
  check_same_shape("orientation_loss_mse", pred, target);
  if (pred->shape.rank() != 4 || pred->shape.c() != 2)
    throw Error("orientation_loss_mse: expected (n,2,h,w) prediction, got " + pred->shape.str());
  if (mask->shape.rank() != 4 || mask->shape.c() != 1 || mask->shape.n() != pred->shape.n() ||
      mask->shape.h() != pred->shape.h() || mask->shape.w() != pred->shape.w())
    throw Error("orientation_loss_mse: mask shape " + mask->shape.str() +
                " incompatible with prediction " + pred->shape.str());
  const int n = pred->shape.n(), h = pred->shape.h(), w = pred->shape.w();
  const std::int64_t hw = std::int64_t(h) * w;
  auto out = make_tensor<T>(Shape{1});
  T acc = 0, count = 0;
  for (int ni = 0; ni < n; ++ni)
    for (std::int64_t i = 0; i < hw; ++i) {
      const T mk = mask->data[size_t(ni * hw + i)];
      if (mk == T(0)) continue;
      count += 2;
      for (int ch = 0; ch < 2; ++ch) {
        const size_t idx = size_t((std::int64_t(ni) * 2 + ch) * hw + i);
        const T d = pred->data[idx] - target->data[idx];
        acc += d * d;
      }
    }
  const T inv = count > 0 ? T(1) / count : T(0);
  out->data[0] = acc * inv;
  if (auto* tape = TapeT<T>::active(); tape && (pred->requires_grad || target->requires_grad)) {
    tape->record("orientation_loss_mse", {pred, target, mask}, {out},
                 [pred, target, mask, out, n, hw, inv] {
      const T g = out->grad[0] * inv;
      for (int ni = 0; ni < n; ++ni)
        for (std::int64_t i = 0; i < hw; ++i) {
          if (mask->data[size_t(ni * hw + i)] == T(0)) continue;
          for (int ch = 0; ch < 2; ++ch) {
            const size_t idx = size_t((std::int64_t(ni) * 2 + ch) * hw + i);
            const T d = pred->data[idx] - target->data[idx];
            accum_grad(pred, idx, g * 2 * d);
            accum_grad(target, idx, -g * 2 * d);
          }
        }
    });
  }
  return out;
}

// Mean binary cross entropy with predictions clamped to [1e-7, 1-1e-7].
template <class T>
TensorPtr<T> minutia_loss_bce(const TensorPtr<T>& pred, const TensorPtr<T>& target) {
  check_same_shape("minutia_loss_bce", pred, target);
  const T clamp = T(1e-7);
  auto out = make_tensor<T>(Shape{1});
  T acc = 0;
  for (size_t i = 0; i < pred->data.size(); ++i) {
    const T p = std::min(std::max(pred->data[i], clamp), T(1) - clamp);
    const T y = target->data[i];
    acc += -(y * std::log(p) + (T(1) - y) * std::log(T(1) - p));
  }
  const T inv = T(1) / T(pred->numel());
  out->data[0] = acc * inv;
  if (auto* tape = TapeT<T>::active(); tape && pred->requires_grad) {
    tape->record("minutia_loss_bce", {pred, target}, {out}, [pred, target, out, inv, clamp] {
      const T g = out->grad[0] * inv;
      for (size_t i = 0; i < pred->data.size(); ++i) {
        const T raw = pred->data[i];
        if (raw < clamp || raw > T(1) - clamp) continue;  // clamped region, zero slope
        const T y = target->data[i];
        accum_grad(pred, i, g * (-(y / raw) + (T(1) - y) / (T(1) - raw)));
      }
    });
  }
  return out;
}

// Weighted sum of the three task losses. Returns both the differentiable
// scalar and the plain-number breakdown for logging.
template <class T>
TensorPtr<T> total_loss(const TensorPtr<T>& l_r, const TensorPtr<T>& l_m, const TensorPtr<T>& l_o,
                        const LossWeightsT<T>& w, LossBreakdownT<T>* breakdown = nullptr) {
  auto total = scale(l_r, w.lambda_r);
  if (l_m) total = add(total, scale(l_m, w.lambda_m));
  if (l_o) total = add(total, scale(l_o, w.lambda_o));
  if (breakdown) {
    breakdown->l_r = l_r->item();
    breakdown->l_m = l_m ? l_m->item() : T(0);
    breakdown->l_o = l_o ? l_o->item() : T(0);
    breakdown->l_total = total->item();
  }
  return total;
}

// ---------------------------------------------------------------------------
// Doubled-angle orientation encoding. Ridge orientation is pi-periodic, so
// theta maps to (sin 2theta, cos 2theta); the zero vector decodes to 0.
// ---------------------------------------------------------------------------

inline constexpr double kPi = 3.14159265358979323846;

inline void orientation_encode(double theta, double& s, double& c) {
  s = std::sin(2.0 * theta);
  c = std::cos(2.0 * theta);
}

inline double orientation_decode(double s, double c) {
  if (s == 0.0 && c == 0.0) return 0.0;
  double theta = 0.5 * std::atan2(s, c);
  if (theta < 0.0) theta += kPi;
  if (theta >= kPi) theta -= kPi;
  return theta;
}

}  // namespace funet
