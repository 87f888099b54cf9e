// Shared helpers for the heavier gradient checks: mirror a 32-bit model into
// a 64-bit twin so finite differences can be taken in double precision and
// compared against the float analytic gradients.
#pragma once

#include <cmath>
#include <vector>

#include "funet/losses.hpp"
#include "funet/model.hpp"

namespace testsupport {

inline funet::FingerUNetT<double> mirror_to_double(funet::FingerUNet& m) {
  funet::FingerUNetT<double> d(m.config());
  const auto& pf = m.named_params();
  const auto& pd = d.named_params();
  for (size_t i = 0; i < pf.size(); ++i)
    for (size_t j = 0; j < pf[i].second->data.size(); ++j)
      pd[i].second->data[j] = double(pf[i].second->data[j]);
  auto bf = m.named_buffers();
  auto bd = d.named_buffers();
  for (size_t i = 0; i < bf.size(); ++i)
    for (size_t j = 0; j < bf[i].second->size(); ++j)
      (*bd[i].second)[j] = double((*bf[i].second)[j]);
  return d;
}

// Fixed targets for the three-head composite loss on an (1,1,h,w) input.
template <class T>
struct CompositeTargets {
  funet::TensorPtr<T> clean, minutia, orientation, mask;
};

template <class T>
CompositeTargets<T> make_targets(int h, int w) {
  using funet::Shape;
  CompositeTargets<T> t;
  t.clean = funet::uniform<T>(Shape::nchw(1, 1, h, w), 901, T(0.2), T(0.8));
  t.minutia = funet::zeros<T>(Shape::nchw(1, 1, h, w));
  t.orientation = funet::uniform<T>(Shape::nchw(1, 2, h, w), 902, T(-0.9), T(0.9));
  t.mask = funet::full<T>(Shape::nchw(1, 1, h, w), T(1));
  return t;
}

template <class T>
funet::TensorPtr<T> composite_loss(funet::FingerUNetT<T>& model, const funet::TensorPtr<T>& x,
                                   const CompositeTargets<T>& t) {
  const auto out = model.forward(x, funet::Mode::eval);
  const funet::LossWeightsT<T> w;
  return funet::total_loss(funet::l1_loss(out.enhanced, t.clean),
                           funet::minutia_loss_bce(out.minutia_map, t.minutia),
                           funet::orientation_loss_mse(out.orientation, t.orientation, t.mask), w);
}

// Relative L2 disagreement between the float analytic input-gradient of the
// composite loss and a double-precision central finite difference.
inline double model_grad_rel_error(funet::FingerUNet& model, int h, int w) {
  using funet::Shape;
  auto x = funet::uniform<funet::Scalar>(Shape::nchw(1, 1, h, w), 903, 0.1f, 0.9f);
  const auto tf = make_targets<funet::Scalar>(h, w);

  std::vector<double> analytic(x->data.size());
  {
    funet::Tape tape;
    x->requires_grad = true;
    x->zero_grad();
    tape.backward(composite_loss(model, x, tf));
    for (size_t i = 0; i < x->data.size(); ++i) analytic[i] = double(x->grad[i]);
    x->requires_grad = false;
  }

  auto dmodel = mirror_to_double(model);
  const auto td = make_targets<double>(h, w);
  auto xd = funet::make_tensor<double>(x->shape);
  for (size_t i = 0; i < x->data.size(); ++i) xd->data[i] = double(x->data[i]);

  const double eps = 1e-6;
  double num = 0, den = 0;
  for (size_t i = 0; i < xd->data.size(); ++i) {
    const double saved = xd->data[i];
    xd->data[i] = saved + eps;
    const double fp = composite_loss(dmodel, xd, td)->item();
    xd->data[i] = saved - eps;
    const double fm = composite_loss(dmodel, xd, td)->item();
    xd->data[i] = saved;
    const double fd = (fp - fm) / (2 * eps);
    num += (analytic[i] - fd) * (analytic[i] - fd);
    den += fd * fd;
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

}  // namespace testsupport
