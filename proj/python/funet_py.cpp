// pybind11 bindings: numpy in/out wrappers around the core operations.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "funet/metrics.hpp"
#include "funet/model.hpp"
#include "funet/synth.hpp"
#include "funet/train.hpp"
#include "funet/wavelet.hpp"

namespace py = pybind11;
using namespace funet;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

TensorPtr<Scalar> to_tensor(const Array& arr) {
  if (arr.ndim() != 4) throw Error("expected a 4-d (n, c, h, w) array");
  auto t = make_tensor<Scalar>(Shape::nchw(int(arr.shape(0)), int(arr.shape(1)),
                                           int(arr.shape(2)), int(arr.shape(3))));
  std::copy(arr.data(), arr.data() + t->data.size(), t->data.begin());
  return t;
}

Array to_array(const TensorPtr<Scalar>& t) {
  Array arr({t->shape[0], t->shape[1], t->shape[2], t->shape[3]});
  std::copy(t->data.begin(), t->data.end(), arr.mutable_data());
  return arr;
}

Image to_image(const Array& arr) {
  if (arr.ndim() != 2) throw Error("expected a 2-d (h, w) array");
  Image img(int(arr.shape(0)), int(arr.shape(1)));
  std::copy(arr.data(), arr.data() + img.pix.size(), img.pix.begin());
  return img;
}

Array image_to_array(const Image& img) {
  Array arr({img.h, img.w});
  std::copy(img.pix.begin(), img.pix.end(), arr.mutable_data());
  return arr;
}

ModelConfig config_from_kwargs(int depth, int base_channels, bool use_wa, bool use_ds,
                               bool head_minutia, bool head_orientation, int input_h,
                               int input_w, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.depth = depth;
  cfg.base_channels = base_channels;
  cfg.use_wa = use_wa;
  cfg.use_ds = use_ds;
  cfg.head_minutia = head_minutia;
  cfg.head_orientation = head_orientation;
  cfg.input_h = input_h;
  cfg.input_w = input_w;
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_funet, m) {
  m.doc() = "fingerprint enhancement toolkit";

  py::register_exception<Error>(m, "FunetError");

  m.def("dwt2d",
        [](const Array& x) {
          const auto s = dwt2d(to_tensor(x));
          return py::make_tuple(to_array(s.ll), to_array(s.lh), to_array(s.hl),
                                to_array(s.hh));
        },
        py::arg("x"), "Single-level orthonormal Haar analysis; returns (ll, lh, hl, hh).");

  m.def("idwt2d",
        [](const Array& ll, const Array& lh, const Array& hl, const Array& hh) {
          return to_array(idwt2d(Subbands{to_tensor(ll), to_tensor(lh), to_tensor(hl),
                                          to_tensor(hh)}));
        },
        py::arg("ll"), py::arg("lh"), py::arg("hl"), py::arg("hh"),
        "Inverse of dwt2d.");

  m.def("wavelet_attention",
        [](const Array& x) { return to_array(wavelet_attention(to_tensor(x))); },
        py::arg("x"),
        "Wavelet-attention downsampling: halves the spatial dims, keeps channels.");

  m.def("max_pool2d", [](const Array& x) { return to_array(max_pool2d(to_tensor(x))); },
        py::arg("x"));

  m.def("metrics",
        [](const Array& pred, const Array& target) {
          const MetricsReport r = image_metrics(to_image(pred), to_image(target));
          py::dict d;
          d["ssim"] = r.ssim;
          d["ssim_uniform"] = r.ssim_uniform;
          d["psnr"] = r.psnr;
          d["rmse"] = r.rmse;
          return d;
        },
        py::arg("pred"), py::arg("target"),
        "SSIM / PSNR / RMSE between two [0,1] grayscale images.");

  m.def("generate_sample",
        [](std::uint64_t seed, int h, int w, double severity) {
          const SamplePair s = generate_sample(seed, h, w, severity);
          py::dict d;
          d["degraded"] = image_to_array(s.degraded);
          d["clean"] = image_to_array(s.clean);
          d["minutia_map"] = image_to_array(s.minutia_map);
          py::array_t<float> theta({s.orientation.h, s.orientation.w});
          py::array_t<std::uint8_t> mask({s.orientation.h, s.orientation.w});
          std::copy(s.orientation.theta.begin(), s.orientation.theta.end(),
                    theta.mutable_data());
          std::copy(s.orientation.mask.begin(), s.orientation.mask.end(),
                    mask.mutable_data());
          d["orientation"] = theta;
          d["mask"] = mask;
          return d;
        },
        py::arg("seed"), py::arg("h") = 64, py::arg("w") = 64, py::arg("severity") = 0.5,
        "Deterministic synthetic fingerprint pair with ground truth.");

  m.def("make_dataset", &make_dataset, py::arg("n"), py::arg("seed"), py::arg("out_dir"),
        py::arg("h") = 64, py::arg("w") = 64, py::arg("severity_lo") = 0.2,
        py::arg("severity_hi") = 0.8, "Write a dataset to disk; returns the manifest path.");

  py::class_<FingerUNet>(m, "Model")
      .def(py::init([](int depth, int base_channels, bool use_wa, bool use_ds,
                       bool head_minutia, bool head_orientation, int input_h, int input_w,
                       std::uint64_t seed) {
             return FingerUNet(config_from_kwargs(depth, base_channels, use_wa, use_ds,
                                                  head_minutia, head_orientation, input_h,
                                                  input_w, seed));
           }),
           py::arg("depth") = 4, py::arg("base_channels") = 16, py::arg("use_wa") = true,
           py::arg("use_ds") = true, py::arg("head_minutia") = true,
           py::arg("head_orientation") = true, py::arg("input_h") = 64,
           py::arg("input_w") = 64, py::arg("seed") = 0)
      .def_static("load",
                  [](const std::string& path) {
                    const Checkpoint ckpt = checkpoint_load(path);
                    auto model = std::make_unique<FingerUNet>(ckpt.model_cfg);
                    apply_checkpoint(*model, ckpt);
                    return model;
                  },
                  py::arg("path"), "Build a model from a checkpoint file.")
      .def_property_readonly("param_count", &FingerUNet::param_count)
      .def_property_readonly("config_json", [](FingerUNet& m_) { return m_.config().to_json(); })
      .def("forward",
           [](FingerUNet& model, const Array& x) {
             NoGrad ng;
             const auto out = model.forward(to_tensor(x), Mode::eval);
             py::dict d;
             d["enhanced"] = to_array(out.enhanced);
             if (out.minutia_map) d["minutia_map"] = to_array(out.minutia_map);
             if (out.orientation) d["orientation"] = to_array(out.orientation);
             return d;
           },
           py::arg("x"), "Eval-mode forward pass on an (n, 1, h, w) batch.")
      .def("enhance",
           [](FingerUNet& model, const Array& img) {
             return image_to_array(enhance_image(model, to_image(img)));
           },
           py::arg("image"), "Enhance a single [0,1] grayscale (h, w) image.");
}
