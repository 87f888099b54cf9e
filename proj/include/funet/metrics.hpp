#pragma once

#include <string>

#include "funet/image.hpp"

namespace funet {

// Quality metrics on the 8-bit [0,255] scale. `ssim` is the standard
// 11x11 Gaussian-weighted sliding variant; `ssim_uniform` uses 8x8
// non-overlapping unweighted windows.
struct MetricsReport {
  double ssim = 0;
  double ssim_uniform = 0;
  double psnr = 0;
  double rmse = 0;

  std::string to_line() const;
};

// pred and target are [0,1] single-channel images of equal dims.
MetricsReport image_metrics(const Image& pred, const Image& target);

}  // namespace funet
