#pragma once

#include <string>
#include <vector>

#include "funet/tensor.hpp"

namespace funet {

// Single-channel raster with values in [0,1], row-major.
struct Image {
  int h = 0, w = 0;
  std::vector<float> pix;

  Image() = default;
  Image(int h_, int w_, float fill = 0.f) : h(h_), w(w_), pix(size_t(h_) * w_, fill) {}

  float& at(int y, int x) { return pix[size_t(y) * w + x]; }
  float at(int y, int x) const { return pix[size_t(y) * w + x]; }
  std::int64_t numel() const { return std::int64_t(h) * w; }
};

// Binary P5 PGM, 8-bit, maxval 255. Values quantized with round(v*255).
void write_pgm(const std::string& path, const Image& img);
Image read_pgm(const std::string& path);

}  // namespace funet
