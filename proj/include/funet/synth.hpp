#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "funet/image.hpp"

namespace funet {

// Per-pixel ridge direction in [0,pi) with a binary foreground mask.
struct OrientationField {
  int h = 0, w = 0;
  std::vector<float> theta;
  std::vector<std::uint8_t> mask;

  float theta_at(int y, int x) const { return theta[size_t(y) * w + x]; }
  bool in_mask(int y, int x) const { return mask[size_t(y) * w + x] != 0; }
};

struct MinutiaPoint {
  int row = 0, col = 0;
  enum class Kind { ending, bifurcation } kind = Kind::ending;
};

struct SampleMeta {
  std::uint64_t seed = 0;
  double severity = 0;
  int h = 0, w = 0;
  double ridge_period = 8;
  std::vector<std::string> degradations;
};

struct SamplePair {
  Image degraded, clean, minutia_map;
  OrientationField orientation;
  SampleMeta meta;
};

// Base effect magnitudes; every stage scales with severity, so severity 0
// leaves the image untouched.
struct DegradeConfig {
  double severity = 0.5;
  double gaussian_noise_sigma = 0.15;
  double blur_radius = 2.0;
  double contrast_gamma = 1.8;  // max gamma swing factor
  int scratch_count = 4;
  int blob_count = 3;
  std::uint64_t seed = 0;
};

struct AugmentParams {
  double rotation = 0;  // radians, |a| <= 15 degrees
  double dx = 0, dy = 0;  // pixels, |d| <= 10% of dims
  bool hflip = false, vflip = false;
  double shear = 0;  // |s| <= 0.1
};

// Centered ellipse covering the bulk of the frame; shared by the generator
// and the dataset loader (the mask is a pure function of the dims).
std::vector<std::uint8_t> elliptical_mask(int h, int w);

OrientationField gen_orientation_field(std::uint64_t seed, int h, int w);

// Iterative oriented Gabor-style filtering of seeded noise, orientation
// locked to the field. Ridges are dark on a white background.
Image render_ridge_pattern(const OrientationField& field, double ridge_period, std::uint64_t seed);

// Zhang-Suen thinning of a binary raster (1 = ridge). Exposed for direct
// testing on hand-built rasters.
std::vector<std::uint8_t> zhang_suen_thin(const std::vector<std::uint8_t>& binary, int h, int w);

// Crossing number over an 8-neighbourhood cycle of a skeleton pixel.
int crossing_number(const std::vector<std::uint8_t>& skel, int h, int w, int y, int x);

struct MinutiaResult {
  std::vector<MinutiaPoint> points;
  Image map;  // disks of radius 3 at each accepted point
};

// Classifies skeleton pixels by crossing number (1 = ending, 3 =
// bifurcation), discards points within 8 px of the mask boundary and
// de-duplicates at min distance 8 px (first in scan order wins).
MinutiaResult minutiae_from_skeleton(const std::vector<std::uint8_t>& skel, int h, int w,
                                     const std::vector<std::uint8_t>& mask);

// binarize -> thin -> crossing number on a clean render.
MinutiaResult extract_minutiae(const Image& clean, const std::vector<std::uint8_t>& mask);

Image degrade(const Image& clean, const DegradeConfig& cfg);

SamplePair augment_pair(const SamplePair& s, const AugmentParams& params);

SamplePair generate_sample(std::uint64_t seed, int h, int w, double severity);

// Writes n samples under out_dir (sample_00000/...) plus manifest.json;
// returns the manifest path. Per-sample seeds are seed + index.
std::string make_dataset(int n, std::uint64_t seed, const std::string& out_dir, int h, int w,
                         double severity_lo, double severity_hi);

struct Dataset {
  std::vector<SamplePair> samples;
};

Dataset load_dataset(const std::string& dir);

void write_orientation_bin(const std::string& path, const OrientationField& field);
OrientationField read_orientation_bin(const std::string& path);

}  // namespace funet
