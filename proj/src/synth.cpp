#include "funet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "funet/losses.hpp"
#include "funet/rng.hpp"

namespace fs = std::filesystem;

namespace funet {

namespace {

constexpr std::uint64_t kFieldStream = 0x4f524e54ULL;
constexpr std::uint64_t kRidgeStream = 0x52494447ULL;
constexpr std::uint64_t kSampleStream = 0x53414d50ULL;
constexpr std::uint64_t kDegradeStream = 0x44454752ULL;

void box_blur(std::vector<float>& img, int h, int w, int radius, int passes) {
  if (radius < 1) return;
  std::vector<float> tmp(img.size());
  const float inv = 1.f / float(2 * radius + 1);
  for (int pass = 0; pass < passes; ++pass) {
    // horizontal
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float acc = 0;
        for (int dx = -radius; dx <= radius; ++dx)
          acc += img[size_t(y) * w + std::clamp(x + dx, 0, w - 1)];
        tmp[size_t(y) * w + x] = acc * inv;
      }
    // vertical
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float acc = 0;
        for (int dy = -radius; dy <= radius; ++dy)
          acc += tmp[size_t(std::clamp(y + dy, 0, h - 1)) * w + x];
        img[size_t(y) * w + x] = acc * inv;
      }
  }
}

float bilinear(const std::vector<float>& img, int h, int w, double x, double y, float fill) {
  if (x < -0.5 || y < -0.5 || x > w - 0.5 || y > h - 0.5) return fill;
  const int x0 = int(std::floor(x)), y0 = int(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  const auto px = [&](int yy, int xx) {
    if (xx < 0 || yy < 0 || xx >= w || yy >= h) return double(fill);
    return double(img[size_t(yy) * w + xx]);
  };
  return float((1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x0 + 1)) +
               fy * ((1 - fx) * px(y0 + 1, x0) + fx * px(y0 + 1, x0 + 1)));
}

float bilinear_clamp(const std::vector<float>& img, int h, int w, double x, double y) {
  x = std::clamp(x, 0.0, double(w - 1));
  y = std::clamp(y, 0.0, double(h - 1));
  const int x0 = std::min(int(x), w - 2 >= 0 ? w - 2 : 0), y0 = std::min(int(y), h - 2 >= 0 ? h - 2 : 0);
  const double fx = x - x0, fy = y - y0;
  const auto px = [&](int yy, int xx) { return double(img[size_t(yy) * w + xx]); };
  return float((1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, std::min(x0 + 1, w - 1))) +
               fy * ((1 - fx) * px(std::min(y0 + 1, h - 1), x0) +
                     fx * px(std::min(y0 + 1, h - 1), std::min(x0 + 1, w - 1))));
}

}  // namespace

std::vector<std::uint8_t> elliptical_mask(int h, int w) {
  std::vector<std::uint8_t> mask(size_t(h) * w, 0);
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  const double rx = 0.40 * w, ry = 0.44 * h;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dx = (x - cx) / rx, dy = (y - cy) / ry;
      if (dx * dx + dy * dy <= 1.0) mask[size_t(y) * w + x] = 1;
    }
  return mask;
}

OrientationField gen_orientation_field(std::uint64_t seed, int h, int w) {
  if (h < 32 || w < 32) throw Error("gen_orientation_field: dims must be >= 32");
  OrientationField f;
  f.h = h;
  f.w = w;
  f.mask = elliptical_mask(h, w);
  f.theta.resize(size_t(h) * w);

  Rng rng(seed ^ kFieldStream);
  const double theta0 = rng.uniform(0.0, kPi);
  std::vector<float> s(size_t(h) * w), c(size_t(h) * w);
  for (auto& v : s) v = float(rng.uniform(-1.0, 1.0));
  for (auto& v : c) v = float(rng.uniform(-1.0, 1.0));
  const int radius = std::max(3, std::min(h, w) / 8);
  box_blur(s, h, w, radius, 3);
  box_blur(c, h, w, radius, 3);
  // restore amplitude after the heavy smoothing so the field actually bends
  for (auto* grid : {&s, &c}) {
    double sq = 0;
    for (float v : *grid) sq += double(v) * v;
    const double sd = std::sqrt(sq / double(grid->size()));
    const float k = sd > 1e-12 ? float(0.5 / sd) : 0.f;
    for (auto& v : *grid) v *= k;
  }
  for (std::int64_t i = 0; i < std::int64_t(h) * w; ++i) {
    // offset keeps the vector away from the origin: no winding singularities
    double t = theta0 + 0.5 * std::atan2(double(s[size_t(i)]), double(c[size_t(i)]) + 1.0);
    t = std::fmod(t, kPi);
    if (t < 0) t += kPi;
    f.theta[size_t(i)] = float(t);
  }
  return f;
}

Image render_ridge_pattern(const OrientationField& field, double ridge_period, std::uint64_t seed) {
  if (ridge_period < 6.0 || ridge_period > 14.0)
    throw Error("render_ridge_pattern: ridge_period must be in [6,14] px");
  const int h = field.h, w = field.w;
  Rng rng(seed ^ kRidgeStream);
  std::vector<float> img(size_t(h) * w);
  for (auto& v : img) v = float(rng.uniform(-1.0, 1.0));

  // oriented band-pass kernel in the (along-ridge, across-ridge) frame
  const int ext = std::max(3, int(std::lround(ridge_period * 0.6)));
  const double sa = ridge_period * 0.45, sb = ridge_period * 0.35;
  std::vector<double> kern(size_t(2 * ext + 1) * (2 * ext + 1));
  double l2 = 0;
  for (int a = -ext; a <= ext; ++a)
    for (int b = -ext; b <= ext; ++b) {
      const double g = std::exp(-(a * a / (2 * sa * sa) + b * b / (2 * sb * sb)));
      const double v = g * std::cos(2.0 * kPi * b / ridge_period);
      kern[size_t((a + ext) * (2 * ext + 1) + b + ext)] = v;
      l2 += v * v;
    }
  const double norm = 1.0 / std::sqrt(l2);
  for (auto& v : kern) v *= norm;

  std::vector<float> next(img.size());
  for (int iter = 0; iter < 5; ++iter) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double t = field.theta_at(y, x);
        const double ux = std::cos(t), uy = std::sin(t);
        const double vx = -uy, vy = ux;
        double acc = 0;
        for (int a = -ext; a <= ext; ++a)
          for (int b = -ext; b <= ext; ++b) {
            const double kv = kern[size_t((a + ext) * (2 * ext + 1) + b + ext)];
            if (kv == 0.0) continue;
            acc += kv * bilinear_clamp(img, h, w, x + a * ux + b * vx, y + a * uy + b * vy);
          }
        next[size_t(y) * w + x] = float(std::tanh(3.0 * acc));
      }
    img.swap(next);
  }

  Image clean(h, w, 1.f);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (field.in_mask(y, x)) clean.at(y, x) = 0.5f * (1.f - img[size_t(y) * w + x]);
  return clean;
}

// ---------------------------------------------------------------------------
// Thinning and minutiae
// ---------------------------------------------------------------------------

std::vector<std::uint8_t> zhang_suen_thin(const std::vector<std::uint8_t>& binary, int h, int w) {
  std::vector<std::uint8_t> img = binary;
  const auto at = [&](int y, int x) -> int {
    if (y < 0 || x < 0 || y >= h || x >= w) return 0;
    return img[size_t(y) * w + x] ? 1 : 0;
  };
  std::vector<std::pair<int, int>> to_delete;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int sub = 0; sub < 2; ++sub) {
      to_delete.clear();
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          if (!at(y, x)) continue;
          const int p2 = at(y - 1, x), p3 = at(y - 1, x + 1), p4 = at(y, x + 1);
          const int p5 = at(y + 1, x + 1), p6 = at(y + 1, x), p7 = at(y + 1, x - 1);
          const int p8 = at(y, x - 1), p9 = at(y - 1, x - 1);
          const int bsum = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
          if (bsum < 2 || bsum > 6) continue;
          const int seq[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
          int a = 0;
          for (int i = 0; i < 8; ++i)
            if (seq[i] == 0 && seq[i + 1] == 1) ++a;
          if (a != 1) continue;
          if (sub == 0) {
            if (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0) continue;
          } else {
            if (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0) continue;
          }
          to_delete.emplace_back(y, x);
        }
      for (const auto& [y, x] : to_delete) img[size_t(y) * w + x] = 0;
      if (!to_delete.empty()) changed = true;
    }
  }
  return img;
}

int crossing_number(const std::vector<std::uint8_t>& skel, int h, int w, int y, int x) {
  const auto at = [&](int yy, int xx) -> int {
    if (yy < 0 || xx < 0 || yy >= h || xx >= w) return 0;
    return skel[size_t(yy) * w + xx] ? 1 : 0;
  };
  const int cyc[9] = {at(y - 1, x),     at(y - 1, x + 1), at(y, x + 1),
                      at(y + 1, x + 1), at(y + 1, x),     at(y + 1, x - 1),
                      at(y, x - 1),     at(y - 1, x - 1), at(y - 1, x)};
  int sum = 0;
  for (int i = 0; i < 8; ++i) sum += std::abs(cyc[i] - cyc[i + 1]);
  return sum / 2;
}

MinutiaResult minutiae_from_skeleton(const std::vector<std::uint8_t>& skel, int h, int w,
                                     const std::vector<std::uint8_t>& mask) {
  // pixels at least 8 px (Chebyshev) from any non-mask pixel
  constexpr int kBorder = 8;
  constexpr int kMinDist = 8;
  const auto safe = [&](int y, int x) {
    for (int dy = -kBorder; dy <= kBorder; ++dy)
      for (int dx = -kBorder; dx <= kBorder; ++dx) {
        const int yy = y + dy, xx = x + dx;
        if (yy < 0 || xx < 0 || yy >= h || xx >= w) return false;
        if (!mask[size_t(yy) * w + xx]) return false;
      }
    return true;
  };

  MinutiaResult res;
  res.map = Image(h, w, 0.f);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!skel[size_t(y) * w + x]) continue;
      const int cn = crossing_number(skel, h, w, y, x);
      if (cn != 1 && cn != 3) continue;
      if (!safe(y, x)) continue;
      bool keep = true;
      for (const auto& p : res.points) {
        const double dy = p.row - y, dx = p.col - x;
        if (dy * dy + dx * dx < double(kMinDist) * kMinDist) {
          keep = false;
          break;
        }
      }
      if (!keep) continue;
      res.points.push_back(
          {y, x, cn == 1 ? MinutiaPoint::Kind::ending : MinutiaPoint::Kind::bifurcation});
    }
  for (const auto& p : res.points)
    for (int dy = -3; dy <= 3; ++dy)
      for (int dx = -3; dx <= 3; ++dx) {
        if (dy * dy + dx * dx > 9) continue;
        const int yy = p.row + dy, xx = p.col + dx;
        if (yy >= 0 && xx >= 0 && yy < h && xx < w) res.map.at(yy, xx) = 1.f;
      }
  return res;
}

MinutiaResult extract_minutiae(const Image& clean, const std::vector<std::uint8_t>& mask) {
  const int h = clean.h, w = clean.w;
  std::vector<std::uint8_t> binary(size_t(h) * w, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      binary[size_t(y) * w + x] = (mask[size_t(y) * w + x] && clean.at(y, x) < 0.5f) ? 1 : 0;
  const auto skel = zhang_suen_thin(binary, h, w);
  return minutiae_from_skeleton(skel, h, w, mask);
}

// ---------------------------------------------------------------------------
// Degradation
// ---------------------------------------------------------------------------

Image degrade(const Image& clean, const DegradeConfig& cfg) {
  if (cfg.severity < 0.0 || cfg.severity > 1.0)
    throw Error("degrade: severity must be in [0,1]");
  Image img = clean;
  const int h = img.h, w = img.w;
  const double sev = cfg.severity;

  // additive gaussian noise (same pattern for a given seed, scaled by severity)
  const double sigma = cfg.gaussian_noise_sigma * sev;
  if (sigma > 0) {
    Rng rng(cfg.seed ^ kDegradeStream ^ 1);
    for (auto& v : img.pix) v += float(rng.normal(0.0, sigma));
  }

  const int blur_r = int(std::lround(cfg.blur_radius * sev));
  if (blur_r > 0) box_blur(img.pix, h, w, blur_r, 1);

  if (sev > 0) {
    Rng rng(cfg.seed ^ kDegradeStream ^ 2);
    const double swing = rng.uniform(-1.0, 1.0);
    const double gamma = std::pow(cfg.contrast_gamma, sev * swing);
    for (auto& v : img.pix) {
      const double u = std::clamp(double(v), 0.0, 1.0);
      v = float(std::pow(u, gamma));
    }
  }

  const int scratches = int(std::lround(cfg.scratch_count * sev));
  if (scratches > 0) {
    Rng rng(cfg.seed ^ kDegradeStream ^ 3);
    for (int i = 0; i < scratches; ++i) {
      const double x0 = rng.uniform(0.0, w - 1.0), y0 = rng.uniform(0.0, h - 1.0);
      const double ang = rng.uniform(0.0, 2.0 * kPi);
      const double len = rng.uniform(0.3, 0.7) * std::min(h, w);
      const double ux = std::cos(ang), uy = std::sin(ang);
      for (double t = 0; t <= len; t += 0.5) {
        const int cx = int(std::lround(x0 + t * ux)), cy = int(std::lround(y0 + t * uy));
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = cx + dx, yy = cy + dy;
            if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
            const float a = (dx == 0 && dy == 0) ? 0.85f : 0.4f;
            float& v = img.at(yy, xx);
            v = v + a * (1.f - v);
          }
      }
    }
  }

  const int blobs = int(std::lround(cfg.blob_count * sev));
  if (blobs > 0) {
    Rng rng(cfg.seed ^ kDegradeStream ^ 4);
    for (int i = 0; i < blobs; ++i) {
      const double cx = rng.uniform(0.0, w - 1.0), cy = rng.uniform(0.0, h - 1.0);
      const double r = rng.uniform(3.0, 8.0);
      const int ext = int(std::ceil(2 * r));
      for (int dy = -ext; dy <= ext; ++dy)
        for (int dx = -ext; dx <= ext; ++dx) {
          const int xx = int(cx) + dx, yy = int(cy) + dy;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          const double d2 = dx * dx + dy * dy;
          const float a = float(0.6 * std::exp(-d2 / (r * r)));
          float& v = img.at(yy, xx);
          v = v + a * (1.f - v);
        }
    }
  }

  for (auto& v : img.pix) v = std::clamp(v, 0.f, 1.f);
  return img;
}

// ---------------------------------------------------------------------------
// Paired augmentation
// ---------------------------------------------------------------------------

SamplePair augment_pair(const SamplePair& s, const AugmentParams& p) {
  const int h = s.clean.h, w = s.clean.w;
  const double max_rot = 15.0 * kPi / 180.0 + 1e-12;
  if (std::fabs(p.rotation) > max_rot)
    throw Error("augment_pair: rotation out of range (max 15 degrees)");
  if (std::fabs(p.dx) > 0.1 * w + 1e-9 || std::fabs(p.dy) > 0.1 * h + 1e-9)
    throw Error("augment_pair: translation out of range (max 10% of dims)");
  if (std::fabs(p.shear) > 0.1 + 1e-12) throw Error("augment_pair: shear out of range (max 0.1)");

  // forward transform about the center: flip, then shear, then rotation,
  // then translation. Sampling uses the inverse map.
  const double fx = p.hflip ? -1.0 : 1.0, fy = p.vflip ? -1.0 : 1.0;
  const double cs = std::cos(p.rotation), sn = std::sin(p.rotation);
  // M = R * Sh * F, Sh = [1 shear; 0 1]
  const double m00 = cs * fx, m01 = (cs * p.shear - sn) * fy;
  const double m10 = sn * fx, m11 = (sn * p.shear + cs) * fy;
  const double det = m00 * m11 - m01 * m10;
  const double i00 = m11 / det, i01 = -m01 / det;
  const double i10 = -m10 / det, i11 = m00 / det;
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;

  SamplePair out = s;
  const auto src = [&](int x, int y, double& sx, double& sy) {
    const double rx = x - cx - p.dx, ry = y - cy - p.dy;
    sx = i00 * rx + i01 * ry + cx;
    sy = i10 * rx + i11 * ry + cy;
  };
  const auto inside = [&](double sx, double sy) {
    return sx >= -0.5 && sy >= -0.5 && sx <= w - 0.5 && sy <= h - 0.5;
  };

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double sx, sy;
      src(x, y, sx, sy);
      out.degraded.at(y, x) = bilinear(s.degraded.pix, h, w, sx, sy, 1.f);
      out.clean.at(y, x) = bilinear(s.clean.pix, h, w, sx, sy, 1.f);
      const int nx = int(std::lround(sx)), ny = int(std::lround(sy));
      const bool in = inside(sx, sy) && nx >= 0 && ny >= 0 && nx < w && ny < h;
      out.minutia_map.at(y, x) = in ? s.minutia_map.at(ny, nx) : 0.f;
      out.orientation.mask[size_t(y) * w + x] =
          in ? s.orientation.mask[size_t(ny) * w + nx] : std::uint8_t(0);
      double t = 0.0;
      if (in) {
        t = double(s.orientation.theta[size_t(ny) * w + nx]);
        if (p.hflip != p.vflip) t = kPi - t;
        t += p.rotation;
        t = std::fmod(t, kPi);
        if (t < 0) t += kPi;
      }
      out.orientation.theta[size_t(y) * w + x] = float(t);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Sample and dataset assembly
// ---------------------------------------------------------------------------

SamplePair generate_sample(std::uint64_t seed, int h, int w, double severity) {
  SamplePair s;
  s.orientation = gen_orientation_field(seed, h, w);
  Rng rng(seed ^ kSampleStream);
  const double period = rng.uniform(6.0, 14.0);
  s.clean = render_ridge_pattern(s.orientation, period, seed);
  s.minutia_map = extract_minutiae(s.clean, s.orientation.mask).map;
  DegradeConfig dc;
  dc.severity = severity;
  dc.seed = seed;
  s.degraded = degrade(s.clean, dc);
  s.meta.seed = seed;
  s.meta.severity = severity;
  s.meta.h = h;
  s.meta.w = w;
  s.meta.ridge_period = period;
  if (severity > 0)
    s.meta.degradations = {"gaussian_noise", "box_blur", "gamma", "scratches", "blobs"};
  return s;
}

void write_orientation_bin(const std::string& path, const OrientationField& field) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("write_orientation_bin: cannot open " + path);
  const std::uint32_t dims[2] = {std::uint32_t(field.h), std::uint32_t(field.w)};
  f.write(reinterpret_cast<const char*>(dims), 8);
  static_assert(sizeof(float) == 4);
  f.write(reinterpret_cast<const char*>(field.theta.data()),
          std::streamsize(field.theta.size() * 4));
  if (!f) throw Error("write_orientation_bin: write failed for " + path);
}

OrientationField read_orientation_bin(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("read_orientation_bin: cannot open " + path);
  std::uint32_t dims[2];
  f.read(reinterpret_cast<char*>(dims), 8);
  if (f.gcount() != 8) throw Error("read_orientation_bin: truncated header in " + path);
  OrientationField field;
  field.h = int(dims[0]);
  field.w = int(dims[1]);
  if (field.h < 1 || field.w < 1 || std::int64_t(field.h) * field.w > (std::int64_t(1) << 30))
    throw Error("read_orientation_bin: implausible dims in " + path);
  field.theta.resize(size_t(field.h) * field.w);
  f.read(reinterpret_cast<char*>(field.theta.data()), std::streamsize(field.theta.size() * 4));
  if (size_t(f.gcount()) != field.theta.size() * 4)
    throw Error("read_orientation_bin: truncated data in " + path);
  field.mask = elliptical_mask(field.h, field.w);
  return field;
}

std::string make_dataset(int n, std::uint64_t seed, const std::string& out_dir, int h, int w,
                         double severity_lo, double severity_hi) {
  if (severity_lo < 0 || severity_hi > 1 || severity_lo > severity_hi)
    throw Error("make_dataset: severity range must satisfy 0 <= lo <= hi <= 1");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("make_dataset: cannot create " + out_dir + ": " + ec.message());

  nlohmann::json manifest;
  manifest["count"] = n;
  manifest["seed"] = seed;
  manifest["dims"] = {h, w};
  auto& samples = manifest["samples"] = nlohmann::json::array();

  for (int i = 0; i < n; ++i) {
    const std::uint64_t sseed = seed + std::uint64_t(i);
    Rng rng(sseed ^ 0x53455645ULL);
    const double severity = severity_lo + (severity_hi - severity_lo) * rng.uniform();
    const SamplePair s = generate_sample(sseed, h, w, severity);

    char name[32];
    std::snprintf(name, sizeof(name), "sample_%05d", i);
    const fs::path dir = fs::path(out_dir) / name;
    fs::create_directories(dir, ec);
    if (ec) throw Error("make_dataset: cannot create " + dir.string() + ": " + ec.message());

    write_pgm((dir / "degraded.pgm").string(), s.degraded);
    write_pgm((dir / "clean.pgm").string(), s.clean);
    write_pgm((dir / "minutiae.pgm").string(), s.minutia_map);
    write_orientation_bin((dir / "orient.bin").string(), s.orientation);

    nlohmann::json meta;
    meta["seed"] = s.meta.seed;
    meta["severity"] = s.meta.severity;
    meta["dims"] = {h, w};
    meta["ridge_period"] = s.meta.ridge_period;
    meta["degradations"] = s.meta.degradations;
    std::ofstream mf(dir / "meta.json");
    if (!mf) throw Error("make_dataset: cannot write " + (dir / "meta.json").string());
    mf << meta.dump(2) << "\n";

    samples.push_back({{"dir", std::string(name)}, {"seed", sseed}, {"severity", severity}});
  }

  const fs::path mp = fs::path(out_dir) / "manifest.json";
  std::ofstream mf(mp);
  if (!mf) throw Error("make_dataset: cannot write " + mp.string());
  mf << manifest.dump(2) << "\n";
  return mp.string();
}

Dataset load_dataset(const std::string& dir) {
  const fs::path mp = fs::path(dir) / "manifest.json";
  std::ifstream mf(mp);
  if (!mf) throw Error("load_dataset: missing manifest " + mp.string());
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw Error("load_dataset: bad manifest: " + std::string(e.what()));
  }
  Dataset ds;
  for (const auto& entry : manifest["samples"]) {
    const fs::path sdir = fs::path(dir) / entry["dir"].get<std::string>();
    SamplePair s;
    s.degraded = read_pgm((sdir / "degraded.pgm").string());
    s.clean = read_pgm((sdir / "clean.pgm").string());
    s.minutia_map = read_pgm((sdir / "minutiae.pgm").string());
    for (auto& v : s.minutia_map.pix) v = v > 0.5f ? 1.f : 0.f;
    s.orientation = read_orientation_bin((sdir / "orient.bin").string());
    s.meta.seed = entry["seed"].get<std::uint64_t>();
    s.meta.severity = entry["severity"].get<double>();
    s.meta.h = s.clean.h;
    s.meta.w = s.clean.w;
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw Error("load_dataset: no samples listed in " + mp.string());
  return ds;
}

}  // namespace funet
