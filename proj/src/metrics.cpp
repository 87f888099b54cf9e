#include "funet/metrics.hpp"

#include <cmath>
#include <sstream>
#include <vector>

namespace funet {

namespace {

constexpr double kC1 = (0.01 * 255) * (0.01 * 255);
constexpr double kC2 = (0.03 * 255) * (0.03 * 255);

double ssim_from_stats(double mx, double my, double vx, double vy, double cov) {
  return ((2 * mx * my + kC1) * (2 * cov + kC2)) /
         ((mx * mx + my * my + kC1) * (vx + vy + kC2));
}

// 11x11 Gaussian window, sigma 1.5, normalized.
std::vector<double> gaussian_window() {
  std::vector<double> wnd(11 * 11);
  double sum = 0;
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) {
      const double dy = y - 5, dx = x - 5;
      wnd[size_t(y * 11 + x)] = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
      sum += wnd[size_t(y * 11 + x)];
    }
  for (auto& v : wnd) v /= sum;
  return wnd;
}

double ssim_gaussian(const std::vector<double>& a, const std::vector<double>& b, int h, int w) {
  static const std::vector<double> wnd = gaussian_window();
  if (h < 11 || w < 11) return 1.0;  // degenerate, no full window fits
  double acc = 0;
  std::int64_t count = 0;
  for (int cy = 0; cy + 11 <= h; ++cy)
    for (int cx = 0; cx + 11 <= w; ++cx) {
      double mx = 0, my = 0;
      for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 11; ++x) {
          const double wt = wnd[size_t(y * 11 + x)];
          mx += wt * a[size_t((cy + y) * w + cx + x)];
          my += wt * b[size_t((cy + y) * w + cx + x)];
        }
      double vx = 0, vy = 0, cov = 0;
      for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 11; ++x) {
          const double wt = wnd[size_t(y * 11 + x)];
          const double da = a[size_t((cy + y) * w + cx + x)] - mx;
          const double db = b[size_t((cy + y) * w + cx + x)] - my;
          vx += wt * da * da;
          vy += wt * db * db;
          cov += wt * da * db;
        }
      acc += ssim_from_stats(mx, my, vx, vy, cov);
      ++count;
    }
  return acc / double(count);
}

double ssim_uniform8(const std::vector<double>& a, const std::vector<double>& b, int h, int w) {
  const int ty = h / 8, tx = w / 8;
  if (ty == 0 || tx == 0) return 1.0;
  double acc = 0;
  for (int by = 0; by < ty; ++by)
    for (int bx = 0; bx < tx; ++bx) {
      double mx = 0, my = 0;
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          mx += a[size_t((by * 8 + y) * w + bx * 8 + x)];
          my += b[size_t((by * 8 + y) * w + bx * 8 + x)];
        }
      mx /= 64;
      my /= 64;
      double vx = 0, vy = 0, cov = 0;
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          const double da = a[size_t((by * 8 + y) * w + bx * 8 + x)] - mx;
          const double db = b[size_t((by * 8 + y) * w + bx * 8 + x)] - my;
          vx += da * da;
          vy += db * db;
          cov += da * db;
        }
      vx /= 64;
      vy /= 64;
      cov /= 64;
      acc += ssim_from_stats(mx, my, vx, vy, cov);
    }
  return acc / double(ty * tx);
}

}  // namespace

MetricsReport image_metrics(const Image& pred, const Image& target) {
  if (pred.h != target.h || pred.w != target.w)
    throw Error("image_metrics: dimension mismatch " + std::to_string(pred.h) + "x" +
                std::to_string(pred.w) + " vs " + std::to_string(target.h) + "x" +
                std::to_string(target.w));
  const std::int64_t m = pred.numel();
  std::vector<double> a(static_cast<size_t>(m));
  std::vector<double> b(static_cast<size_t>(m));
  for (std::int64_t i = 0; i < m; ++i) {
    a[size_t(i)] = double(pred.pix[size_t(i)]) * 255.0;
    b[size_t(i)] = double(target.pix[size_t(i)]) * 255.0;
  }
  MetricsReport r;
  double se = 0;
  for (std::int64_t i = 0; i < m; ++i) {
    const double d = a[size_t(i)] - b[size_t(i)];
    se += d * d;
  }
  r.rmse = std::sqrt(se / double(m));
  r.psnr = r.rmse < 255.0 * 1e-5 ? 100.0 : 20.0 * std::log10(255.0 / r.rmse);
  r.ssim = ssim_gaussian(a, b, pred.h, pred.w);
  r.ssim_uniform = ssim_uniform8(a, b, pred.h, pred.w);
  return r;
}

std::string MetricsReport::to_line() const {
  std::ostringstream os;
  os << "ssim=" << ssim << " ssim_uniform=" << ssim_uniform << " psnr=" << psnr
     << " rmse=" << rmse;
  return os.str();
}

}  // namespace funet
