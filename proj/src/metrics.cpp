#include "midframe/metrics.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "midframe/parallel.hpp"

namespace midframe {

double psnr(const Image& i, const Image& j) {
  if (!i.same_shape(j)) throw DataError("psnr: dimensions differ");
  const std::size_t n = i.data.size();
  const double mse =
      parallel_row_sum(i.height * i.channels, [&](int band) {
        const std::size_t off = static_cast<std::size_t>(band) * i.width;
        double s = 0.0;
        for (int x = 0; x < i.width; ++x) {
          const double d = (double(i.data[off + x]) - double(j.data[off + x])) * 255.0;
          s += d * d;
        }
        return s;
      }) /
      static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double interpolation_error(const Image& i, const Image& j) {
  if (!i.same_shape(j)) throw DataError("interpolation_error: dimensions differ");
  const std::size_t n = i.data.size();
  const double sum = parallel_row_sum(i.height * i.channels, [&](int band) {
    const std::size_t off = static_cast<std::size_t>(band) * i.width;
    double s = 0.0;
    for (int x = 0; x < i.width; ++x)
      s += std::abs(double(i.data[off + x]) - double(j.data[off + x])) * 255.0;
    return s;
  });
  return sum / static_cast<double>(n);
}

namespace {

constexpr int kSsimWin = 11;
constexpr double kSsimSigma = 1.5;

std::vector<double> ssim_window() {
  std::vector<double> w(kSsimWin);
  const int r = kSsimWin / 2;
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-0.5 * i * i / (kSsimSigma * kSsimSigma));
    w[static_cast<std::size_t>(i + r)] = v;
    sum += v;
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable weighted window sums over the valid region (no padding).
// src is on the 0-255 scale, doubles throughout.
std::vector<double> window_filter(const std::vector<double>& src, int w, int h,
                                  const std::vector<double>& taps) {
  const int r = static_cast<int>(taps.size()) / 2;
  const int vw = w - 2 * r, vh = h - 2 * r;
  std::vector<double> tmp(static_cast<std::size_t>(vw) * h);
  parallel_rows(h, [&](int y) {
    for (int x = 0; x < vw; ++x) {
      double acc = 0.0;
      for (int i = 0; i < static_cast<int>(taps.size()); ++i)
        acc += taps[static_cast<std::size_t>(i)] * src[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * vw + x] = acc;
    }
  });
  std::vector<double> out(static_cast<std::size_t>(vw) * vh);
  parallel_rows(vh, [&](int y) {
    for (int x = 0; x < vw; ++x) {
      double acc = 0.0;
      for (int j = 0; j < static_cast<int>(taps.size()); ++j)
        acc += taps[static_cast<std::size_t>(j)] * tmp[static_cast<std::size_t>(y + j) * vw + x];
      out[static_cast<std::size_t>(y) * vw + x] = acc;
    }
  });
  return out;
}

}  // namespace

double ssim(const Image& i_in, const Image& j_in) {
  if (!i_in.same_shape(j_in)) throw DataError("ssim: dimensions differ");
  if (i_in.width < kSsimWin || i_in.height < kSsimWin)
    throw DataError("ssim: image smaller than the 11x11 window");
  const Image gi = to_grayscale(i_in);
  const Image gj = to_grayscale(j_in);
  const int w = gi.width, h = gi.height;
  const std::size_t n = gi.pixels();

  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = double(gi.data[k]) * 255.0;
    y[k] = double(gj.data[k]) * 255.0;
    xx[k] = x[k] * x[k];
    yy[k] = y[k] * y[k];
    xy[k] = x[k] * y[k];
  }

  const std::vector<double> taps = ssim_window();
  const std::vector<double> mu_x = window_filter(x, w, h, taps);
  const std::vector<double> mu_y = window_filter(y, w, h, taps);
  const std::vector<double> s_xx = window_filter(xx, w, h, taps);
  const std::vector<double> s_yy = window_filter(yy, w, h, taps);
  const std::vector<double> s_xy = window_filter(xy, w, h, taps);

  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  double total = 0.0;
  for (std::size_t k = 0; k < mu_x.size(); ++k) {
    const double mx = mu_x[k], my = mu_y[k];
    const double var_x = s_xx[k] - mx * mx;
    const double var_y = s_yy[k] - my * my;
    const double cov = s_xy[k] - mx * my;
    const double num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
    const double den = (mx * mx + my * my + c1) * (var_x + var_y + c2);
    total += num / den;
  }
  return total / static_cast<double>(mu_x.size());
}

}  // namespace midframe
