#include "midframe/image.hpp"

#include <algorithm>
#include <cmath>

#include "midframe/parallel.hpp"

namespace midframe {

Image::Image(int w, int h, int c, float fill) : width(w), height(h), channels(c) {
  if (w < 1 || h < 1) throw DataError("image dimensions must be >= 1");
  if (c != 1 && c != 3) throw DataError("channel count must be 1 or 3");
  data.assign(static_cast<std::size_t>(w) * h * c, fill);
}

int border_index(int i, int n, BorderPolicy policy) {
  if (i >= 0 && i < n) return i;
  switch (policy) {
    case BorderPolicy::Replicate:
      return i < 0 ? 0 : n - 1;
    case BorderPolicy::Reflect: {
      // mirror including the edge sample: -1 -> 0, -2 -> 1, n -> n-1
      const int period = 2 * n;
      int m = i % period;
      if (m < 0) m += period;
      return m < n ? m : period - 1 - m;
    }
    case BorderPolicy::Zero:
      return -1;
  }
  return -1;
}

float fetch(const Image& img, int x, int y, int c, BorderPolicy policy) {
  const int xi = border_index(x, img.width, policy);
  const int yi = border_index(y, img.height, policy);
  if (xi < 0 || yi < 0) return 0.0f;
  return img.at(xi, yi, c);
}

Image to_grayscale(const Image& img) {
  if (img.channels == 1) return img;
  Image out(img.width, img.height, 1);
  const float* r = img.plane(0);
  const float* g = img.plane(1);
  const float* b = img.plane(2);
  float* dst = out.plane(0);
  parallel_rows(img.height, [&](int y) {
    const std::size_t row = static_cast<std::size_t>(y) * img.width;
    for (int x = 0; x < img.width; ++x) {
      const std::size_t i = row + x;
      dst[i] = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
    }
  });
  return out;
}

void sample_bilinear(const Image& img, float x, float y, BorderPolicy policy,
                     float* out) {
  if (!std::isfinite(x) || !std::isfinite(y))
    throw DataError("non-finite sample coordinates");
  const float fx = std::floor(x);
  const float fy = std::floor(y);
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const float ax = x - fx;
  const float ay = y - fy;
  const float w00 = (1.0f - ax) * (1.0f - ay);
  const float w10 = ax * (1.0f - ay);
  const float w01 = (1.0f - ax) * ay;
  const float w11 = ax * ay;
  for (int c = 0; c < img.channels; ++c) {
    out[c] = w00 * fetch(img, x0, y0, c, policy) +
             w10 * fetch(img, x0 + 1, y0, c, policy) +
             w01 * fetch(img, x0, y0 + 1, c, policy) +
             w11 * fetch(img, x0 + 1, y0 + 1, c, policy);
  }
}

float sample_bilinear1(const Image& img, float x, float y, BorderPolicy policy) {
  float v = 0.0f;
  if (img.channels != 1) throw DataError("sample_bilinear1 expects 1 channel");
  sample_bilinear(img, x, y, policy, &v);
  return v;
}

Image convolve_separable(const Image& img, const std::vector<float>& kx,
                         const std::vector<float>& ky, BorderPolicy policy) {
  if (kx.size() % 2 == 0 || ky.size() % 2 == 0)
    throw DataError("kernel lengths must be odd");
  const int rx = static_cast<int>(kx.size()) / 2;
  const int ry = static_cast<int>(ky.size()) / 2;
  const int w = img.width, h = img.height;

  Image tmp(w, h, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    const float* src = img.plane(c);
    float* dst = tmp.plane(c);
    parallel_rows(h, [&](int y) {
      const float* srow = src + static_cast<std::size_t>(y) * w;
      float* drow = dst + static_cast<std::size_t>(y) * w;
      for (int x = 0; x < w; ++x) {
        float acc = 0.0f;
        if (x >= rx && x + rx < w) {
          for (int i = -rx; i <= rx; ++i) acc += kx[i + rx] * srow[x + i];
        } else {
          for (int i = -rx; i <= rx; ++i) {
            const int xi = border_index(x + i, w, policy);
            acc += kx[i + rx] * (xi < 0 ? 0.0f : srow[xi]);
          }
        }
        drow[x] = acc;
      }
    });
  }

  Image out(w, h, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    const float* src = tmp.plane(c);
    float* dst = out.plane(c);
    parallel_rows(h, [&](int y) {
      float* drow = dst + static_cast<std::size_t>(y) * w;
      if (y >= ry && y + ry < h) {
        for (int x = 0; x < w; ++x) drow[x] = 0.0f;
        for (int j = -ry; j <= ry; ++j) {
          const float kj = ky[j + ry];
          const float* srow = src + static_cast<std::size_t>(y + j) * w;
          for (int x = 0; x < w; ++x) drow[x] += kj * srow[x];
        }
      } else {
        for (int x = 0; x < w; ++x) {
          float acc = 0.0f;
          for (int j = -ry; j <= ry; ++j) {
            const int yi = border_index(y + j, h, policy);
            acc += ky[j + ry] * (yi < 0 ? 0.0f : src[static_cast<std::size_t>(yi) * w + x]);
          }
          drow[x] = acc;
        }
      }
    });
  }
  return out;
}

std::vector<float> gaussian_kernel(float sigma) {
  if (!(sigma > 0.0f)) throw DataError("sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0f * sigma));
  std::vector<float> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (double(i) * i) / (double(sigma) * sigma));
    k[static_cast<std::size_t>(i + radius)] = static_cast<float>(v);
    sum += v;
  }
  for (float& v : k) v = static_cast<float>(v / sum);
  return k;
}

Image gaussian_blur(const Image& img, float sigma) {
  const std::vector<float> k = gaussian_kernel(sigma);
  return convolve_separable(img, k, k, BorderPolicy::Replicate);
}

Image resize_bilinear(const Image& img, int new_w, int new_h) {
  if (new_w < 1 || new_h < 1) throw DataError("resize target must be >= 1");
  Image out(new_w, new_h, img.channels);
  const float sx = static_cast<float>(img.width) / new_w;
  const float sy = static_cast<float>(img.height) / new_h;
  for (int c = 0; c < img.channels; ++c) {
    float* dst = out.plane(c);
    parallel_rows(new_h, [&](int y) {
      const float srcy = (y + 0.5f) * sy - 0.5f;
      float* drow = dst + static_cast<std::size_t>(y) * new_w;
      for (int x = 0; x < new_w; ++x) {
        const float srcx = (x + 0.5f) * sx - 0.5f;
        float v;
        // per-channel sampling; replicate keeps edges clean
        const float fx = std::floor(srcx), fy = std::floor(srcy);
        const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
        const float ax = srcx - fx, ay = srcy - fy;
        const float v00 = fetch(img, x0, y0, c, BorderPolicy::Replicate);
        const float v10 = fetch(img, x0 + 1, y0, c, BorderPolicy::Replicate);
        const float v01 = fetch(img, x0, y0 + 1, c, BorderPolicy::Replicate);
        const float v11 = fetch(img, x0 + 1, y0 + 1, c, BorderPolicy::Replicate);
        v = (1 - ax) * (1 - ay) * v00 + ax * (1 - ay) * v10 +
            (1 - ax) * ay * v01 + ax * ay * v11;
        drow[x] = v;
      }
    });
  }
  return out;
}

Pyramid build_pyramid(const Image& img, int levels, float scale) {
  if (levels < 1) throw DataError("pyramid needs at least one level");
  if (!(scale > 0.0f && scale < 1.0f)) throw DataError("scale must be in (0,1)");
  Pyramid pyr;
  pyr.scale = scale;
  pyr.levels.push_back(img);
  const float blur_sigma = 0.5f * (1.0f / scale - 1.0f);
  for (int l = 1; l < levels; ++l) {
    const Image& prev = pyr.levels.back();
    const int nw = std::max(1, static_cast<int>(std::floor(prev.width * scale)));
    const int nh = std::max(1, static_cast<int>(std::floor(prev.height * scale)));
    if (nw < 8 || nh < 8) break;  // truncate instead of failing
    Image blurred = gaussian_blur(prev, blur_sigma);
    pyr.levels.push_back(resize_bilinear(blurred, nw, nh));
  }
  return pyr;
}

}  // namespace midframe
