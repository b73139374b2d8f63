#pragma once

#include <cstddef>
#include <vector>

#include "midframe/errors.hpp"

namespace midframe {

enum class BorderPolicy { Replicate, Reflect, Zero };

// Planar float raster: channel c occupies data[c*w*h .. (c+1)*w*h), row-major.
// Intensities from 8/16-bit sources live in [0,1]; intermediate results may
// exceed that range but must stay finite.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f);

  std::size_t pixels() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  float* plane(int c) { return data.data() + static_cast<std::size_t>(c) * pixels(); }
  const float* plane(int c) const {
    return data.data() + static_cast<std::size_t>(c) * pixels();
  }
  float& at(int x, int y, int c = 0) {
    return data[static_cast<std::size_t>(c) * pixels() +
                static_cast<std::size_t>(y) * width + x];
  }
  float at(int x, int y, int c = 0) const {
    return data[static_cast<std::size_t>(c) * pixels() +
                static_cast<std::size_t>(y) * width + x];
  }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

struct Pyramid {
  std::vector<Image> levels;  // level 0 = full resolution
  float scale = 0.5f;
};

// Resolve a 1-D index against [0, n) under a border policy. Returns -1 for
// Zero when outside.
int border_index(int i, int n, BorderPolicy policy);

// Fetch with border handling; Zero outside yields 0.
float fetch(const Image& img, int x, int y, int c, BorderPolicy policy);

// Rec. 601 luma for 3-channel input, pass-through for 1-channel.
Image to_grayscale(const Image& img);

// Bilinear sample of all channels at (x, y); out must hold img.channels
// floats. Out-of-range neighbors resolve per policy.
void sample_bilinear(const Image& img, float x, float y, BorderPolicy policy,
                     float* out);
// Single-channel convenience.
float sample_bilinear1(const Image& img, float x, float y, BorderPolicy policy);

// Correlation with separable kernel taps indexed left-to-right / top-to-bottom
// around the center: out(x,y) = sum_j ky[j] sum_i kx[i] in(x+i-rx, y+j-ry).
// Kernel lengths must be odd.
Image convolve_separable(const Image& img, const std::vector<float>& kx,
                         const std::vector<float>& ky, BorderPolicy policy);

// Normalized Gaussian taps, radius ceil(3*sigma).
std::vector<float> gaussian_kernel(float sigma);

Image gaussian_blur(const Image& img, float sigma);

// Bilinear resample to (new_w, new_h) with pixel-center mapping and
// replicate borders.
Image resize_bilinear(const Image& img, int new_w, int new_h);

// Blur-then-resample pyramid. Levels whose width or height would drop below
// 8 are not built; the level count is truncated instead.
Pyramid build_pyramid(const Image& img, int levels, float scale);

}  // namespace midframe
