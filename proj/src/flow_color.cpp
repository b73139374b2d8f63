#include "midframe/flow_color.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "midframe/parallel.hpp"

namespace midframe {

namespace {

void hsv_to_rgb(float hue_deg, float s, float v, float* rgb) {
  const float h = hue_deg / 60.0f;
  const int sector = static_cast<int>(std::floor(h)) % 6;
  const float f = h - std::floor(h);
  const float p = v * (1.0f - s);
  const float q = v * (1.0f - s * f);
  const float t = v * (1.0f - s * (1.0f - f));
  switch (sector < 0 ? sector + 6 : sector) {
    case 0: rgb[0] = v; rgb[1] = t; rgb[2] = p; break;
    case 1: rgb[0] = q; rgb[1] = v; rgb[2] = p; break;
    case 2: rgb[0] = p; rgb[1] = v; rgb[2] = t; break;
    case 3: rgb[0] = p; rgb[1] = q; rgb[2] = v; break;
    case 4: rgb[0] = t; rgb[1] = p; rgb[2] = v; break;
    default: rgb[0] = v; rgb[1] = p; rgb[2] = q; break;
  }
}

}  // namespace

Image flow_to_color(const DenseFlow& flow, std::optional<float> max_magnitude) {
  const int w = flow.width, h = flow.height;
  for (std::size_t i = 0; i < flow.size(); ++i)
    if (!std::isfinite(flow.u[i]) || !std::isfinite(flow.v[i]))
      throw NumericError("flow_to_color: non-finite flow");

  float norm = 0.0f;
  if (max_magnitude.has_value()) {
    norm = *max_magnitude;
  } else {
    std::vector<float> mags(flow.size());
    for (std::size_t i = 0; i < flow.size(); ++i)
      mags[i] = std::hypot(flow.u[i], flow.v[i]);
    const std::size_t k =
        std::min(mags.size() - 1, static_cast<std::size_t>(0.99 * double(mags.size())));
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k), mags.end());
    norm = mags[k];
  }
  if (!(norm > 0.0f)) norm = 1.0f;  // all-zero field stays white

  Image out(w, h, 3);
  float* r = out.plane(0);
  float* g = out.plane(1);
  float* b = out.plane(2);
  const float inv_norm = 1.0f / norm;
  parallel_rows(h, [&](int y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const std::size_t i = row + x;
      const float u = flow.u[i], v = flow.v[i];
      const float mag = std::hypot(u, v);
      float hue = std::atan2(v, u) * (180.0f / 3.14159265358979323846f);
      if (hue < 0.0f) hue += 360.0f;
      const float sat = std::min(1.0f, mag * inv_norm);
      float rgb[3];
      hsv_to_rgb(hue, sat, 1.0f, rgb);
      r[i] = rgb[0];
      g[i] = rgb[1];
      b[i] = rgb[2];
    }
  });
  return out;
}

}  // namespace midframe
