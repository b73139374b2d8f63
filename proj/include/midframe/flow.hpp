#pragma once

#include <cstddef>
#include <vector>

#include "midframe/errors.hpp"

namespace midframe {

// Per-pixel displacement field. Convention: the pixel at (x,y) in frame A
// appears at (x+u, y+v) in frame B.
struct DenseFlow {
  int width = 0;
  int height = 0;
  std::vector<float> u;
  std::vector<float> v;

  DenseFlow() = default;
  DenseFlow(int w, int h, float fill_u = 0.0f, float fill_v = 0.0f)
      : width(w), height(h) {
    if (w < 1 || h < 1) throw DataError("flow dimensions must be >= 1");
    u.assign(static_cast<std::size_t>(w) * h, fill_u);
    v.assign(static_cast<std::size_t>(w) * h, fill_v);
  }

  std::size_t size() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  float& u_at(int x, int y) { return u[static_cast<std::size_t>(y) * width + x]; }
  float u_at(int x, int y) const { return u[static_cast<std::size_t>(y) * width + x]; }
  float& v_at(int x, int y) { return v[static_cast<std::size_t>(y) * width + x]; }
  float v_at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
  bool same_shape(const DenseFlow& o) const {
    return width == o.width && height == o.height;
  }
};

}  // namespace midframe
