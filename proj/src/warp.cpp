#include "midframe/warp.hpp"

#include <algorithm>
#include <cmath>

#include "midframe/parallel.hpp"

namespace midframe {

void intermediate_flows(const DenseFlow& f01, const DenseFlow& f10, Timestep t,
                        DenseFlow& flow_t0, DenseFlow& flow_t1) {
  if (!f01.same_shape(f10)) throw DataError("flow dimensions differ");
  const int w = f01.width, h = f01.height;
  flow_t0 = DenseFlow(w, h);
  flow_t1 = DenseFlow(w, h);
  const float s0 = -t.t;
  const float s1 = -(1.0f - t.t);
  parallel_rows(h, [&](int y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const std::size_t i = row + x;
      flow_t0.u[i] = s0 * f01.u[i];
      flow_t0.v[i] = s0 * f01.v[i];
      flow_t1.u[i] = s1 * f10.u[i];
      flow_t1.v[i] = s1 * f10.v[i];
    }
  });
}

Image backward_warp(const Image& img, const DenseFlow& flow) {
  if (img.width != flow.width || img.height != flow.height)
    throw DataError("image/flow dimensions differ");
  const int w = img.width, h = img.height;
  Image out(w, h, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    const float* src = img.plane(c);
    float* dst = out.plane(c);
    parallel_rows(h, [&](int y) {
      const std::size_t row = static_cast<std::size_t>(y) * w;
      for (int x = 0; x < w; ++x) {
        const std::size_t i = row + x;
        const float sx = x + flow.u[i];
        const float sy = y + flow.v[i];
        const float fx = std::floor(sx), fy = std::floor(sy);
        const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
        const float ax = sx - fx, ay = sy - fy;
        const int x0c = std::clamp(x0, 0, w - 1), x1c = std::clamp(x0 + 1, 0, w - 1);
        const int y0c = std::clamp(y0, 0, h - 1), y1c = std::clamp(y0 + 1, 0, h - 1);
        const float v00 = src[static_cast<std::size_t>(y0c) * w + x0c];
        const float v10 = src[static_cast<std::size_t>(y0c) * w + x1c];
        const float v01 = src[static_cast<std::size_t>(y1c) * w + x0c];
        const float v11 = src[static_cast<std::size_t>(y1c) * w + x1c];
        dst[i] = (1 - ax) * (1 - ay) * v00 + ax * (1 - ay) * v10 +
                 (1 - ax) * ay * v01 + ax * ay * v11;
      }
    });
  }
  return out;
}

Image fuse_blend(const WarpPair& pair, Timestep t) {
  if (!pair.warped0.same_shape(pair.warped1))
    throw DataError("warped frame dimensions differ");
  const Image& a = pair.warped0;
  const Image& b = pair.warped1;
  Image out(a.width, a.height, a.channels);
  const float wa = 1.0f - t.t, wb = t.t;
  const std::size_t n = a.data.size();
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    out.data[k] = std::clamp(wa * a.data[k] + wb * b.data[k], 0.0f, 1.0f);
  }
  return out;
}

WarpPair make_warp_pair(const Image& frame0, const Image& frame1, const DenseFlow& f01,
                        const DenseFlow& f10, Timestep t) {
  if (!frame0.same_shape(frame1)) throw DataError("frame dimensions differ");
  WarpPair pair;
  intermediate_flows(f01, f10, t, pair.flow_t0, pair.flow_t1);
  pair.warped0 = backward_warp(frame0, pair.flow_t0);
  pair.warped1 = backward_warp(frame1, pair.flow_t1);
  return pair;
}

}  // namespace midframe
