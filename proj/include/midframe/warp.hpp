#pragma once

#include "midframe/flow.hpp"
#include "midframe/image.hpp"

namespace midframe {

struct Timestep {
  float t = 0.5f;

  Timestep() = default;
  explicit Timestep(float value) : t(value) {
    if (!(t > 0.0f && t < 1.0f)) throw DataError("timestep must lie in (0,1)");
  }
};

struct WarpPair {
  Image warped0;
  Image warped1;
  DenseFlow flow_t0;
  DenseFlow flow_t1;
};

// Linear-motion, same-location approximation of the flows from time t back
// to each input frame: flow_t0 = -t * f01, flow_t1 = -(1-t) * f10.
void intermediate_flows(const DenseFlow& f01, const DenseFlow& f10, Timestep t,
                        DenseFlow& flow_t0, DenseFlow& flow_t1);

// out(p) = bilinear(img, p + flow(p)) with replicate borders.
Image backward_warp(const Image& img, const DenseFlow& flow);

// Non-learned fusion: (1-t) * warped0 + t * warped1, clamped to [0,1].
Image fuse_blend(const WarpPair& pair, Timestep t);

// Both frames warped to time t through the intermediate flows.
WarpPair make_warp_pair(const Image& frame0, const Image& frame1,
                        const DenseFlow& f01, const DenseFlow& f10, Timestep t);

}  // namespace midframe
