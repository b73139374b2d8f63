#pragma once

#include <optional>
#include <utility>

#include "midframe/flow.hpp"
#include "midframe/flow_gf.hpp"
#include "midframe/flow_lk.hpp"
#include "midframe/fusion_net.hpp"
#include "midframe/image.hpp"
#include "midframe/warp.hpp"

namespace midframe {

enum class FlowMethod { GF, LK, File };

struct PipelineOptions {
  FlowMethod flow_method = FlowMethod::GF;
  GFParams gf;
  ShiTomasiParams st;
  LKParams lk;
  FusionConfig fusion;
  const FusionModel* model = nullptr;  // required when fusion.mode == Learned
  // preloaded bidirectional flows for FlowMethod::File
  const DenseFlow* flow01 = nullptr;
  const DenseFlow* flow10 = nullptr;
};

struct PipelineResult {
  Image frame;
  double flow_ms = 0.0;
  double total_ms = 0.0;
  DenseFlow f01, f10;
};

// Bidirectional flow with the configured estimator (two estimator calls,
// or the preloaded pair for FlowMethod::File).
std::pair<DenseFlow, DenseFlow> estimate_bidirectional(const Image& frame0,
                                                       const Image& frame1,
                                                       const PipelineOptions& opts);

// Warp + fuse given precomputed flows. Grayscale frames are promoted to RGB
// for the learned path and collapsed back afterwards.
Image synthesize(const Image& frame0, const Image& frame1, const DenseFlow& f01,
                 const DenseFlow& f10, Timestep t, const PipelineOptions& opts);

// Full pipeline with flow-phase and total wall time on a monotonic clock.
PipelineResult interpolate_timed(const Image& frame0, const Image& frame1, Timestep t,
                                 const PipelineOptions& opts);

Image interpolate(const Image& frame0, const Image& frame1, Timestep t,
                  const PipelineOptions& opts);

}  // namespace midframe
