#include "midframe/pipeline.hpp"

#include <chrono>

namespace midframe {

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

std::pair<DenseFlow, DenseFlow> estimate_bidirectional(const Image& frame0,
                                                       const Image& frame1,
                                                       const PipelineOptions& opts) {
  switch (opts.flow_method) {
    case FlowMethod::GF:
      return {estimate_flow_gf(frame0, frame1, opts.gf),
              estimate_flow_gf(frame1, frame0, opts.gf)};
    case FlowMethod::LK:
      return {estimate_flow_lk(frame0, frame1, opts.st, opts.lk),
              estimate_flow_lk(frame1, frame0, opts.st, opts.lk)};
    case FlowMethod::File: {
      if (!opts.flow01 || !opts.flow10)
        throw DataError("flow method 'file' needs both preloaded flows");
      if (opts.flow01->width != frame0.width || opts.flow01->height != frame0.height ||
          !opts.flow01->same_shape(*opts.flow10))
        throw DataError("flow file dimensions do not match the frames");
      return {*opts.flow01, *opts.flow10};
    }
  }
  throw DataError("unknown flow method");
}

Image synthesize(const Image& frame0, const Image& frame1, const DenseFlow& f01,
                 const DenseFlow& f10, Timestep t, const PipelineOptions& opts) {
  if (!frame0.same_shape(frame1)) throw DataError("frame dimensions differ");
  if (opts.fusion.mode == FusionConfig::Mode::Learned) {
    if (!opts.model) throw DataError("learned fusion requires weights");
    const bool gray = frame0.channels == 1;
    const Image f0 = gray ? promote_to_rgb(frame0) : frame0;
    const Image f1 = gray ? promote_to_rgb(frame1) : frame1;
    const WarpPair pair = make_warp_pair(f0, f1, f01, f10, t);
    Image out = opts.model->infer(f0, f1, pair);
    return gray ? to_grayscale(out) : out;
  }
  const WarpPair pair = make_warp_pair(frame0, frame1, f01, f10, t);
  return fuse_blend(pair, t);
}

PipelineResult interpolate_timed(const Image& frame0, const Image& frame1, Timestep t,
                                 const PipelineOptions& opts) {
  PipelineResult res;
  const double t0 = now_ms();
  auto [f01, f10] = estimate_bidirectional(frame0, frame1, opts);
  const double t1 = now_ms();
  res.frame = synthesize(frame0, frame1, f01, f10, t, opts);
  const double t2 = now_ms();
  res.flow_ms = t1 - t0;
  res.total_ms = t2 - t0;
  res.f01 = std::move(f01);
  res.f10 = std::move(f10);
  return res;
}

Image interpolate(const Image& frame0, const Image& frame1, Timestep t,
                  const PipelineOptions& opts) {
  return interpolate_timed(frame0, frame1, t, opts).frame;
}

}  // namespace midframe
