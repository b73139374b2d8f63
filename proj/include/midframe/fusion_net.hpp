#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "midframe/flow.hpp"
#include "midframe/image.hpp"
#include "midframe/nn.hpp"
#include "midframe/warp.hpp"

namespace midframe {

struct FusionConfig {
  enum class Mode { Blend, Learned };
  Mode mode = Mode::Blend;
  int base_channels = 16;
  int resblocks_per_stage = 4;

  void validate() const {
    if (base_channels < 4) throw DataError("base_channels must be >= 4");
    if (resblocks_per_stage < 1) throw DataError("resblocks_per_stage must be >= 1");
  }
};

namespace detail {

template <typename T>
struct ConvLayerT {
  ParamT<T>* w = nullptr;
  ParamT<T>* b = nullptr;
  int stride = 1, pad = 1;
};

template <typename T>
struct ConvActT {
  ConvLayerT<T> conv;
  ParamT<T>* slope = nullptr;
  struct Trace {
    Tensor4T<T> x, pre;
  };
  Tensor4T<T> forward(const Tensor4T<T>& x, Trace* tr) const;
  Tensor4T<T> backward(const Trace& tr, const Tensor4T<T>& gy) const;
};

template <typename T>
struct ResBlockT {
  ConvLayerT<T> conv1, conv2;
  ParamT<T>* slope = nullptr;
  struct Trace {
    Tensor4T<T> x, h1, h2;
  };
  Tensor4T<T> forward(const Tensor4T<T>& x, Trace* tr) const;
  Tensor4T<T> backward(const Trace& tr, const Tensor4T<T>& gy) const;
};

// stride-2 downsampling conv followed by the stage's residual blocks
template <typename T>
struct StageT {
  ConvActT<T> down;
  std::vector<ResBlockT<T>> blocks;
  struct Trace {
    typename ConvActT<T>::Trace down;
    std::vector<typename ResBlockT<T>::Trace> rb;
  };
  Tensor4T<T> forward(const Tensor4T<T>& x, Trace* tr) const;
  Tensor4T<T> backward(const Trace& tr, const Tensor4T<T>& gy) const;
};

// Per-scale flow planes used to warp context features (fixed, no gradient).
struct ScaledFlow {
  int w = 0, h = 0;
  std::vector<float> u, v;
};

}  // namespace detail

constexpr int kFusionStages = 4;

// Context extraction + U-Net fusion head operating on 3-channel frames.
// Both warped frames, both intermediate flows and the per-scale warped
// context features feed an encoder/decoder that emits a blend mask and a
// bounded residual.
template <typename T>
class FusionModelT {
 public:
  FusionModelT(const FusionConfig& cfg, std::uint64_t seed);

  const FusionConfig& config() const { return cfg_; }
  ParamStoreT<T>& weights() { return store_; }
  const ParamStoreT<T>& weights() const { return store_; }

  // Multi-scale context features of one frame, each scale backward-warped
  // by the correspondingly rescaled flow.
  std::vector<Tensor4T<T>> context_extract(const Image& frame,
                                           const DenseFlow& flow_t) const;

  // Learned fusion of a warp pair given both frames' context features.
  Image fuse_learned(const WarpPair& pair, const std::vector<Tensor4T<T>>& ctx0,
                     const std::vector<Tensor4T<T>>& ctx1) const;

  // Convenience inference: context extraction on both frames + fusion.
  Image infer(const Image& frame0, const Image& frame1, const WarpPair& pair) const;

  // Training-mode forward keeping every intermediate needed by backward().
  struct Trace;
  Image forward_train(const Image& frame0, const Image& frame1, const WarpPair& pair,
                      Trace& trace) const;
  // Accumulates parameter gradients from dLoss/dOutput (planar image layout).
  void backward(const Trace& trace, const Image& grad_output);

  void zero_parameters();  // wiring tests

  void save_checkpoint(const std::string& path, const std::string& config_echo) const;
  static FusionModelT load_checkpoint(const std::string& path);
  static std::string checkpoint_config_echo(const std::string& path);

 private:
  struct ContextTrace {
    std::vector<typename detail::StageT<T>::Trace> stages;
    std::vector<Tensor4T<T>> unwarped;            // stage outputs before warping
    std::vector<detail::ScaledFlow> flows;        // per-scale warp fields
    std::vector<Tensor4T<T>> warped;              // context features
  };
  struct FusionStage {
    detail::ConvActT<T> down;
    detail::ConvActT<T> inject;  // 1x1 merge of encoder + context features
    std::vector<detail::ResBlockT<T>> blocks;
  };
  struct FusionStageTrace {
    typename detail::ConvActT<T>::Trace down;
    Tensor4T<T> down_out;
    typename detail::ConvActT<T>::Trace inject;
    std::vector<typename detail::ResBlockT<T>::Trace> rb;
    Tensor4T<T> out;
  };
  struct DecoderTrace {
    Tensor4T<T> up_in;  // shape reference for upsample backward
    Tensor4T<T> merged;
    typename detail::ConvActT<T>::Trace conv;
  };

  std::vector<Tensor4T<T>> run_context(const Image& frame, const DenseFlow& flow_t,
                                       ContextTrace* tr) const;
  Tensor4T<T> run_fusion(const WarpPair& pair, const std::vector<Tensor4T<T>>& ctx0,
                         const std::vector<Tensor4T<T>>& ctx1, Trace* tr) const;

  FusionConfig cfg_;
  ParamStoreT<T> store_;
  std::array<int, kFusionStages> channels_{};

  // context network (shared between both frames)
  std::array<detail::StageT<T>, kFusionStages> ctx_stages_;
  // fusion network
  std::array<FusionStage, kFusionStages> enc_;
  std::array<detail::ConvActT<T>, kFusionStages - 1> dec_;
  detail::ConvActT<T> final_;
  detail::ConvLayerT<T> head_;

 public:
  struct Trace {
    ContextTrace ctx0, ctx1;
    Tensor4T<T> input;                       // 10-channel concatenation
    std::array<FusionStageTrace, kFusionStages> enc;
    std::array<DecoderTrace, kFusionStages - 1> dec;
    DecoderTrace final;                      // up to full res + ConvAct
    Tensor4T<T> head_in, head_out;
    Tensor4T<T> mask, tanh_r, out_pre;
    Tensor4T<T> w0, w1;                      // warped frames as tensors
  };
};

using FusionModel = FusionModelT<float>;

// Shape and pipeline helpers shared with training.
template <typename T>
Tensor4T<T> image_to_tensor(const Image& img);
template <typename T>
Image tensor_to_image(const Tensor4T<T>& t);
Image promote_to_rgb(const Image& img);

}  // namespace midframe
