#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "midframe/errors.hpp"
#include "midframe/rng.hpp"

namespace midframe {

// NCHW tensor, row-major.
template <typename T>
struct Tensor4T {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor4T() = default;
  Tensor4T(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_) {
    if (n_ < 1 || c_ < 1 || h_ < 1 || w_ < 1)
      throw DataError("tensor dims must be >= 1");
    data.assign(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill);
  }

  std::size_t size() const { return data.size(); }
  std::size_t index(int b, int ch, int y, int x) const {
    return ((static_cast<std::size_t>(b) * c + ch) * h + y) * w + x;
  }
  T& at(int b, int ch, int y, int x) { return data[index(b, ch, y, x)]; }
  T at(int b, int ch, int y, int x) const { return data[index(b, ch, y, x)]; }
  bool same_shape(const Tensor4T& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
};

using Tensor4 = Tensor4T<float>;

// Parameter with gradient and AdamW moment buffers of matching shape.
template <typename T>
struct ParamT {
  std::string name;
  Tensor4T<T> value, grad, m, v;
};

// Named parameter set: the mutable state of the fusion stage. Owns AdamW
// moments and the shared step counter.
template <typename T>
struct ParamStoreT {
  std::vector<std::unique_ptr<ParamT<T>>> params;
  std::int64_t step = 0;

  ParamT<T>* add(const std::string& name, int n, int c, int h, int w) {
    auto p = std::make_unique<ParamT<T>>();
    p->name = name;
    p->value = Tensor4T<T>(n, c, h, w);
    p->grad = Tensor4T<T>(n, c, h, w);
    p->m = Tensor4T<T>(n, c, h, w);
    p->v = Tensor4T<T>(n, c, h, w);
    params.push_back(std::move(p));
    return params.back().get();
  }
  ParamT<T>* find(const std::string& name) {
    for (auto& p : params)
      if (p->name == name) return p.get();
    return nullptr;
  }
  void zero_grad() {
    for (auto& p : params) std::fill(p->grad.data.begin(), p->grad.data.end(), T(0));
  }
  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (const auto& p : params) total += p->value.size();
    return total;
  }
};

using FusionWeights = ParamStoreT<float>;

// ---- layer kernels (cross-correlation semantics) ----

template <typename T>
void conv2d_shape(const Tensor4T<T>& x, const Tensor4T<T>& weight, int stride, int pad,
                  int& oh, int& ow);

template <typename T>
Tensor4T<T> conv2d_forward(const Tensor4T<T>& x, const Tensor4T<T>& weight,
                           const Tensor4T<T>& bias, int stride, int pad);

// Accumulates into grad_weight / grad_bias; returns grad wrt input.
template <typename T>
Tensor4T<T> conv2d_backward(const Tensor4T<T>& x, const Tensor4T<T>& weight,
                            const Tensor4T<T>& grad_out, int stride, int pad,
                            Tensor4T<T>& grad_weight, Tensor4T<T>& grad_bias);

// PReLU with one slope per channel.
template <typename T>
Tensor4T<T> prelu_forward(const Tensor4T<T>& x, const Tensor4T<T>& slope);
template <typename T>
Tensor4T<T> prelu_backward(const Tensor4T<T>& x, const Tensor4T<T>& slope,
                           const Tensor4T<T>& grad_out, Tensor4T<T>& grad_slope);

template <typename T>
Tensor4T<T> sigmoid_forward(const Tensor4T<T>& x);
// grad from the forward output y
template <typename T>
Tensor4T<T> sigmoid_backward(const Tensor4T<T>& y, const Tensor4T<T>& grad_out);

template <typename T>
Tensor4T<T> tanh_forward(const Tensor4T<T>& x);
template <typename T>
Tensor4T<T> tanh_backward(const Tensor4T<T>& y, const Tensor4T<T>& grad_out);

// Nearest-neighbor 2x upsampling.
template <typename T>
Tensor4T<T> upsample2_forward(const Tensor4T<T>& x);
template <typename T>
Tensor4T<T> upsample2_backward(const Tensor4T<T>& x_shape, const Tensor4T<T>& grad_out);

// Channel concatenation of two tensors and its split backward.
template <typename T>
Tensor4T<T> concat_channels(const Tensor4T<T>& a, const Tensor4T<T>& b);
template <typename T>
void split_channels(const Tensor4T<T>& g, int c_a, Tensor4T<T>& ga, Tensor4T<T>& gb);

// Crop the top-left (h, w) window; backward zero-pads.
template <typename T>
Tensor4T<T> crop_to(const Tensor4T<T>& x, int h, int w);
template <typename T>
Tensor4T<T> crop_backward(const Tensor4T<T>& grad_out, int h, int w);

// Decoupled weight decay Adam on every parameter in the store. Gradients are
// left untouched; the caller zeroes them.
template <typename T>
void adamw_step(ParamStoreT<T>& store, T lr, T beta1 = T(0.9), T beta2 = T(0.999),
                T eps = T(1e-8), T weight_decay = T(0));

// Kaiming-uniform init, deterministic under the given generator.
template <typename T>
void init_conv_weight(Tensor4T<T>& weight, Rng& rng, T gain = T(1));

}  // namespace midframe
