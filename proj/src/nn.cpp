#include "midframe/nn.hpp"

#include <algorithm>
#include <cmath>

namespace midframe {

template <typename T>
void conv2d_shape(const Tensor4T<T>& x, const Tensor4T<T>& weight, int stride, int pad,
                  int& oh, int& ow) {
  if (stride < 1) throw DataError("conv2d: stride must be >= 1");
  if (weight.c != x.c) throw DataError("conv2d: channel mismatch");
  oh = (x.h + 2 * pad - weight.h) / stride + 1;
  ow = (x.w + 2 * pad - weight.w) / stride + 1;
  if (oh < 1 || ow < 1) throw DataError("conv2d: output would be empty");
}

template <typename T>
Tensor4T<T> conv2d_forward(const Tensor4T<T>& x, const Tensor4T<T>& weight,
                           const Tensor4T<T>& bias, int stride, int pad) {
  int oh = 0, ow = 0;
  conv2d_shape(x, weight, stride, pad, oh, ow);
  if (bias.c != weight.n) throw DataError("conv2d: bias/filter mismatch");
  const int kh = weight.h, kw = weight.w;
  Tensor4T<T> out(x.n, weight.n, oh, ow);

  const long long planes = static_cast<long long>(x.n) * weight.n;
#pragma omp parallel for schedule(static)
  for (long long p = 0; p < planes; ++p) {
    const int b = static_cast<int>(p / weight.n);
    const int oc = static_cast<int>(p % weight.n);
    const T bias_v = bias.data[static_cast<std::size_t>(oc)];
    for (int y = 0; y < oh; ++y) {
      for (int x0 = 0; x0 < ow; ++x0) {
        T acc = bias_v;
        const int iy0 = y * stride - pad;
        const int ix0 = x0 * stride - pad;
        for (int ic = 0; ic < x.c; ++ic) {
          const T* in_plane = x.data.data() + x.index(b, ic, 0, 0);
          const T* w_plane = weight.data.data() + weight.index(oc, ic, 0, 0);
          const int j0 = std::max(0, -iy0), j1 = std::min(kh, x.h - iy0);
          const int i0 = std::max(0, -ix0), i1 = std::min(kw, x.w - ix0);
          for (int j = j0; j < j1; ++j) {
            const T* in_row = in_plane + static_cast<std::size_t>(iy0 + j) * x.w + ix0;
            const T* w_row = w_plane + static_cast<std::size_t>(j) * kw;
            for (int i = i0; i < i1; ++i) acc += in_row[i] * w_row[i];
          }
        }
        out.at(b, oc, y, x0) = acc;
      }
    }
  }
  return out;
}

template <typename T>
Tensor4T<T> conv2d_backward(const Tensor4T<T>& x, const Tensor4T<T>& weight,
                            const Tensor4T<T>& grad_out, int stride, int pad,
                            Tensor4T<T>& grad_weight, Tensor4T<T>& grad_bias) {
  int oh = 0, ow = 0;
  conv2d_shape(x, weight, stride, pad, oh, ow);
  if (grad_out.h != oh || grad_out.w != ow || grad_out.c != weight.n ||
      grad_out.n != x.n)
    throw DataError("conv2d backward: grad shape mismatch");
  if (!grad_weight.same_shape(weight)) throw DataError("conv2d backward: grad_weight shape");
  const int kh = weight.h, kw = weight.w;

  // weight/bias gradients: each thread owns one output channel slice, so
  // accumulation order is fixed.
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < weight.n; ++oc) {
    T gb = T(0);
    for (int b = 0; b < x.n; ++b) {
      for (int y = 0; y < oh; ++y) {
        const T* g_row = grad_out.data.data() + grad_out.index(b, oc, y, 0);
        for (int x0 = 0; x0 < ow; ++x0) {
          const T g = g_row[x0];
          gb += g;
          if (g == T(0)) continue;
          const int iy0 = y * stride - pad;
          const int ix0 = x0 * stride - pad;
          for (int ic = 0; ic < x.c; ++ic) {
            const T* in_plane = x.data.data() + x.index(b, ic, 0, 0);
            T* gw_plane = grad_weight.data.data() + grad_weight.index(oc, ic, 0, 0);
            const int j0 = std::max(0, -iy0), j1 = std::min(kh, x.h - iy0);
            const int i0 = std::max(0, -ix0), i1 = std::min(kw, x.w - ix0);
            for (int j = j0; j < j1; ++j) {
              const T* in_row = in_plane + static_cast<std::size_t>(iy0 + j) * x.w + ix0;
              T* gw_row = gw_plane + static_cast<std::size_t>(j) * kw;
              for (int i = i0; i < i1; ++i) gw_row[i] += g * in_row[i];
            }
          }
        }
      }
    }
    grad_bias.data[static_cast<std::size_t>(oc)] += gb;
  }

  // input gradient: gather over the output positions each input pixel fed
  Tensor4T<T> grad_in(x.n, x.c, x.h, x.w);
  const long long planes = static_cast<long long>(x.n) * x.c;
#pragma omp parallel for schedule(static)
  for (long long p = 0; p < planes; ++p) {
    const int b = static_cast<int>(p / x.c);
    const int ic = static_cast<int>(p % x.c);
    for (int iy = 0; iy < x.h; ++iy) {
      for (int ix = 0; ix < x.w; ++ix) {
        T acc = T(0);
        for (int oc = 0; oc < weight.n; ++oc) {
          const T* w_plane = weight.data.data() + weight.index(oc, ic, 0, 0);
          const T* g_plane = grad_out.data.data() + grad_out.index(b, oc, 0, 0);
          for (int j = 0; j < kh; ++j) {
            const int num_y = iy + pad - j;
            if (num_y < 0 || num_y % stride != 0) continue;
            const int oy = num_y / stride;
            if (oy >= oh) continue;
            for (int i = 0; i < kw; ++i) {
              const int num_x = ix + pad - i;
              if (num_x < 0 || num_x % stride != 0) continue;
              const int ox = num_x / stride;
              if (ox >= ow) continue;
              acc += w_plane[static_cast<std::size_t>(j) * kw + i] *
                     g_plane[static_cast<std::size_t>(oy) * ow + ox];
            }
          }
        }
        grad_in.at(b, ic, iy, ix) = acc;
      }
    }
  }
  return grad_in;
}

template <typename T>
Tensor4T<T> prelu_forward(const Tensor4T<T>& x, const Tensor4T<T>& slope) {
  if (slope.c != x.c) throw DataError("prelu: slope/channel mismatch");
  Tensor4T<T> out(x.n, x.c, x.h, x.w);
  const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
  const long long planes = static_cast<long long>(x.n) * x.c;
#pragma omp parallel for schedule(static)
  for (long long p = 0; p < planes; ++p) {
    const int ch = static_cast<int>(p % x.c);
    const T a = slope.data[static_cast<std::size_t>(ch)];
    const T* src = x.data.data() + static_cast<std::size_t>(p) * plane;
    T* dst = out.data.data() + static_cast<std::size_t>(p) * plane;
    for (std::size_t i = 0; i < plane; ++i)
      dst[i] = src[i] > T(0) ? src[i] : a * src[i];
  }
  return out;
}

template <typename T>
Tensor4T<T> prelu_backward(const Tensor4T<T>& x, const Tensor4T<T>& slope,
                           const Tensor4T<T>& grad_out, Tensor4T<T>& grad_slope) {
  Tensor4T<T> grad_in(x.n, x.c, x.h, x.w);
  const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < x.c; ++ch) {
    const T a = slope.data[static_cast<std::size_t>(ch)];
    T ga = T(0);
    for (int b = 0; b < x.n; ++b) {
      const T* src = x.data.data() + x.index(b, ch, 0, 0);
      const T* g = grad_out.data.data() + grad_out.index(b, ch, 0, 0);
      T* dst = grad_in.data.data() + grad_in.index(b, ch, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) {
        if (src[i] > T(0)) {
          dst[i] = g[i];
        } else {
          dst[i] = a * g[i];
          ga += g[i] * src[i];
        }
      }
    }
    grad_slope.data[static_cast<std::size_t>(ch)] += ga;
  }
  return grad_in;
}

template <typename T>
Tensor4T<T> sigmoid_forward(const Tensor4T<T>& x) {
  Tensor4T<T> out(x.n, x.c, x.h, x.w);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(x.size()); ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    out.data[k] = T(1) / (T(1) + std::exp(-x.data[k]));
  }
  return out;
}

template <typename T>
Tensor4T<T> sigmoid_backward(const Tensor4T<T>& y, const Tensor4T<T>& grad_out) {
  Tensor4T<T> grad_in(y.n, y.c, y.h, y.w);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(y.size()); ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    grad_in.data[k] = grad_out.data[k] * y.data[k] * (T(1) - y.data[k]);
  }
  return grad_in;
}

template <typename T>
Tensor4T<T> tanh_forward(const Tensor4T<T>& x) {
  Tensor4T<T> out(x.n, x.c, x.h, x.w);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(x.size()); ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    out.data[k] = std::tanh(x.data[k]);
  }
  return out;
}

template <typename T>
Tensor4T<T> tanh_backward(const Tensor4T<T>& y, const Tensor4T<T>& grad_out) {
  Tensor4T<T> grad_in(y.n, y.c, y.h, y.w);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(y.size()); ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    grad_in.data[k] = grad_out.data[k] * (T(1) - y.data[k] * y.data[k]);
  }
  return grad_in;
}

template <typename T>
Tensor4T<T> upsample2_forward(const Tensor4T<T>& x) {
  Tensor4T<T> out(x.n, x.c, x.h * 2, x.w * 2);
  const long long planes = static_cast<long long>(x.n) * x.c;
#pragma omp parallel for schedule(static)
  for (long long p = 0; p < planes; ++p) {
    const T* src = x.data.data() + static_cast<std::size_t>(p) * x.h * x.w;
    T* dst = out.data.data() + static_cast<std::size_t>(p) * out.h * out.w;
    for (int y = 0; y < out.h; ++y) {
      const T* srow = src + static_cast<std::size_t>(y / 2) * x.w;
      T* drow = dst + static_cast<std::size_t>(y) * out.w;
      for (int xx = 0; xx < out.w; ++xx) drow[xx] = srow[xx / 2];
    }
  }
  return out;
}

template <typename T>
Tensor4T<T> upsample2_backward(const Tensor4T<T>& x_shape, const Tensor4T<T>& grad_out) {
  Tensor4T<T> grad_in(x_shape.n, x_shape.c, x_shape.h, x_shape.w);
  const long long planes = static_cast<long long>(x_shape.n) * x_shape.c;
#pragma omp parallel for schedule(static)
  for (long long p = 0; p < planes; ++p) {
    const T* g = grad_out.data.data() + static_cast<std::size_t>(p) * grad_out.h * grad_out.w;
    T* dst = grad_in.data.data() + static_cast<std::size_t>(p) * x_shape.h * x_shape.w;
    for (int y = 0; y < grad_out.h; ++y) {
      const T* grow = g + static_cast<std::size_t>(y) * grad_out.w;
      T* drow = dst + static_cast<std::size_t>(y / 2) * x_shape.w;
      for (int xx = 0; xx < grad_out.w; ++xx) drow[xx / 2] += grow[xx];
    }
  }
  return grad_in;
}

template <typename T>
Tensor4T<T> concat_channels(const Tensor4T<T>& a, const Tensor4T<T>& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w)
    throw DataError("concat: spatial/batch mismatch");
  Tensor4T<T> out(a.n, a.c + b.c, a.h, a.w);
  const std::size_t plane = static_cast<std::size_t>(a.h) * a.w;
  for (int bi = 0; bi < a.n; ++bi) {
    for (int ch = 0; ch < a.c; ++ch)
      std::copy_n(a.data.data() + a.index(bi, ch, 0, 0), plane,
                  out.data.data() + out.index(bi, ch, 0, 0));
    for (int ch = 0; ch < b.c; ++ch)
      std::copy_n(b.data.data() + b.index(bi, ch, 0, 0), plane,
                  out.data.data() + out.index(bi, a.c + ch, 0, 0));
  }
  return out;
}

template <typename T>
void split_channels(const Tensor4T<T>& g, int c_a, Tensor4T<T>& ga, Tensor4T<T>& gb) {
  ga = Tensor4T<T>(g.n, c_a, g.h, g.w);
  gb = Tensor4T<T>(g.n, g.c - c_a, g.h, g.w);
  const std::size_t plane = static_cast<std::size_t>(g.h) * g.w;
  for (int bi = 0; bi < g.n; ++bi) {
    for (int ch = 0; ch < c_a; ++ch)
      std::copy_n(g.data.data() + g.index(bi, ch, 0, 0), plane,
                  ga.data.data() + ga.index(bi, ch, 0, 0));
    for (int ch = 0; ch < g.c - c_a; ++ch)
      std::copy_n(g.data.data() + g.index(bi, c_a + ch, 0, 0), plane,
                  gb.data.data() + gb.index(bi, ch, 0, 0));
  }
}

template <typename T>
Tensor4T<T> crop_to(const Tensor4T<T>& x, int h, int w) {
  if (h > x.h || w > x.w) throw DataError("crop_to: target larger than input");
  if (h == x.h && w == x.w) return x;
  Tensor4T<T> out(x.n, x.c, h, w);
  for (int b = 0; b < x.n; ++b)
    for (int ch = 0; ch < x.c; ++ch)
      for (int y = 0; y < h; ++y)
        std::copy_n(x.data.data() + x.index(b, ch, y, 0), static_cast<std::size_t>(w),
                    out.data.data() + out.index(b, ch, y, 0));
  return out;
}

template <typename T>
Tensor4T<T> crop_backward(const Tensor4T<T>& grad_out, int h, int w) {
  if (grad_out.h == h && grad_out.w == w) return grad_out;
  Tensor4T<T> grad_in(grad_out.n, grad_out.c, h, w);
  for (int b = 0; b < grad_out.n; ++b)
    for (int ch = 0; ch < grad_out.c; ++ch)
      for (int y = 0; y < grad_out.h; ++y)
        std::copy_n(grad_out.data.data() + grad_out.index(b, ch, y, 0),
                    static_cast<std::size_t>(grad_out.w),
                    grad_in.data.data() + grad_in.index(b, ch, y, 0));
  return grad_in;
}

template <typename T>
void adamw_step(ParamStoreT<T>& store, T lr, T beta1, T beta2, T eps, T weight_decay) {
  store.step += 1;
  const T bc1 = T(1) - std::pow(beta1, static_cast<T>(store.step));
  const T bc2 = T(1) - std::pow(beta2, static_cast<T>(store.step));
  for (auto& p : store.params) {
    T* val = p->value.data.data();
    const T* g = p->grad.data.data();
    T* m = p->m.data.data();
    T* v = p->v.data.data();
    const long long n = static_cast<long long>(p->value.size());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) {
      m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
      v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
      const T m_hat = m[i] / bc1;
      const T v_hat = v[i] / bc2;
      val[i] -= lr * (m_hat / (std::sqrt(v_hat) + eps) + weight_decay * val[i]);
    }
  }
}

template <typename T>
void init_conv_weight(Tensor4T<T>& weight, Rng& rng, T gain) {
  const int fan_in = weight.c * weight.h * weight.w;
  const T bound = gain * std::sqrt(T(6) / static_cast<T>(fan_in));
  for (T& v : weight.data) v = static_cast<T>(rng.uniform(-float(bound), float(bound)));
}

#define MIDFRAME_INSTANTIATE(T)                                                         \
  template void conv2d_shape<T>(const Tensor4T<T>&, const Tensor4T<T>&, int, int,       \
                                int&, int&);                                            \
  template Tensor4T<T> conv2d_forward<T>(const Tensor4T<T>&, const Tensor4T<T>&,        \
                                         const Tensor4T<T>&, int, int);                 \
  template Tensor4T<T> conv2d_backward<T>(const Tensor4T<T>&, const Tensor4T<T>&,       \
                                          const Tensor4T<T>&, int, int, Tensor4T<T>&,   \
                                          Tensor4T<T>&);                                \
  template Tensor4T<T> prelu_forward<T>(const Tensor4T<T>&, const Tensor4T<T>&);        \
  template Tensor4T<T> prelu_backward<T>(const Tensor4T<T>&, const Tensor4T<T>&,        \
                                         const Tensor4T<T>&, Tensor4T<T>&);             \
  template Tensor4T<T> sigmoid_forward<T>(const Tensor4T<T>&);                          \
  template Tensor4T<T> sigmoid_backward<T>(const Tensor4T<T>&, const Tensor4T<T>&);     \
  template Tensor4T<T> tanh_forward<T>(const Tensor4T<T>&);                             \
  template Tensor4T<T> tanh_backward<T>(const Tensor4T<T>&, const Tensor4T<T>&);        \
  template Tensor4T<T> upsample2_forward<T>(const Tensor4T<T>&);                        \
  template Tensor4T<T> upsample2_backward<T>(const Tensor4T<T>&, const Tensor4T<T>&);   \
  template Tensor4T<T> concat_channels<T>(const Tensor4T<T>&, const Tensor4T<T>&);      \
  template void split_channels<T>(const Tensor4T<T>&, int, Tensor4T<T>&, Tensor4T<T>&); \
  template Tensor4T<T> crop_to<T>(const Tensor4T<T>&, int, int);                        \
  template Tensor4T<T> crop_backward<T>(const Tensor4T<T>&, int, int);                  \
  template void adamw_step<T>(ParamStoreT<T>&, T, T, T, T, T);                          \
  template void init_conv_weight<T>(Tensor4T<T>&, Rng&, T);

MIDFRAME_INSTANTIATE(float)
MIDFRAME_INSTANTIATE(double)
#undef MIDFRAME_INSTANTIATE

}  // namespace midframe
