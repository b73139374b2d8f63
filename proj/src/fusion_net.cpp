#include "midframe/fusion_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <memory>

#include "midframe/parallel.hpp"

namespace midframe {

namespace detail {

template <typename T>
Tensor4T<T> ConvActT<T>::forward(const Tensor4T<T>& x, Trace* tr) const {
  Tensor4T<T> pre = conv2d_forward(x, conv.w->value, conv.b->value, conv.stride, conv.pad);
  Tensor4T<T> out = prelu_forward(pre, slope->value);
  if (tr) {
    tr->x = x;
    tr->pre = std::move(pre);
  }
  return out;
}

template <typename T>
Tensor4T<T> ConvActT<T>::backward(const Trace& tr, const Tensor4T<T>& gy) const {
  Tensor4T<T> g_pre = prelu_backward(tr.pre, slope->value, gy, slope->grad);
  return conv2d_backward(tr.x, conv.w->value, g_pre, conv.stride, conv.pad,
                         conv.w->grad, conv.b->grad);
}

template <typename T>
Tensor4T<T> ResBlockT<T>::forward(const Tensor4T<T>& x, Trace* tr) const {
  Tensor4T<T> h1 = conv2d_forward(x, conv1.w->value, conv1.b->value, 1, conv1.pad);
  Tensor4T<T> h2 = prelu_forward(h1, slope->value);
  Tensor4T<T> y = conv2d_forward(h2, conv2.w->value, conv2.b->value, 1, conv2.pad);
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += x.data[i];
  if (tr) {
    tr->x = x;
    tr->h1 = std::move(h1);
    tr->h2 = std::move(h2);
  }
  return y;
}

template <typename T>
Tensor4T<T> ResBlockT<T>::backward(const Trace& tr, const Tensor4T<T>& gy) const {
  Tensor4T<T> g_h2 = conv2d_backward(tr.h2, conv2.w->value, gy, 1, conv2.pad,
                                     conv2.w->grad, conv2.b->grad);
  Tensor4T<T> g_h1 = prelu_backward(tr.h1, slope->value, g_h2, slope->grad);
  Tensor4T<T> gx = conv2d_backward(tr.x, conv1.w->value, g_h1, 1, conv1.pad,
                                   conv1.w->grad, conv1.b->grad);
  for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] += gy.data[i];  // skip path
  return gx;
}

template <typename T>
Tensor4T<T> StageT<T>::forward(const Tensor4T<T>& x, Trace* tr) const {
  if (tr) tr->rb.resize(blocks.size());
  Tensor4T<T> f = down.forward(x, tr ? &tr->down : nullptr);
  for (std::size_t i = 0; i < blocks.size(); ++i)
    f = blocks[i].forward(f, tr ? &tr->rb[i] : nullptr);
  return f;
}

template <typename T>
Tensor4T<T> StageT<T>::backward(const Trace& tr, const Tensor4T<T>& gy) const {
  Tensor4T<T> g = gy;
  for (std::size_t i = blocks.size(); i-- > 0;) g = blocks[i].backward(tr.rb[i], g);
  return down.backward(tr.down, g);
}

template struct ConvActT<float>;
template struct ConvActT<double>;
template struct ResBlockT<float>;
template struct ResBlockT<double>;
template struct StageT<float>;
template struct StageT<double>;

}  // namespace detail

namespace {

using detail::ScaledFlow;

ScaledFlow rescale_flow(const DenseFlow& flow, int nw, int nh) {
  ScaledFlow out;
  out.w = nw;
  out.h = nh;
  out.u.resize(static_cast<std::size_t>(nw) * nh);
  out.v.resize(out.u.size());
  const float sx = static_cast<float>(flow.width) / nw;
  const float sy = static_cast<float>(flow.height) / nh;
  const float mu = static_cast<float>(nw) / flow.width;
  const float mv = static_cast<float>(nh) / flow.height;
  for (int y = 0; y < nh; ++y) {
    const float srcy = (y + 0.5f) * sy - 0.5f;
    for (int x = 0; x < nw; ++x) {
      const float srcx = (x + 0.5f) * sx - 0.5f;
      const float fx = std::floor(srcx), fy = std::floor(srcy);
      const int x0 = std::clamp(static_cast<int>(fx), 0, flow.width - 1);
      const int x1 = std::clamp(static_cast<int>(fx) + 1, 0, flow.width - 1);
      const int y0 = std::clamp(static_cast<int>(fy), 0, flow.height - 1);
      const int y1 = std::clamp(static_cast<int>(fy) + 1, 0, flow.height - 1);
      const float ax = srcx - fx, ay = srcy - fy;
      const float w00 = (1 - ax) * (1 - ay), w10 = ax * (1 - ay);
      const float w01 = (1 - ax) * ay, w11 = ax * ay;
      const std::size_t i = static_cast<std::size_t>(y) * nw + x;
      out.u[i] = mu * (w00 * flow.u_at(x0, y0) + w10 * flow.u_at(x1, y0) +
                       w01 * flow.u_at(x0, y1) + w11 * flow.u_at(x1, y1));
      out.v[i] = mv * (w00 * flow.v_at(x0, y0) + w10 * flow.v_at(x1, y0) +
                       w01 * flow.v_at(x0, y1) + w11 * flow.v_at(x1, y1));
    }
  }
  return out;
}

template <typename T>
Tensor4T<T> warp_tensor(const Tensor4T<T>& x, const ScaledFlow& flow) {
  Tensor4T<T> out(x.n, x.c, x.h, x.w);
  const long long planes = static_cast<long long>(x.n) * x.c;
#pragma omp parallel for schedule(static)
  for (long long p = 0; p < planes; ++p) {
    const T* src = x.data.data() + static_cast<std::size_t>(p) * x.h * x.w;
    T* dst = out.data.data() + static_cast<std::size_t>(p) * x.h * x.w;
    for (int y = 0; y < x.h; ++y) {
      for (int xx = 0; xx < x.w; ++xx) {
        const std::size_t i = static_cast<std::size_t>(y) * x.w + xx;
        const float sx = xx + flow.u[i];
        const float sy = y + flow.v[i];
        const float fx = std::floor(sx), fy = std::floor(sy);
        const int x0 = std::clamp(static_cast<int>(fx), 0, x.w - 1);
        const int x1 = std::clamp(static_cast<int>(fx) + 1, 0, x.w - 1);
        const int y0 = std::clamp(static_cast<int>(fy), 0, x.h - 1);
        const int y1 = std::clamp(static_cast<int>(fy) + 1, 0, x.h - 1);
        const T ax = static_cast<T>(sx - fx), ay = static_cast<T>(sy - fy);
        dst[i] = (T(1) - ax) * (T(1) - ay) * src[static_cast<std::size_t>(y0) * x.w + x0] +
                 ax * (T(1) - ay) * src[static_cast<std::size_t>(y0) * x.w + x1] +
                 (T(1) - ax) * ay * src[static_cast<std::size_t>(y1) * x.w + x0] +
                 ax * ay * src[static_cast<std::size_t>(y1) * x.w + x1];
      }
    }
  }
  return out;
}

// Scatter adjoint of warp_tensor; flow is constant.
template <typename T>
Tensor4T<T> warp_tensor_backward(const Tensor4T<T>& grad_out, const ScaledFlow& flow) {
  Tensor4T<T> grad_in(grad_out.n, grad_out.c, grad_out.h, grad_out.w);
  const long long planes = static_cast<long long>(grad_out.n) * grad_out.c;
#pragma omp parallel for schedule(static)
  for (long long p = 0; p < planes; ++p) {
    const T* g = grad_out.data.data() + static_cast<std::size_t>(p) * grad_out.h * grad_out.w;
    T* dst = grad_in.data.data() + static_cast<std::size_t>(p) * grad_out.h * grad_out.w;
    for (int y = 0; y < grad_out.h; ++y) {
      for (int xx = 0; xx < grad_out.w; ++xx) {
        const std::size_t i = static_cast<std::size_t>(y) * grad_out.w + xx;
        const float sx = xx + flow.u[i];
        const float sy = y + flow.v[i];
        const float fx = std::floor(sx), fy = std::floor(sy);
        const int x0 = std::clamp(static_cast<int>(fx), 0, grad_out.w - 1);
        const int x1 = std::clamp(static_cast<int>(fx) + 1, 0, grad_out.w - 1);
        const int y0 = std::clamp(static_cast<int>(fy), 0, grad_out.h - 1);
        const int y1 = std::clamp(static_cast<int>(fy) + 1, 0, grad_out.h - 1);
        const T ax = static_cast<T>(sx - fx), ay = static_cast<T>(sy - fy);
        const T gv = g[i];
        dst[static_cast<std::size_t>(y0) * grad_out.w + x0] += (T(1) - ax) * (T(1) - ay) * gv;
        dst[static_cast<std::size_t>(y0) * grad_out.w + x1] += ax * (T(1) - ay) * gv;
        dst[static_cast<std::size_t>(y1) * grad_out.w + x0] += (T(1) - ax) * ay * gv;
        dst[static_cast<std::size_t>(y1) * grad_out.w + x1] += ax * ay * gv;
      }
    }
  }
  return grad_in;
}

template <typename T>
void add_inplace(Tensor4T<T>& a, const Tensor4T<T>& b) {
  if (!a.same_shape(b)) throw DataError("tensor add: shape mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
}

template <typename T>
Tensor4T<T> concat3(const Tensor4T<T>& a, const Tensor4T<T>& b, const Tensor4T<T>& c) {
  return concat_channels(concat_channels(a, b), c);
}

}  // namespace

template <typename T>
Tensor4T<T> image_to_tensor(const Image& img) {
  Tensor4T<T> t(1, img.channels, img.height, img.width);
  for (std::size_t i = 0; i < img.data.size(); ++i) t.data[i] = static_cast<T>(img.data[i]);
  return t;
}

template <typename T>
Image tensor_to_image(const Tensor4T<T>& t) {
  if (t.n != 1 || (t.c != 1 && t.c != 3)) throw DataError("tensor_to_image: bad shape");
  Image img(t.w, t.h, t.c);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    img.data[i] = static_cast<float>(t.data[i]);
  return img;
}

template Tensor4T<float> image_to_tensor<float>(const Image&);
template Tensor4T<double> image_to_tensor<double>(const Image&);
template Image tensor_to_image<float>(const Tensor4T<float>&);
template Image tensor_to_image<double>(const Tensor4T<double>&);

Image promote_to_rgb(const Image& img) {
  if (img.channels == 3) return img;
  Image out(img.width, img.height, 3);
  for (int c = 0; c < 3; ++c)
    std::copy(img.plane(0), img.plane(0) + img.pixels(), out.plane(c));
  return out;
}

template <typename T>
FusionModelT<T>::FusionModelT(const FusionConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed ^ 0x6d696466726d6531ULL);
  for (int k = 0; k < kFusionStages; ++k) channels_[k] = cfg_.base_channels << k;

  auto conv = [&](const std::string& name, int c_in, int c_out, int kernel, int stride,
                  int pad, T scale) {
    detail::ConvLayerT<T> layer;
    layer.w = store_.add(name + ".w", c_out, c_in, kernel, kernel);
    layer.b = store_.add(name + ".b", 1, c_out, 1, 1);
    layer.stride = stride;
    layer.pad = pad;
    init_conv_weight(layer.w->value, rng, scale);
    return layer;
  };
  auto conv_act = [&](const std::string& name, int c_in, int c_out, int kernel,
                      int stride, int pad, T scale) {
    detail::ConvActT<T> ca;
    ca.conv = conv(name, c_in, c_out, kernel, stride, pad, scale);
    ca.slope = store_.add(name + ".prelu", 1, c_out, 1, 1);
    std::fill(ca.slope->value.data.begin(), ca.slope->value.data.end(), T(0.25));
    return ca;
  };
  auto resblock = [&](const std::string& name, int ch) {
    detail::ResBlockT<T> rb;
    rb.conv1 = conv(name + ".conv1", ch, ch, 3, 1, 1, T(1));
    rb.conv2 = conv(name + ".conv2", ch, ch, 3, 1, 1, T(1));
    rb.slope = store_.add(name + ".prelu", 1, ch, 1, 1);
    std::fill(rb.slope->value.data.begin(), rb.slope->value.data.end(), T(0.25));
    return rb;
  };

  // context network
  for (int k = 0; k < kFusionStages; ++k) {
    const int c_in = k == 0 ? 3 : channels_[k - 1];
    const std::string base = "ctx.s" + std::to_string(k);
    ctx_stages_[k].down = conv_act(base + ".down", c_in, channels_[k], 3, 2, 1, T(1));
    for (int r = 0; r < cfg_.resblocks_per_stage; ++r)
      ctx_stages_[k].blocks.push_back(resblock(base + ".rb" + std::to_string(r), channels_[k]));
  }

  // fusion encoder: warped frames (3+3) + intermediate flows (2+2)
  for (int k = 0; k < kFusionStages; ++k) {
    const int c_in = k == 0 ? 10 : channels_[k - 1];
    const std::string base = "fus.enc" + std::to_string(k);
    enc_[k].down = conv_act(base + ".down", c_in, channels_[k], 3, 2, 1, T(1));
    enc_[k].inject = conv_act(base + ".inject", channels_[k] * 3, channels_[k], 1, 1, 0, T(1));
    for (int r = 0; r < cfg_.resblocks_per_stage; ++r)
      enc_[k].blocks.push_back(resblock(base + ".rb" + std::to_string(r), channels_[k]));
  }

  // decoder with skip connections
  for (int j = 0; j < kFusionStages - 1; ++j) {
    dec_[static_cast<std::size_t>(j)] =
        conv_act("fus.dec" + std::to_string(j), channels_[j + 1] + channels_[j],
                 channels_[j], 3, 1, 1, T(1));
  }
  final_ = conv_act("fus.final", channels_[0], channels_[0], 3, 1, 1, T(1));
  // small head keeps the untrained model close to the plain blend
  head_ = conv("fus.head", channels_[0], 4, 3, 1, 1, T(0.1));
}

template <typename T>
void FusionModelT<T>::zero_parameters() {
  for (auto& p : store_.params) std::fill(p->value.data.begin(), p->value.data.end(), T(0));
}

template <typename T>
std::vector<Tensor4T<T>> FusionModelT<T>::run_context(const Image& frame,
                                                      const DenseFlow& flow_t,
                                                      ContextTrace* tr) const {
  if (frame.channels != 3) throw DataError("context extraction expects 3 channels");
  if (frame.width != flow_t.width || frame.height != flow_t.height)
    throw DataError("context extraction: frame/flow mismatch");
  if (tr) tr->stages.resize(kFusionStages);

  std::vector<Tensor4T<T>> warped;
  Tensor4T<T> f = image_to_tensor<T>(frame);
  for (int k = 0; k < kFusionStages; ++k) {
    f = ctx_stages_[k].forward(f, tr ? &tr->stages[static_cast<std::size_t>(k)] : nullptr);
    const ScaledFlow sf = rescale_flow(flow_t, f.w, f.h);
    Tensor4T<T> wf = warp_tensor(f, sf);
    if (tr) {
      tr->unwarped.push_back(f);
      tr->flows.push_back(sf);
      tr->warped.push_back(wf);
    }
    warped.push_back(std::move(wf));
  }
  return warped;
}

template <typename T>
std::vector<Tensor4T<T>> FusionModelT<T>::context_extract(const Image& frame,
                                                          const DenseFlow& flow_t) const {
  return run_context(frame, flow_t, nullptr);
}

template <typename T>
Tensor4T<T> FusionModelT<T>::run_fusion(const WarpPair& pair,
                                        const std::vector<Tensor4T<T>>& ctx0,
                                        const std::vector<Tensor4T<T>>& ctx1,
                                        Trace* tr) const {
  if (static_cast<int>(ctx0.size()) != kFusionStages ||
      static_cast<int>(ctx1.size()) != kFusionStages)
    throw DataError("fusion: expected one context feature map per stage");
  const int W = pair.warped0.width, H = pair.warped0.height;

  Tensor4T<T> w0 = image_to_tensor<T>(pair.warped0);
  Tensor4T<T> w1 = image_to_tensor<T>(pair.warped1);
  Tensor4T<T> ft(1, 4, H, W);
  for (std::size_t i = 0; i < pair.flow_t0.size(); ++i) {
    ft.data[i] = static_cast<T>(pair.flow_t0.u[i]);
    ft.data[pair.flow_t0.size() + i] = static_cast<T>(pair.flow_t0.v[i]);
    ft.data[2 * pair.flow_t0.size() + i] = static_cast<T>(pair.flow_t1.u[i]);
    ft.data[3 * pair.flow_t0.size() + i] = static_cast<T>(pair.flow_t1.v[i]);
  }
  Tensor4T<T> x = concat3(w0, w1, ft);
  if (tr) tr->input = x;

  // encoder with context injection at each scale
  std::vector<Tensor4T<T>> skips;
  Tensor4T<T> f = x;
  for (int k = 0; k < kFusionStages; ++k) {
    FusionStageTrace* st = tr ? &tr->enc[static_cast<std::size_t>(k)] : nullptr;
    Tensor4T<T> down = enc_[k].down.forward(f, st ? &st->down : nullptr);
    if (down.h != ctx0[static_cast<std::size_t>(k)].h ||
        down.w != ctx0[static_cast<std::size_t>(k)].w)
      throw DataError("fusion: context feature scale mismatch");
    Tensor4T<T> merged = concat3(down, ctx0[static_cast<std::size_t>(k)],
                                 ctx1[static_cast<std::size_t>(k)]);
    Tensor4T<T> inj = enc_[k].inject.forward(merged, st ? &st->inject : nullptr);
    if (st) {
      st->down_out = down;
      st->rb.resize(enc_[k].blocks.size());
    }
    for (std::size_t r = 0; r < enc_[k].blocks.size(); ++r)
      inj = enc_[k].blocks[r].forward(inj, st ? &st->rb[r] : nullptr);
    if (st) st->out = inj;
    skips.push_back(inj);
    f = std::move(inj);
  }

  // decoder
  Tensor4T<T> d = skips.back();
  for (int j = kFusionStages - 2; j >= 0; --j) {
    DecoderTrace* dt = tr ? &tr->dec[static_cast<std::size_t>(j)] : nullptr;
    if (dt) dt->up_in = d;
    Tensor4T<T> up = upsample2_forward(d);
    up = crop_to(up, skips[static_cast<std::size_t>(j)].h, skips[static_cast<std::size_t>(j)].w);
    Tensor4T<T> merged = concat_channels(up, skips[static_cast<std::size_t>(j)]);
    if (dt) dt->merged = merged;
    d = dec_[static_cast<std::size_t>(j)].forward(merged, dt ? &dt->conv : nullptr);
  }

  DecoderTrace* ft_tr = tr ? &tr->final : nullptr;
  if (ft_tr) ft_tr->up_in = d;
  Tensor4T<T> up = crop_to(upsample2_forward(d), H, W);
  if (ft_tr) ft_tr->merged = up;
  Tensor4T<T> u1 = final_.forward(up, ft_tr ? &ft_tr->conv : nullptr);
  Tensor4T<T> head_out =
      conv2d_forward(u1, head_.w->value, head_.b->value, head_.stride, head_.pad);
  if (tr) {
    tr->head_in = u1;
    tr->head_out = head_out;
    tr->w0 = w0;
    tr->w1 = w1;
  }

  // head: 1-channel sigmoid mask + 3-channel bounded residual
  Tensor4T<T> m_pre(1, 1, H, W), r_pre(1, 3, H, W);
  split_channels(head_out, 1, m_pre, r_pre);
  Tensor4T<T> mask = sigmoid_forward(m_pre);
  Tensor4T<T> tanh_r = tanh_forward(r_pre);

  Tensor4T<T> out_pre(1, 3, H, W);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      const T m = mask.data[i];
      out_pre.data[static_cast<std::size_t>(c) * plane + i] =
          m * w0.data[static_cast<std::size_t>(c) * plane + i] +
          (T(1) - m) * w1.data[static_cast<std::size_t>(c) * plane + i] +
          T(0.5) * tanh_r.data[static_cast<std::size_t>(c) * plane + i];
    }
  }
  if (tr) {
    tr->mask = mask;
    tr->tanh_r = tanh_r;
    tr->out_pre = out_pre;
  }
  return out_pre;
}

template <typename T>
Image FusionModelT<T>::fuse_learned(const WarpPair& pair,
                                    const std::vector<Tensor4T<T>>& ctx0,
                                    const std::vector<Tensor4T<T>>& ctx1) const {
  Tensor4T<T> out_pre = run_fusion(pair, ctx0, ctx1, nullptr);
  for (T& v : out_pre.data) v = std::clamp(v, T(0), T(1));
  return tensor_to_image(out_pre);
}

template <typename T>
Image FusionModelT<T>::infer(const Image& frame0, const Image& frame1,
                             const WarpPair& pair) const {
  const std::vector<Tensor4T<T>> ctx0 = context_extract(frame0, pair.flow_t0);
  const std::vector<Tensor4T<T>> ctx1 = context_extract(frame1, pair.flow_t1);
  return fuse_learned(pair, ctx0, ctx1);
}

template <typename T>
Image FusionModelT<T>::forward_train(const Image& frame0, const Image& frame1,
                                     const WarpPair& pair, Trace& trace) const {
  run_context(frame0, pair.flow_t0, &trace.ctx0);
  run_context(frame1, pair.flow_t1, &trace.ctx1);
  Tensor4T<T> out_pre = run_fusion(pair, trace.ctx0.warped, trace.ctx1.warped, &trace);
  Tensor4T<T> out = out_pre;
  for (T& v : out.data) v = std::clamp(v, T(0), T(1));
  return tensor_to_image(out);
}

template <typename T>
void FusionModelT<T>::backward(const Trace& tr, const Image& grad_output) {
  const int H = tr.out_pre.h, W = tr.out_pre.w;
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  if (grad_output.channels != 3 || grad_output.width != W || grad_output.height != H)
    throw DataError("fusion backward: grad shape mismatch");

  // clamp: gradient passes only strictly inside (0,1)
  Tensor4T<T> g_outpre(1, 3, H, W);
  for (std::size_t i = 0; i < g_outpre.size(); ++i) {
    const T v = tr.out_pre.data[i];
    g_outpre.data[i] =
        (v > T(0) && v < T(1)) ? static_cast<T>(grad_output.data[i]) : T(0);
  }

  // out_pre = m*w0 + (1-m)*w1 + 0.5*tanh_r
  Tensor4T<T> g_tanh(1, 3, H, W);
  for (std::size_t i = 0; i < g_tanh.size(); ++i)
    g_tanh.data[i] = T(0.5) * g_outpre.data[i];
  Tensor4T<T> g_rpre = tanh_backward(tr.tanh_r, g_tanh);

  Tensor4T<T> g_mask(1, 1, H, W);
  for (std::size_t i = 0; i < plane; ++i) {
    T acc = T(0);
    for (int c = 0; c < 3; ++c) {
      const std::size_t k = static_cast<std::size_t>(c) * plane + i;
      acc += g_outpre.data[k] * (tr.w0.data[k] - tr.w1.data[k]);
    }
    g_mask.data[i] = acc;
  }
  Tensor4T<T> g_mpre = sigmoid_backward(tr.mask, g_mask);

  Tensor4T<T> g_head = concat_channels(g_mpre, g_rpre);
  Tensor4T<T> g_u1 = conv2d_backward(tr.head_in, head_.w->value, g_head, head_.stride,
                                     head_.pad, head_.w->grad, head_.b->grad);

  // final up-block
  Tensor4T<T> g_up = final_.backward(tr.final.conv, g_u1);
  Tensor4T<T> g_up_full = crop_backward(g_up, tr.final.up_in.h * 2, tr.final.up_in.w * 2);
  Tensor4T<T> g_d = upsample2_backward(tr.final.up_in, g_up_full);

  // decoder chain, accumulating gradients into the encoder skips
  std::vector<Tensor4T<T>> g_skip(kFusionStages);
  for (int j = 0; j < kFusionStages - 1; ++j) {
    const DecoderTrace& dt = tr.dec[static_cast<std::size_t>(j)];
    Tensor4T<T> g_merged = dec_[static_cast<std::size_t>(j)].backward(dt.conv, g_d);
    Tensor4T<T> g_up_c, g_s;
    split_channels(g_merged, channels_[j + 1], g_up_c, g_s);
    g_skip[static_cast<std::size_t>(j)] = std::move(g_s);
    Tensor4T<T> g_up_j = crop_backward(g_up_c, dt.up_in.h * 2, dt.up_in.w * 2);
    g_d = upsample2_backward(dt.up_in, g_up_j);
  }
  g_skip[kFusionStages - 1] = std::move(g_d);

  // encoder backward, collecting per-scale context gradients
  std::vector<Tensor4T<T>> g_ctx0(kFusionStages), g_ctx1(kFusionStages);
  for (int k = kFusionStages - 1; k >= 0; --k) {
    const FusionStageTrace& st = tr.enc[static_cast<std::size_t>(k)];
    Tensor4T<T> g = std::move(g_skip[static_cast<std::size_t>(k)]);
    for (std::size_t r = enc_[k].blocks.size(); r-- > 0;)
      g = enc_[k].blocks[r].backward(st.rb[r], g);
    Tensor4T<T> g_merged = enc_[k].inject.backward(st.inject, g);
    Tensor4T<T> g_down_pair, g_c1;
    split_channels(g_merged, channels_[k] * 2, g_down_pair, g_c1);
    Tensor4T<T> g_down, g_c0;
    split_channels(g_down_pair, channels_[k], g_down, g_c0);
    g_ctx0[static_cast<std::size_t>(k)] = std::move(g_c0);
    g_ctx1[static_cast<std::size_t>(k)] = std::move(g_c1);
    Tensor4T<T> g_in = enc_[k].down.backward(st.down, g_down);
    if (k > 0) add_inplace(g_skip[static_cast<std::size_t>(k - 1)], g_in);
  }

  // context backward for both frames
  auto ctx_backward = [&](const ContextTrace& ct, std::vector<Tensor4T<T>>& g_ctx) {
    Tensor4T<T> carry;
    bool has_carry = false;
    for (int k = kFusionStages - 1; k >= 0; --k) {
      Tensor4T<T> g_unwarped = warp_tensor_backward(g_ctx[static_cast<std::size_t>(k)],
                                                    ct.flows[static_cast<std::size_t>(k)]);
      if (has_carry) add_inplace(g_unwarped, carry);
      carry = ctx_stages_[k].backward(ct.stages[static_cast<std::size_t>(k)], g_unwarped);
      has_carry = true;
    }
  };
  ctx_backward(tr.ctx0, g_ctx0);
  ctx_backward(tr.ctx1, g_ctx1);
}

// ---- checkpoint I/O (FRWT: magic, u32 version, u32 count, then
//      u32 name_len, name, u32 rank, u32 dims[rank], f32 data) ----

namespace {

constexpr char kMagic[4] = {'F', 'R', 'W', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr const char* kConfigTensor = "__config";

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_u32(std::FILE* f, std::uint32_t v) {
  if (std::fwrite(&v, 4, 1, f) != 1) throw IoError("checkpoint: short write");
}

std::uint32_t read_u32(std::FILE* f) {
  std::uint32_t v = 0;
  if (std::fread(&v, 4, 1, f) != 1) throw IoError("checkpoint: truncated");
  return v;
}

struct RawTensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

std::map<std::string, RawTensor> read_all_tensors(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open checkpoint " + path);
  char magic[4];
  if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("bad checkpoint magic in " + path);
  const std::uint32_t version = read_u32(f.get());
  if (version != kVersion) throw DataError("unsupported checkpoint version");
  const std::uint32_t count = read_u32(f.get());
  std::map<std::string, RawTensor> tensors;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint32_t name_len = read_u32(f.get());
    std::string name(name_len, '\0');
    if (name_len && std::fread(name.data(), 1, name_len, f.get()) != name_len)
      throw IoError("checkpoint: truncated name");
    RawTensor raw;
    const std::uint32_t rank = read_u32(f.get());
    std::size_t total = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      raw.dims.push_back(read_u32(f.get()));
      total *= raw.dims.back();
    }
    raw.data.resize(total);
    if (total && std::fread(raw.data.data(), 4, total, f.get()) != total)
      throw IoError("checkpoint: truncated tensor data");
    tensors.emplace(std::move(name), std::move(raw));
  }
  return tensors;
}

}  // namespace

template <typename T>
void FusionModelT<T>::save_checkpoint(const std::string& path,
                                      const std::string& config_echo) const {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot write checkpoint " + path);
  if (std::fwrite(kMagic, 1, 4, f.get()) != 4) throw IoError("checkpoint: short write");
  write_u32(f.get(), kVersion);
  write_u32(f.get(), static_cast<std::uint32_t>(store_.params.size() + 1));

  std::string echo = config_echo;
  if (echo.find("fusion.base_channels=") == std::string::npos)
    echo += "\nfusion.base_channels=" + std::to_string(cfg_.base_channels) +
            "\nfusion.resblocks_per_stage=" + std::to_string(cfg_.resblocks_per_stage) + "\n";
  write_u32(f.get(), static_cast<std::uint32_t>(std::strlen(kConfigTensor)));
  if (std::fwrite(kConfigTensor, 1, std::strlen(kConfigTensor), f.get()) !=
      std::strlen(kConfigTensor))
    throw IoError("checkpoint: short write");
  write_u32(f.get(), 1);
  write_u32(f.get(), static_cast<std::uint32_t>(echo.size()));
  std::vector<float> echo_f(echo.size());
  for (std::size_t i = 0; i < echo.size(); ++i)
    echo_f[i] = static_cast<float>(static_cast<unsigned char>(echo[i]));
  if (!echo_f.empty() &&
      std::fwrite(echo_f.data(), 4, echo_f.size(), f.get()) != echo_f.size())
    throw IoError("checkpoint: short write");

  for (const auto& p : store_.params) {
    write_u32(f.get(), static_cast<std::uint32_t>(p->name.size()));
    if (std::fwrite(p->name.data(), 1, p->name.size(), f.get()) != p->name.size())
      throw IoError("checkpoint: short write");
    write_u32(f.get(), 4);
    write_u32(f.get(), static_cast<std::uint32_t>(p->value.n));
    write_u32(f.get(), static_cast<std::uint32_t>(p->value.c));
    write_u32(f.get(), static_cast<std::uint32_t>(p->value.h));
    write_u32(f.get(), static_cast<std::uint32_t>(p->value.w));
    std::vector<float> buf(p->value.size());
    for (std::size_t i = 0; i < buf.size(); ++i)
      buf[i] = static_cast<float>(p->value.data[i]);
    if (std::fwrite(buf.data(), 4, buf.size(), f.get()) != buf.size())
      throw IoError("checkpoint: short write");
  }
}

template <typename T>
std::string FusionModelT<T>::checkpoint_config_echo(const std::string& path) {
  const auto tensors = read_all_tensors(path);
  const auto it = tensors.find(kConfigTensor);
  if (it == tensors.end()) return {};
  std::string echo;
  echo.reserve(it->second.data.size());
  for (float v : it->second.data)
    echo.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  return echo;
}

namespace {

int parse_echo_int(const std::string& echo, const std::string& key, int fallback) {
  const std::string needle = key + "=";
  std::size_t pos = echo.find(needle);
  if (pos == std::string::npos) return fallback;
  pos += needle.size();
  return std::atoi(echo.c_str() + pos);
}

}  // namespace

template <typename T>
FusionModelT<T> FusionModelT<T>::load_checkpoint(const std::string& path) {
  const auto tensors = read_all_tensors(path);
  std::string echo;
  if (const auto it = tensors.find(kConfigTensor); it != tensors.end()) {
    for (float v : it->second.data)
      echo.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  }
  FusionConfig cfg;
  cfg.mode = FusionConfig::Mode::Learned;
  cfg.base_channels = parse_echo_int(echo, "fusion.base_channels", 16);
  cfg.resblocks_per_stage = parse_echo_int(echo, "fusion.resblocks_per_stage", 4);

  FusionModelT<T> model(cfg, 0);
  for (auto& p : model.store_.params) {
    const auto it = tensors.find(p->name);
    if (it == tensors.end())
      throw DataError("checkpoint missing tensor " + p->name);
    if (it->second.data.size() != p->value.size())
      throw DataError("checkpoint tensor size mismatch for " + p->name);
    for (std::size_t i = 0; i < p->value.size(); ++i)
      p->value.data[i] = static_cast<T>(it->second.data[i]);
    std::fill(p->grad.data.begin(), p->grad.data.end(), T(0));
    std::fill(p->m.data.begin(), p->m.data.end(), T(0));
    std::fill(p->v.data.begin(), p->v.data.end(), T(0));
  }
  model.store_.step = 0;
  return model;
}

template class FusionModelT<float>;
template class FusionModelT<double>;

}  // namespace midframe
