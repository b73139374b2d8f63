#include "midframe/flow_gf.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "midframe/parallel.hpp"

namespace midframe {

namespace {

// Horizontal correlation of a single plane, replicate border.
void correlate_h(const float* src, float* dst, int w, int h,
                 const std::vector<float>& taps) {
  const int r = static_cast<int>(taps.size()) / 2;
  parallel_rows(h, [&](int y) {
    const float* srow = src + static_cast<std::size_t>(y) * w;
    float* drow = dst + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      if (x >= r && x + r < w) {
        for (int i = -r; i <= r; ++i) acc += taps[i + r] * srow[x + i];
      } else {
        for (int i = -r; i <= r; ++i)
          acc += taps[i + r] * srow[std::clamp(x + i, 0, w - 1)];
      }
      drow[x] = acc;
    }
  });
}

void correlate_v(const float* src, float* dst, int w, int h,
                 const std::vector<float>& taps) {
  const int r = static_cast<int>(taps.size()) / 2;
  parallel_rows(h, [&](int y) {
    float* drow = dst + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) drow[x] = 0.0f;
    for (int j = -r; j <= r; ++j) {
      const int yi = std::clamp(y + j, 0, h - 1);
      const float kj = taps[j + r];
      const float* srow = src + static_cast<std::size_t>(yi) * w;
      for (int x = 0; x < w; ++x) drow[x] += kj * srow[x];
    }
  });
}

// Truncated box sum (no border padding): sum over the window intersection
// with the image. Sliding accumulators keep it O(1) per pixel.
void box_sum(const std::vector<float>& src, std::vector<float>& dst, int w, int h,
             int radius) {
  std::vector<float> tmp(src.size());
  parallel_rows(h, [&](int y) {
    const float* srow = src.data() + static_cast<std::size_t>(y) * w;
    float* trow = tmp.data() + static_cast<std::size_t>(y) * w;
    double acc = 0.0;
    for (int x = 0; x < std::min(radius, w - 1) + 1; ++x) acc += srow[x];
    for (int x = 0; x < w; ++x) {
      trow[x] = static_cast<float>(acc);
      const int add = x + radius + 1;
      const int sub = x - radius;
      if (add < w) acc += srow[add];
      if (sub >= 0) acc -= srow[sub];
    }
  });
  // vertical pass: contiguous column blocks, one running sum per column
  const int block = 256;
  const int nblocks = (w + block - 1) / block;
#pragma omp parallel for schedule(static)
  for (int b = 0; b < nblocks; ++b) {
    const int x0 = b * block;
    const int x1 = std::min(w, x0 + block);
    std::vector<double> acc(static_cast<std::size_t>(x1 - x0), 0.0);
    for (int y = 0; y < std::min(radius, h - 1) + 1; ++y) {
      const float* trow = tmp.data() + static_cast<std::size_t>(y) * w;
      for (int x = x0; x < x1; ++x) acc[static_cast<std::size_t>(x - x0)] += trow[x];
    }
    for (int y = 0; y < h; ++y) {
      float* drow = dst.data() + static_cast<std::size_t>(y) * w;
      for (int x = x0; x < x1; ++x)
        drow[x] = static_cast<float>(acc[static_cast<std::size_t>(x - x0)]);
      const int add = y + radius + 1;
      const int sub = y - radius;
      if (add < h) {
        const float* trow = tmp.data() + static_cast<std::size_t>(add) * w;
        for (int x = x0; x < x1; ++x) acc[static_cast<std::size_t>(x - x0)] += trow[x];
      }
      if (sub >= 0) {
        const float* trow = tmp.data() + static_cast<std::size_t>(sub) * w;
        for (int x = x0; x < x1; ++x) acc[static_cast<std::size_t>(x - x0)] -= trow[x];
      }
    }
  }
}

struct Moments {
  double u2 = 0.0;  // sum g(i) i^2
  // inverse of the (1, x^2, y^2) normal block
  std::array<std::array<double, 3>, 3> inv{};
};

Moments applicability_moments(const std::vector<float>& g) {
  const int r = static_cast<int>(g.size()) / 2;
  double u2 = 0.0, u4 = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double gi = g[static_cast<std::size_t>(i + r)];
    u2 += gi * i * i;
    u4 += gi * i * i * i * i;
  }
  // S = [[1, u2, u2], [u2, u4, u2^2], [u2, u2^2, u4]]
  const double s[3][3] = {{1.0, u2, u2}, {u2, u4, u2 * u2}, {u2, u2 * u2, u4}};
  const double det = s[0][0] * (s[1][1] * s[2][2] - s[1][2] * s[2][1]) -
                     s[0][1] * (s[1][0] * s[2][2] - s[1][2] * s[2][0]) +
                     s[0][2] * (s[1][0] * s[2][1] - s[1][1] * s[2][0]);
  Moments m;
  m.u2 = u2;
  const double inv_det = 1.0 / det;
  m.inv[0][0] = (s[1][1] * s[2][2] - s[1][2] * s[2][1]) * inv_det;
  m.inv[0][1] = (s[0][2] * s[2][1] - s[0][1] * s[2][2]) * inv_det;
  m.inv[0][2] = (s[0][1] * s[1][2] - s[0][2] * s[1][1]) * inv_det;
  m.inv[1][0] = (s[1][2] * s[2][0] - s[1][0] * s[2][2]) * inv_det;
  m.inv[1][1] = (s[0][0] * s[2][2] - s[0][2] * s[2][0]) * inv_det;
  m.inv[1][2] = (s[0][2] * s[1][0] - s[0][0] * s[1][2]) * inv_det;
  m.inv[2][0] = (s[1][0] * s[2][1] - s[1][1] * s[2][0]) * inv_det;
  m.inv[2][1] = (s[0][1] * s[2][0] - s[0][0] * s[2][1]) * inv_det;
  m.inv[2][2] = (s[0][0] * s[1][1] - s[0][1] * s[1][0]) * inv_det;
  return m;
}

// Gaussian applicability truncated to the poly_n window, normalized to sum 1.
std::vector<float> applicability(int poly_n, float sigma) {
  const int r = poly_n / 2;
  std::vector<float> g(static_cast<std::size_t>(poly_n));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-0.5 * double(i) * i / (double(sigma) * sigma));
    g[static_cast<std::size_t>(i + r)] = static_cast<float>(v);
    sum += v;
  }
  for (float& v : g) v = static_cast<float>(v / sum);
  return g;
}

}  // namespace

void GFParams::validate() const {
  if (!(pyr_scale > 0.0f && pyr_scale < 1.0f))
    throw DataError("pyr_scale must be in (0,1)");
  if (poly_n < 3 || poly_n % 2 == 0) throw DataError("poly_n must be odd and >= 3");
  if (win_size < 3 || win_size % 2 == 0) throw DataError("win_size must be odd and >= 3");
  if (levels < 1) throw DataError("levels must be >= 1");
  if (iterations < 1) throw DataError("iterations must be >= 1");
  if (!(poly_sigma > 0.0f)) throw DataError("poly_sigma must be positive");
}

PolyExpansion::PolyExpansion(int w, int h) : width(w), height(h) {
  const std::size_t n = static_cast<std::size_t>(w) * h;
  a11.assign(n, 0.0f);
  a12.assign(n, 0.0f);
  a22.assign(n, 0.0f);
  b1.assign(n, 0.0f);
  b2.assign(n, 0.0f);
  c.assign(n, 0.0f);
}

PolyExpansion polynomial_expansion(const Image& img, int poly_n, float poly_sigma) {
  if (img.channels != 1) throw DataError("polynomial expansion needs 1-channel input");
  if (poly_n < 3 || poly_n % 2 == 0) throw DataError("poly_n must be odd and >= 3");

  const int w = img.width, h = img.height;
  const std::vector<float> g = applicability(poly_n, poly_sigma);
  const int r = poly_n / 2;
  std::vector<float> gx(g.size()), gxx(g.size());
  for (int i = -r; i <= r; ++i) {
    gx[static_cast<std::size_t>(i + r)] = g[static_cast<std::size_t>(i + r)] * i;
    gxx[static_cast<std::size_t>(i + r)] = g[static_cast<std::size_t>(i + r)] * i * i;
  }
  const Moments mom = applicability_moments(g);

  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<float> v0(n), v1(n), v2(n);  // vertical passes: g, y*g, y^2*g
  correlate_v(img.plane(0), v0.data(), w, h, g);
  correlate_v(img.plane(0), v1.data(), w, h, gx);
  correlate_v(img.plane(0), v2.data(), w, h, gxx);

  std::vector<float> m00(n), m10(n), m20(n), m01(n), m11(n), m02(n);
  correlate_h(v0.data(), m00.data(), w, h, g);
  correlate_h(v0.data(), m10.data(), w, h, gx);
  correlate_h(v0.data(), m20.data(), w, h, gxx);
  correlate_h(v1.data(), m01.data(), w, h, g);
  correlate_h(v1.data(), m11.data(), w, h, gx);
  correlate_h(v2.data(), m02.data(), w, h, g);

  PolyExpansion out(w, h);
  const double inv_u2 = 1.0 / mom.u2;
  const double inv_u2u2 = 1.0 / (mom.u2 * mom.u2);
  parallel_rows(h, [&](int y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const std::size_t i = row + x;
      const double q0 = m00[i], q20 = m20[i], q02 = m02[i];
      out.b1[i] = static_cast<float>(m10[i] * inv_u2);
      out.b2[i] = static_cast<float>(m01[i] * inv_u2);
      out.a12[i] = static_cast<float>(0.5 * m11[i] * inv_u2u2);
      out.c[i] = static_cast<float>(mom.inv[0][0] * q0 + mom.inv[0][1] * q20 +
                                    mom.inv[0][2] * q02);
      out.a11[i] = static_cast<float>(mom.inv[1][0] * q0 + mom.inv[1][1] * q20 +
                                      mom.inv[1][2] * q02);
      out.a22[i] = static_cast<float>(mom.inv[2][0] * q0 + mom.inv[2][1] * q20 +
                                      mom.inv[2][2] * q02);
    }
  });
  return out;
}

DenseFlow gf_displacement(const PolyExpansion& exp1, const PolyExpansion& exp2,
                          const DenseFlow& prior, int win_size) {
  if (exp1.width != exp2.width || exp1.height != exp2.height)
    throw DataError("expansion dimensions differ");
  if (prior.width != exp1.width || prior.height != exp1.height)
    throw DataError("prior flow dimensions differ");
  if (win_size < 1 || win_size % 2 == 0) throw DataError("win_size must be odd");

  const int w = exp1.width, h = exp1.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<float> g11(n), g12(n), g22(n), h1(n), h2(n);

  parallel_rows(h, [&](int y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const std::size_t i = row + x;
      const float pu = prior.u[i];
      const float pv = prior.v[i];
      const int qx = std::clamp(static_cast<int>(std::lround(x + pu)), 0, w - 1);
      const int qy = std::clamp(static_cast<int>(std::lround(y + pv)), 0, h - 1);
      const std::size_t q = static_cast<std::size_t>(qy) * w + qx;
      // the constraint absorbs the displacement actually applied to the
      // lookup (rounded and clamped), never the raw prior
      const float du = static_cast<float>(qx - x);
      const float dv = static_cast<float>(qy - y);

      const float a11 = 0.5f * (exp1.a11[i] + exp2.a11[q]);
      const float a12 = 0.5f * (exp1.a12[i] + exp2.a12[q]);
      const float a22 = 0.5f * (exp1.a22[i] + exp2.a22[q]);
      const float db1 = -0.5f * (exp2.b1[q] - exp1.b1[i]) + (a11 * du + a12 * dv);
      const float db2 = -0.5f * (exp2.b2[q] - exp1.b2[i]) + (a12 * du + a22 * dv);

      g11[i] = a11 * a11 + a12 * a12;
      g12[i] = a11 * a12 + a12 * a22;
      g22[i] = a12 * a12 + a22 * a22;
      h1[i] = a11 * db1 + a12 * db2;
      h2[i] = a12 * db1 + a22 * db2;
    }
  });

  const int radius = win_size / 2;
  std::vector<float> sg11(n), sg12(n), sg22(n), sh1(n), sh2(n);
  box_sum(g11, sg11, w, h, radius);
  box_sum(g12, sg12, w, h, radius);
  box_sum(g22, sg22, w, h, radius);
  box_sum(h1, sh1, w, h, radius);
  box_sum(h2, sh2, w, h, radius);

  DenseFlow flow(w, h);
  parallel_rows(h, [&](int y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      const std::size_t i = row + x;
      const double a = sg11[i], b = sg12[i], c = sg22[i];
      const double det = a * c - b * b;
      if (det < 1e-9) {  // singular normal equations: keep the prior
        flow.u[i] = prior.u[i];
        flow.v[i] = prior.v[i];
      } else {
        const double inv_det = 1.0 / det;
        flow.u[i] = static_cast<float>((c * sh1[i] - b * sh2[i]) * inv_det);
        flow.v[i] = static_cast<float>((a * sh2[i] - b * sh1[i]) * inv_det);
      }
    }
  });
  return flow;
}

namespace {

DenseFlow upsample_flow(const DenseFlow& flow, int new_w, int new_h) {
  DenseFlow out(new_w, new_h);
  const float sx = static_cast<float>(flow.width) / new_w;
  const float sy = static_cast<float>(flow.height) / new_h;
  const float mag_x = static_cast<float>(new_w) / flow.width;
  const float mag_y = static_cast<float>(new_h) / flow.height;
  parallel_rows(new_h, [&](int y) {
    const float srcy = (y + 0.5f) * sy - 0.5f;
    const float fy = std::floor(srcy);
    const int y0 = static_cast<int>(fy);
    const float ay = srcy - fy;
    const int y0c = std::clamp(y0, 0, flow.height - 1);
    const int y1c = std::clamp(y0 + 1, 0, flow.height - 1);
    for (int x = 0; x < new_w; ++x) {
      const float srcx = (x + 0.5f) * sx - 0.5f;
      const float fx = std::floor(srcx);
      const int x0 = static_cast<int>(fx);
      const float ax = srcx - fx;
      const int x0c = std::clamp(x0, 0, flow.width - 1);
      const int x1c = std::clamp(x0 + 1, 0, flow.width - 1);
      const float w00 = (1 - ax) * (1 - ay), w10 = ax * (1 - ay);
      const float w01 = (1 - ax) * ay, w11 = ax * ay;
      const std::size_t i = static_cast<std::size_t>(y) * new_w + x;
      out.u[i] = mag_x * (w00 * flow.u_at(x0c, y0c) + w10 * flow.u_at(x1c, y0c) +
                          w01 * flow.u_at(x0c, y1c) + w11 * flow.u_at(x1c, y1c));
      out.v[i] = mag_y * (w00 * flow.v_at(x0c, y0c) + w10 * flow.v_at(x1c, y0c) +
                          w01 * flow.v_at(x0c, y1c) + w11 * flow.v_at(x1c, y1c));
    }
  });
  return out;
}

}  // namespace

DenseFlow estimate_flow_gf(const Image& img1, const Image& img2, const GFParams& params) {
  params.validate();
  if (img1.width == 0 || img1.height == 0 || img2.width == 0 || img2.height == 0)
    throw DataError("empty image");
  if (img1.width != img2.width || img1.height != img2.height)
    throw DataError("image dimensions differ");

  const Image gray1 = to_grayscale(img1);
  const Image gray2 = to_grayscale(img2);
  const Pyramid pyr1 = build_pyramid(gray1, params.levels, params.pyr_scale);
  const Pyramid pyr2 = build_pyramid(gray2, params.levels, params.pyr_scale);
  const int top = static_cast<int>(pyr1.levels.size()) - 1;

  DenseFlow flow(pyr1.levels[static_cast<std::size_t>(top)].width,
                 pyr1.levels[static_cast<std::size_t>(top)].height);
  for (int l = top; l >= 0; --l) {
    const Image& lvl1 = pyr1.levels[static_cast<std::size_t>(l)];
    const Image& lvl2 = pyr2.levels[static_cast<std::size_t>(l)];
    if (l != top) flow = upsample_flow(flow, lvl1.width, lvl1.height);
    const PolyExpansion exp1 = polynomial_expansion(lvl1, params.poly_n, params.poly_sigma);
    const PolyExpansion exp2 = polynomial_expansion(lvl2, params.poly_n, params.poly_sigma);
    for (int it = 0; it < params.iterations; ++it)
      flow = gf_displacement(exp1, exp2, flow, params.win_size);
  }
  return flow;
}

}  // namespace midframe
