#include "reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace midframe::reference {

Image convolve_dense(const Image& img, const std::vector<float>& kernel2d, int kw,
                     int kh, BorderPolicy policy) {
  const int rx = kw / 2, ry = kh / 2;
  Image out(img.width, img.height, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        float acc = 0.0f;
        for (int j = -ry; j <= ry; ++j) {
          for (int i = -rx; i <= rx; ++i) {
            acc += kernel2d[static_cast<std::size_t>(j + ry) * kw + (i + rx)] *
                   fetch(img, x + i, y + j, c, policy);
          }
        }
        out.at(x, y, c) = acc;
      }
    }
  }
  return out;
}

std::vector<float> box_sum(const std::vector<float>& src, int w, int h, int radius) {
  std::vector<float> out(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int j = std::max(0, y - radius); j <= std::min(h - 1, y + radius); ++j)
        for (int i = std::max(0, x - radius); i <= std::min(w - 1, x + radius); ++i)
          acc += src[static_cast<std::size_t>(j) * w + i];
      out[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc);
    }
  }
  return out;
}

std::vector<float> min_eig_response(const Image& img, int block_size) {
  const int w = img.width, h = img.height, r = block_size / 2;
  const float* src = img.plane(0);
  auto grad_x = [&](int x, int y) {
    const int xm = std::max(0, x - 1), xp = std::min(w - 1, x + 1);
    return 0.5f * (src[static_cast<std::size_t>(y) * w + xp] -
                   src[static_cast<std::size_t>(y) * w + xm]);
  };
  auto grad_y = [&](int x, int y) {
    const int ym = std::max(0, y - 1), yp = std::min(h - 1, y + 1);
    return 0.5f * (src[static_cast<std::size_t>(yp) * w + x] -
                   src[static_cast<std::size_t>(ym) * w + x]);
  };
  std::vector<float> out(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double p = 0.0, q = 0.0, rr = 0.0;
      for (int j = std::max(0, y - r); j <= std::min(h - 1, y + r); ++j) {
        for (int i = std::max(0, x - r); i <= std::min(w - 1, x + r); ++i) {
          const double gx = grad_x(i, j), gy = grad_y(i, j);
          p += gx * gx;
          q += gy * gy;
          rr += gx * gy;
        }
      }
      const double hs = 0.5 * (p + q), hd = 0.5 * (p - q);
      out[static_cast<std::size_t>(y) * w + x] =
          static_cast<float>(hs - std::sqrt(hd * hd + rr * rr));
    }
  }
  return out;
}

DenseFlow densify(const std::vector<float>& mx, const std::vector<float>& my,
                  const std::vector<float>& mu, const std::vector<float>& mv, int w,
                  int h) {
  DenseFlow flow(w, h);
  if (mx.empty()) return flow;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float su = 0.0f, sv = 0.0f, sw = 0.0f;
      for (std::size_t i = 0; i < mx.size(); ++i) {
        const float dx = x - mx[i], dy = y - my[i];
        const float ww = 1.0f / (dx * dx + dy * dy + 1.0f);
        su += ww * mu[i];
        sv += ww * mv[i];
        sw += ww;
      }
      flow.u_at(x, y) = su / sw;
      flow.v_at(x, y) = sv / sw;
    }
  }
  return flow;
}

Image backward_warp(const Image& img, const DenseFlow& flow) {
  Image out(img.width, img.height, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        float v[3];
        sample_bilinear(img, x + flow.u_at(x, y), y + flow.v_at(x, y),
                        BorderPolicy::Replicate, v);
        out.at(x, y, c) = v[c];
      }
    }
  }
  return out;
}

double psnr(const Image& i, const Image& j) {
  double mse = 0.0;
  for (std::size_t k = 0; k < i.data.size(); ++k) {
    const double d = 255.0 * (double(i.data[k]) - double(j.data[k]));
    mse += d * d;
  }
  mse /= static_cast<double>(i.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim(const Image& i_in, const Image& j_in) {
  const Image gi = to_grayscale(i_in);
  const Image gj = to_grayscale(j_in);
  const int w = gi.width, h = gi.height;
  const int win = 11, r = win / 2;
  const double sigma = 1.5;
  double taps[11];
  double wsum = 0.0;
  for (int k = -r; k <= r; ++k) {
    taps[k + r] = std::exp(-0.5 * k * k / (sigma * sigma));
    wsum += taps[k + r];
  }
  for (double& t : taps) t /= wsum;

  const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  double total = 0.0;
  int count = 0;
  for (int y = r; y < h - r; ++y) {
    for (int x = r; x < w - r; ++x) {
      double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const double wgt = taps[dy + r] * taps[dx + r];
          const double a = 255.0 * gi.at(x + dx, y + dy);
          const double b = 255.0 * gj.at(x + dx, y + dy);
          mx += wgt * a;
          my += wgt * b;
          sxx += wgt * a * a;
          syy += wgt * b * b;
          sxy += wgt * a * b;
        }
      }
      const double var_x = sxx - mx * mx;
      const double var_y = syy - my * my;
      const double cov = sxy - mx * my;
      total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
               ((mx * mx + my * my + c1) * (var_x + var_y + c2));
      ++count;
    }
  }
  return total / count;
}

double interpolation_error(const Image& i, const Image& j) {
  double sum = 0.0;
  for (std::size_t k = 0; k < i.data.size(); ++k)
    sum += std::abs(255.0 * (double(i.data[k]) - double(j.data[k])));
  return sum / static_cast<double>(i.data.size());
}

void conv2d_naive(const float* input, int n, int c_in, int h, int w, const float* weight,
                  int c_out, int kh, int kw, const float* bias, int stride, int pad,
                  float* output, int oh, int ow) {
  for (int b = 0; b < n; ++b) {
    for (int oc = 0; oc < c_out; ++oc) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          double acc = bias ? bias[oc] : 0.0;
          for (int ic = 0; ic < c_in; ++ic) {
            for (int j = 0; j < kh; ++j) {
              for (int i = 0; i < kw; ++i) {
                const int iy = y * stride + j - pad;
                const int ix = x * stride + i - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                acc += double(input[((static_cast<std::size_t>(b) * c_in + ic) * h + iy) * w + ix]) *
                       double(weight[((static_cast<std::size_t>(oc) * c_in + ic) * kh + j) * kw + i]);
              }
            }
          }
          output[((static_cast<std::size_t>(b) * c_out + oc) * oh + y) * ow + x] =
              static_cast<float>(acc);
        }
      }
    }
  }
}

}  // namespace midframe::reference
