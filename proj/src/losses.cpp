#include "midframe/losses.hpp"

#include <cmath>

#include "midframe/parallel.hpp"

namespace midframe {

double reconstruction_loss(const Image& pred, const Image& gt) {
  if (!pred.same_shape(gt)) throw DataError("reconstruction_loss: dimensions differ");
  const double sum = parallel_row_sum(pred.height * pred.channels, [&](int band) {
    const std::size_t off = static_cast<std::size_t>(band) * pred.width;
    double s = 0.0;
    for (int x = 0; x < pred.width; ++x)
      s += std::abs(double(pred.data[off + x]) - double(gt.data[off + x]));
    return s;
  });
  return sum / static_cast<double>(pred.data.size());
}

Image reconstruction_loss_grad(const Image& pred, const Image& gt) {
  if (!pred.same_shape(gt)) throw DataError("reconstruction_loss: dimensions differ");
  Image grad(pred.width, pred.height, pred.channels);
  const float inv_n = 1.0f / static_cast<float>(pred.data.size());
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const float d = pred.data[i] - gt.data[i];
    grad.data[i] = d > 0.0f ? inv_n : (d < 0.0f ? -inv_n : 0.0f);
  }
  return grad;
}

namespace {

constexpr int kCensusRadius = 3;  // 7x7 neighborhood
constexpr float kCensusThreshold = 0.04f;

inline int ternary_code(float neighbor, float center) {
  const float d = neighbor - center;
  if (d > kCensusThreshold) return 1;
  if (d < -kCensusThreshold) return -1;
  return 0;
}

}  // namespace

double census_loss(const Image& pred, const Image& gt) {
  if (!pred.same_shape(gt)) throw DataError("census_loss: dimensions differ");
  const Image a = to_grayscale(pred);
  const Image b = to_grayscale(gt);
  const int w = a.width, h = a.height, r = kCensusRadius;
  if (w < 2 * r + 1 || h < 2 * r + 1) return 0.0;  // no fully valid neighborhood

  const int offsets = (2 * r + 1) * (2 * r + 1) - 1;
  const double sum = parallel_row_sum(h - 2 * r, [&](int yy) {
    const int y = yy + r;
    double s = 0.0;
    for (int x = r; x < w - r; ++x) {
      const float ca = a.at(x, y);
      const float cb = b.at(x, y);
      double dist = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int ta = ternary_code(a.at(x + dx, y + dy), ca);
          const int tb = ternary_code(b.at(x + dx, y + dy), cb);
          dist += 0.5 * std::abs(ta - tb);
        }
      }
      s += dist / offsets;
    }
    return s;
  });
  const double valid = static_cast<double>(w - 2 * r) * (h - 2 * r);
  return sum / valid;
}

double distillation_loss(const DenseFlow& flow, const DenseFlow& label) {
  if (!flow.same_shape(label)) throw DataError("distillation_loss: dimensions differ");
  const double sum = parallel_row_sum(flow.height, [&](int y) {
    const std::size_t row = static_cast<std::size_t>(y) * flow.width;
    double s = 0.0;
    for (int x = 0; x < flow.width; ++x) {
      const double du = double(flow.u[row + x]) - double(label.u[row + x]);
      const double dv = double(flow.v[row + x]) - double(label.v[row + x]);
      s += std::sqrt(du * du + dv * dv);
    }
    return s;
  });
  return sum / static_cast<double>(flow.size());
}

LossBreakdown total_loss(const Image& pred, const Image& gt, const DenseFlow& flow,
                         const DenseFlow* label, double lambda) {
  LossBreakdown out;
  out.lambda = lambda;
  out.l_rec = reconstruction_loss(pred, gt);
  out.l_cen = census_loss(pred, gt);
  out.l_dis = label ? distillation_loss(flow, *label) : 0.0;
  out.total = out.l_rec + out.l_cen + lambda * out.l_dis;
  return out;
}

}  // namespace midframe
