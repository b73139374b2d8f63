#pragma once

#include <optional>

#include "midframe/flow.hpp"
#include "midframe/image.hpp"

namespace midframe {

struct LossBreakdown {
  double l_rec = 0.0;
  double l_cen = 0.0;
  double l_dis = 0.0;
  double lambda = 0.1;
  double total = 0.0;
};

// Mean absolute error over all samples on the [0,1] scale.
double reconstruction_loss(const Image& pred, const Image& gt);

// Ternary census transform on grayscale (7x7 neighborhood, comparison
// threshold 0.04), soft Hamming distance of descriptors averaged over the
// pixels whose full neighborhood is in bounds. Invariant to uniform
// brightness offsets that do not clip.
double census_loss(const Image& pred, const Image& gt);

// Mean endpoint error between a flow field and its label.
double distillation_loss(const DenseFlow& flow, const DenseFlow& label);

// total = l_rec + l_cen + lambda * l_dis; l_dis = 0 when no label is given.
LossBreakdown total_loss(const Image& pred, const Image& gt, const DenseFlow& flow,
                         const DenseFlow* label, double lambda = 0.1);

// d(reconstruction_loss)/d(pred), planar image layout.
Image reconstruction_loss_grad(const Image& pred, const Image& gt);

}  // namespace midframe
