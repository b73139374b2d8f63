#pragma once

#include "midframe/image.hpp"

namespace midframe {

// Peak signal-to-noise ratio on the 0-255 scale: 10*log10(255^2 / MSE).
// Identical images return +infinity.
double psnr(const Image& i, const Image& j);

// Structural similarity: sliding 11x11 Gaussian window (sigma 1.5) on the
// 0-255 scale, standard stabilizers, grayscale conversion for color input.
double ssim(const Image& i, const Image& j);

// Interpolation error: mean |i - j| on the 0-255 scale.
double interpolation_error(const Image& i, const Image& j);

}  // namespace midframe
