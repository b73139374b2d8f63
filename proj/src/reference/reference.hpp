#pragma once

// Plain serial implementations kept as oracles for the parallel kernels.
// Everything here favors obviousness over speed: dense double loops, no
// sliding windows, no OpenMP. Tests compare the production kernels against
// these; the kernel benchmark measures the gap.

#include <vector>

#include "midframe/flow.hpp"
#include "midframe/image.hpp"

namespace midframe::reference {

// Dense 2-D correlation with an explicit (2ry+1) x (2rx+1) kernel,
// kernel(j, i) indexed top-to-bottom / left-to-right.
Image convolve_dense(const Image& img, const std::vector<float>& kernel2d, int kw,
                     int kh, BorderPolicy policy);

// Direct per-pixel windowed sum, truncated at the borders.
std::vector<float> box_sum(const std::vector<float>& src, int w, int h, int radius);

// Per-pixel double-loop structure tensor minimum eigenvalue.
std::vector<float> min_eig_response(const Image& img, int block_size);

// Straight IDW loop over matches.
DenseFlow densify(const std::vector<float>& mx, const std::vector<float>& my,
                  const std::vector<float>& mu, const std::vector<float>& mv, int w,
                  int h);

// Per-pixel bilinear gather.
Image backward_warp(const Image& img, const DenseFlow& flow);

// Metric oracles, direct formula transcriptions.
double psnr(const Image& i, const Image& j);
double ssim(const Image& i, const Image& j);
double interpolation_error(const Image& i, const Image& j);

// Quadruple-loop NCHW cross-correlation used to check the NN conv kernel.
void conv2d_naive(const float* input, int n, int c_in, int h, int w, const float* weight,
                  int c_out, int kh, int kw, const float* bias, int stride, int pad,
                  float* output, int oh, int ow);

}  // namespace midframe::reference
