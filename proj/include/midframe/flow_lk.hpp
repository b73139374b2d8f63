#pragma once

#include <vector>

#include "midframe/flow.hpp"
#include "midframe/image.hpp"

namespace midframe {

struct Corner {
  float x = 0.0f;
  float y = 0.0f;
  float score = 0.0f;  // minimum-eigenvalue response
};

struct ShiTomasiParams {
  int max_corners = 100;
  float quality_level = 0.1f;  // fraction of the max response
  float min_distance = 10.0f;  // Euclidean suppression radius
  int block_size = 7;          // structure tensor window

  void validate() const;
};

struct LKParams {
  int win_size = 15;
  int levels = 1;
  int max_iterations = 30;
  float epsilon = 0.03f;            // convergence step norm in pixels
  float min_eig_threshold = 1e-4f;  // per-pixel normalized lambda_min floor

  void validate() const;
};

struct SparseMatch {
  float x = 0.0f;
  float y = 0.0f;
  float u = 0.0f;
  float v = 0.0f;
  bool valid = false;
};

struct SparseFlow {
  std::vector<SparseMatch> matches;
};

// Minimum-eigenvalue response map of the structure tensor, central-difference
// gradients with replicate borders, box sums over block_size.
std::vector<float> min_eig_response(const Image& img, int block_size);

// Shi-Tomasi detection: threshold at quality_level * max response, then
// greedy selection in descending response with min_distance suppression.
std::vector<Corner> detect_corners(const Image& img, const ShiTomasiParams& params);

// Iterative Lucas-Kanade around each point, optionally over a small pyramid.
SparseFlow lk_track(const Image& img1, const Image& img2,
                    const std::vector<Corner>& points, const LKParams& params);

// Inverse-distance weighting of valid matches onto the full grid:
// flow(p) = sum_i w_i d_i / sum_i w_i, w_i = 1 / (|p - p_i|^2 + 1).
DenseFlow densify(const SparseFlow& sparse, int width, int height);

// detect -> track -> densify on grayscale input.
DenseFlow estimate_flow_lk(const Image& img1, const Image& img2,
                           const ShiTomasiParams& st = ShiTomasiParams{},
                           const LKParams& lk = LKParams{});

}  // namespace midframe
