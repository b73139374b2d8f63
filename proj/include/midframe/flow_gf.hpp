#pragma once

#include <vector>

#include "midframe/flow.hpp"
#include "midframe/image.hpp"

namespace midframe {

struct GFParams {
  float pyr_scale = 0.2f;   // shrink factor between pyramid levels
  int levels = 3;           // pyramid depth
  int poly_n = 5;           // polynomial expansion neighborhood (odd)
  int win_size = 15;        // box window for the displacement normal equations
  int iterations = 3;       // refinement rounds per level
  float poly_sigma = 1.1f;  // Gaussian applicability sigma

  void validate() const;
};

// Per-pixel coefficients of the local quadratic model
// f(x) ~ x^T A x + b^T x + c with symmetric A.
struct PolyExpansion {
  int width = 0;
  int height = 0;
  std::vector<float> a11, a12, a22;  // A planes
  std::vector<float> b1, b2;         // b planes
  std::vector<float> c;              // constant plane

  PolyExpansion() = default;
  PolyExpansion(int w, int h);
  std::size_t size() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
};

// Weighted least-squares fit of {1, x, y, x^2, y^2, xy} over each
// poly_n x poly_n neighborhood with Gaussian applicability weights,
// realized as separable correlations with replicate borders.
PolyExpansion polynomial_expansion(const Image& img, int poly_n, float poly_sigma);

// One Farneback displacement solve. Reads expansion 2 at the prior-displaced
// (rounded, clamped) position, forms the translation constraints and solves
// windowed normal equations with uniform weights. Pixels whose accumulated
// normal matrix is near singular (det < 1e-9) fall back to the prior.
DenseFlow gf_displacement(const PolyExpansion& exp1, const PolyExpansion& exp2,
                          const DenseFlow& prior, int win_size);

// Coarse-to-fine dense flow. Images are converted to grayscale internally.
DenseFlow estimate_flow_gf(const Image& img1, const Image& img2,
                           const GFParams& params = GFParams{});

}  // namespace midframe
