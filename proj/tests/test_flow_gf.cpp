#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "midframe/flow_gf.hpp"
#include "test_util.hpp"

using namespace midframe;

TEST_CASE("polynomial_expansion: constant image") {
  Image img(32, 24, 1, 0.7f);
  const PolyExpansion exp = polynomial_expansion(img, 5, 1.1f);
  for (int y = 4; y < 20; ++y) {
    for (int x = 4; x < 28; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * 32 + x;
      CHECK(std::abs(exp.c[i] - 0.7f) < 1e-5);
      CHECK(std::abs(exp.b1[i]) < 1e-5);
      CHECK(std::abs(exp.b2[i]) < 1e-5);
      CHECK(std::abs(exp.a11[i]) < 1e-5);
      CHECK(std::abs(exp.a12[i]) < 1e-5);
      CHECK(std::abs(exp.a22[i]) < 1e-5);
    }
  }
}

TEST_CASE("polynomial_expansion: linear ramp") {
  Image img(32, 24, 1);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 32; ++x) img.at(x, y) = 0.01f * x;
  const PolyExpansion exp = polynomial_expansion(img, 5, 1.1f);
  for (int y = 4; y < 20; ++y) {
    for (int x = 4; x < 28; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * 32 + x;
      CHECK(std::abs(exp.b1[i] - 0.01f) < 1e-4);
      CHECK(std::abs(exp.b2[i]) < 1e-4);
      CHECK(std::abs(exp.a11[i]) < 1e-4);
      CHECK(std::abs(exp.a22[i]) < 1e-4);
    }
  }
}

TEST_CASE("polynomial_expansion: quadratic field") {
  Image img(32, 24, 1);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 32; ++x) img.at(x, y) = 0.001f * x * x;
  const PolyExpansion exp = polynomial_expansion(img, 5, 1.1f);
  for (int y = 4; y < 20; ++y)
    for (int x = 4; x < 28; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * 32 + x;
      CHECK(std::abs(exp.a11[i] - 0.001f) < 1e-4);
    }
}

TEST_CASE("polynomial_expansion: recovers a full global quadratic interior") {
  const double a11 = 4e-4, a12 = 1.5e-4, a22 = -2e-4, b1 = 0.004, b2 = -0.002, c0 = 0.3;
  Image img(40, 34, 1);
  for (int y = 0; y < 34; ++y)
    for (int x = 0; x < 40; ++x)
      img.at(x, y) = static_cast<float>(c0 + b1 * x + b2 * y + a11 * x * x +
                                        2.0 * a12 * x * y + a22 * y * y);
  const PolyExpansion exp = polynomial_expansion(img, 7, 1.5f);
  for (int y = 6; y < 28; ++y)
    for (int x = 6; x < 34; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * 40 + x;
      CHECK(std::abs(exp.a11[i] - a11) < 1e-3);
      CHECK(std::abs(exp.a12[i] - a12) < 1e-3);
      CHECK(std::abs(exp.a22[i] - a22) < 1e-3);
    }
}

TEST_CASE("polynomial_expansion rejects multi-channel input") {
  const Image img = testutil::random_image(8, 8, 3, 1);
  CHECK_THROWS_AS(polynomial_expansion(img, 5, 1.1f), DataError);
}

TEST_CASE("gf_displacement: identical expansions give zero flow") {
  const Image img = testutil::smooth_noise(48, 40, 9);
  const PolyExpansion exp = polynomial_expansion(img, 5, 1.1f);
  const DenseFlow prior(48, 40);
  const DenseFlow flow = gf_displacement(exp, exp, prior, 15);
  for (std::size_t i = 0; i < flow.size(); ++i) {
    CHECK(std::abs(flow.u[i]) < 1e-4);
    CHECK(std::abs(flow.v[i]) < 1e-4);
  }
}

TEST_CASE("gf_displacement: single-step recovery of a 2px shift") {
  const Image img1 = testutil::smooth_noise(96, 72, 42, 2.0f);
  const Image img2 = testutil::shift_image(img1, 2.0f, 0.0f);
  const PolyExpansion exp1 = polynomial_expansion(img1, 5, 1.1f);
  const PolyExpansion exp2 = polynomial_expansion(img2, 5, 1.1f);
  const DenseFlow prior(96, 72);
  const DenseFlow flow = gf_displacement(exp1, exp2, prior, 15);
  double su = 0.0, sv = 0.0;
  std::size_t n = 0;
  for (int y = 10; y < 62; ++y)
    for (int x = 10; x < 86; ++x) {
      su += flow.u_at(x, y);
      sv += flow.v_at(x, y);
      ++n;
    }
  su /= double(n);
  sv /= double(n);
  CHECK(std::abs(su - 2.0) < 0.3);
  CHECK(std::abs(sv - 0.0) < 0.3);
}

TEST_CASE("gf_displacement: textureless regions fall back to the prior") {
  Image img(48, 40, 1, 0.5f);
  const PolyExpansion exp = polynomial_expansion(img, 5, 1.1f);
  DenseFlow prior(48, 40, 1.25f, -0.75f);
  const DenseFlow flow = gf_displacement(exp, exp, prior, 15);
  for (std::size_t i = 0; i < flow.size(); ++i) {
    CHECK(flow.u[i] == 1.25f);
    CHECK(flow.v[i] == -0.75f);
  }
}

TEST_CASE("estimate_flow_gf: identical frames give near-zero flow") {
  const Image img = testutil::smooth_noise(96, 64, 5);
  const DenseFlow flow = estimate_flow_gf(img, img, GFParams{});
  double max_mag = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < flow.size(); ++i) {
    max_mag = std::max({max_mag, std::abs(double(flow.u[i])), std::abs(double(flow.v[i]))});
    sum += std::hypot(double(flow.u[i]), double(flow.v[i]));
  }
  CHECK(max_mag < 0.1);
  CHECK(sum / double(flow.size()) < 0.05);  // zero-motion mean EPE
}

TEST_CASE("estimate_flow_gf: 448x256 translation recovered") {
  const Image img1 = testutil::smooth_noise(448, 256, 77, 2.0f);
  const Image img2 = testutil::shift_image(img1, 5.0f, -3.0f);
  const DenseFlow flow = estimate_flow_gf(img1, img2, GFParams{});
  CHECK(testutil::mean_interior_epe(flow, 5.0f, -3.0f) < 0.25);
}

TEST_CASE("estimate_flow_gf: sub-pixel translation recovered") {
  const Image img1 = testutil::smooth_noise(128, 96, 31, 2.0f);
  const Image img2 = testutil::shift_image(img1, 0.5f, 0.0f);
  const DenseFlow flow = estimate_flow_gf(img1, img2, GFParams{});
  CHECK(testutil::mean_interior_epe(flow, 0.5f, 0.0f) < 0.2);
}

TEST_CASE("estimate_flow_gf: discrete shift equivariance") {
  const int sx = 3, sy = 2;
  const Image img1 = testutil::smooth_noise(128, 96, 13, 2.0f);
  const Image img2 = testutil::shift_image(img1, 1.5f, -1.0f);
  const Image img1s = testutil::shift_image(img1, float(sx), float(sy));
  const Image img2s = testutil::shift_image(img2, float(sx), float(sy));
  const DenseFlow f = estimate_flow_gf(img1, img2, GFParams{});
  const DenseFlow fs = estimate_flow_gf(img1s, img2s, GFParams{});
  double worst = 0.0;
  for (int y = 24; y < 72; ++y)
    for (int x = 24; x < 104; ++x) {
      const double du = fs.u_at(x + sx, y + sy) - f.u_at(x, y);
      const double dv = fs.v_at(x + sx, y + sy) - f.v_at(x, y);
      worst = std::max(worst, std::hypot(du, dv));
    }
  CHECK(worst < 0.1);
}

TEST_CASE("estimate_flow_gf: defaults match the documented parameter set") {
  const GFParams p;
  CHECK(p.pyr_scale == 0.2f);
  CHECK(p.levels == 3);
  CHECK(p.poly_n == 5);
  CHECK(p.win_size == 15);
  CHECK(p.iterations == 3);
  CHECK(p.poly_sigma == 1.1f);
}

TEST_CASE("estimate_flow_gf: constant frames produce finite flow") {
  Image img(64, 48, 1, 0.33f);
  const DenseFlow flow = estimate_flow_gf(img, img, GFParams{});
  for (std::size_t i = 0; i < flow.size(); ++i) {
    CHECK(std::isfinite(flow.u[i]));
    CHECK(std::isfinite(flow.v[i]));
  }
}

TEST_CASE("estimate_flow_gf: dimension mismatch and empty input rejected") {
  const Image a = testutil::random_image(32, 32, 1, 1);
  const Image b = testutil::random_image(16, 32, 1, 2);
  CHECK_THROWS_AS(estimate_flow_gf(a, b, GFParams{}), DataError);
  CHECK_THROWS_AS(estimate_flow_gf(Image{}, Image{}, GFParams{}), DataError);
}

TEST_CASE("GFParams validation") {
  GFParams p;
  p.pyr_scale = 1.5f;
  CHECK_THROWS_AS(p.validate(), DataError);
  p = GFParams{};
  p.poly_n = 4;
  CHECK_THROWS_AS(p.validate(), DataError);
  p = GFParams{};
  p.win_size = 2;
  CHECK_THROWS_AS(p.validate(), DataError);
}
