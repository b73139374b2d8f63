#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "midframe/flo_io.hpp"
#include "midframe/image_io.hpp"
#include "midframe/metrics.hpp"
#include "midframe/pipeline.hpp"
#include "midframe/warp.hpp"
#include "reference/reference.hpp"
#include "test_util.hpp"

using namespace midframe;

TEST_CASE("intermediate_flows: constant bidirectional pair") {
  DenseFlow f01(8, 8, 4.0f, 0.0f);
  DenseFlow f10(8, 8, -4.0f, 0.0f);
  DenseFlow t0, t1;
  intermediate_flows(f01, f10, Timestep(0.5f), t0, t1);
  for (std::size_t i = 0; i < t0.size(); ++i) {
    CHECK(t0.u[i] == doctest::Approx(-2.0));
    CHECK(t0.v[i] == doctest::Approx(0.0));
    CHECK(t1.u[i] == doctest::Approx(2.0));
    CHECK(t1.v[i] == doctest::Approx(0.0));
  }
}

TEST_CASE("intermediate_flows: zero flow stays zero") {
  DenseFlow z(6, 4);
  DenseFlow t0, t1;
  intermediate_flows(z, z, Timestep(0.3f), t0, t1);
  for (std::size_t i = 0; i < t0.size(); ++i) {
    CHECK(t0.u[i] == 0.0f);
    CHECK(t1.u[i] == 0.0f);
  }
}

TEST_CASE("intermediate_flows: t near 0 sends flow_t0 to zero") {
  DenseFlow f01(4, 4, 8.0f, -4.0f);
  DenseFlow f10(4, 4, -8.0f, 4.0f);
  DenseFlow t0, t1;
  intermediate_flows(f01, f10, Timestep(0.001f), t0, t1);
  for (std::size_t i = 0; i < t0.size(); ++i) {
    CHECK(std::abs(t0.u[i]) < 0.01f);
    CHECK(std::abs(t0.v[i]) < 0.01f);
  }
}

TEST_CASE("backward_warp: zero flow is the identity, bit-exact") {
  const Image img = testutil::random_image(24, 18, 3, 4);
  const DenseFlow zero(24, 18);
  const Image out = backward_warp(img, zero);
  for (std::size_t i = 0; i < img.data.size(); ++i) CHECK(out.data[i] == img.data[i]);
}

TEST_CASE("backward_warp: integer constant flow shifts the interior exactly") {
  const Image img = testutil::random_image(32, 24, 1, 5);
  const DenseFlow flow(32, 24, 5.0f, 0.0f);
  const Image out = backward_warp(img, flow);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 27; ++x) CHECK(out.at(x, y) == img.at(x + 5, y));
}

TEST_CASE("backward_warp: half-pixel flow on a ramp") {
  Image ramp(32, 8, 1);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 32; ++x) ramp.at(x, y) = 0.02f * x;
  const DenseFlow flow(32, 8, 0.5f, 0.0f);
  const Image out = backward_warp(ramp, flow);
  for (int y = 0; y < 8; ++y)
    for (int x = 1; x < 30; ++x)
      CHECK(out.at(x, y) == doctest::Approx(0.02 * (x + 0.5)).epsilon(1e-5));
}

TEST_CASE("backward_warp agrees with the per-pixel reference") {
  const Image img = testutil::random_image(20, 16, 3, 6);
  DenseFlow flow(20, 16);
  testutil::Rng rng(17);
  for (std::size_t i = 0; i < flow.size(); ++i) {
    flow.u[i] = rng.uniform(-3.0f, 3.0f);
    flow.v[i] = rng.uniform(-3.0f, 3.0f);
  }
  const Image fast = backward_warp(img, flow);
  const Image slow = reference::backward_warp(img, flow);
  CHECK(testutil::max_abs_diff(fast, slow) < 1e-6);
}

TEST_CASE("fuse_blend") {
  SUBCASE("identical warped frames pass through") {
    const Image img = testutil::random_image(16, 16, 3, 7);
    WarpPair pair;
    pair.warped0 = img;
    pair.warped1 = img;
    const Image out = fuse_blend(pair, Timestep(0.37f));
    CHECK(testutil::max_abs_diff(out, img) < 1e-6);
  }
  SUBCASE("midpoint arithmetic") {
    WarpPair pair;
    pair.warped0 = Image(4, 4, 1, 0.2f);
    pair.warped1 = Image(4, 4, 1, 0.6f);
    const Image out = fuse_blend(pair, Timestep(0.5f));
    for (float v : out.data) CHECK(v == doctest::Approx(0.4));
  }
  SUBCASE("symmetry under swap + time reversal") {
    WarpPair pair;
    pair.warped0 = testutil::random_image(12, 10, 3, 8);
    pair.warped1 = testutil::random_image(12, 10, 3, 9);
    const Image a = fuse_blend(pair, Timestep(0.3f));
    std::swap(pair.warped0, pair.warped1);
    const Image b = fuse_blend(pair, Timestep(0.7f));
    CHECK(testutil::max_abs_diff(a, b) == 0.0);
  }
}

TEST_CASE("static scene end-to-end identity (blend)") {
  const Image img = testutil::smooth_noise(64, 48, 11);
  PipelineOptions opts;
  const Image out = interpolate(img, img, Timestep(0.5f), opts);
  CHECK(testutil::mean_abs_diff(out, img) < 1.0 / 255.0);
}

TEST_CASE("uniform translation: object lands at the midpoint") {
  // bright textured blob on dark background, moved by (6, 4)
  const int w = 128, h = 96;
  auto blob_frame = [&](float cx, float cy) {
    Image img(w, h, 1, 0.05f);
    testutil::Rng rng(5);
    Image tex = testutil::smooth_noise(w, h, 123, 1.5f);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        const double env = std::exp(-r2 / (2.0 * 12.0 * 12.0));
        img.at(x, y) += static_cast<float>(env * (0.35 + 0.6 * tex.at(x, y)));
      }
    return img;
  };
  const Image frame0 = blob_frame(50.0f, 40.0f);
  const Image frame1 = blob_frame(56.0f, 44.0f);
  PipelineOptions opts;  // GF flow, blend fusion
  const Image out = interpolate(frame0, frame1, Timestep(0.5f), opts);

  auto centroid = [&](const Image& img, double& cx, double& cy) {
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double v = std::max(0.0, double(img.at(x, y)) - 0.1);
        sw += v;
        sx += v * x;
        sy += v * y;
      }
    cx = sx / sw;
    cy = sy / sw;
  };
  double cx0, cy0, cx1, cy1, cxm, cym;
  centroid(frame0, cx0, cy0);
  centroid(frame1, cx1, cy1);
  centroid(out, cxm, cym);
  CHECK(std::abs(cxm - 0.5 * (cx0 + cx1)) < 1.0);
  CHECK(std::abs(cym - 0.5 * (cy0 + cy1)) < 1.0);
}

TEST_CASE("pipeline with flow files matches in-memory flows") {
  testutil::TempDir tmp("warp");
  const Image img1 = testutil::smooth_noise(64, 48, 21, 2.0f);
  const Image img2 = testutil::shift_image(img1, 2.0f, 1.0f);

  PipelineOptions gf_opts;
  const auto [f01, f10] = estimate_bidirectional(img1, img2, gf_opts);
  write_flo(f01, tmp.str("f01.flo"));
  write_flo(f10, tmp.str("f10.flo"));
  const DenseFlow r01 = read_flo(tmp.str("f01.flo"));
  const DenseFlow r10 = read_flo(tmp.str("f10.flo"));

  PipelineOptions file_opts;
  file_opts.flow_method = FlowMethod::File;
  file_opts.flow01 = &r01;
  file_opts.flow10 = &r10;
  const Image via_file = interpolate(img1, img2, Timestep(0.5f), file_opts);
  const Image direct = interpolate(img1, img2, Timestep(0.5f), gf_opts);
  CHECK(testutil::max_abs_diff(via_file, direct) == 0.0);
}

TEST_CASE("flow file dimension mismatch rejected") {
  const Image img = testutil::smooth_noise(32, 32, 2);
  DenseFlow bad(16, 16);
  PipelineOptions opts;
  opts.flow_method = FlowMethod::File;
  opts.flow01 = &bad;
  opts.flow10 = &bad;
  CHECK_THROWS_AS(interpolate(img, img, Timestep(0.5f), opts), DataError);
}

TEST_CASE("golden regression: GF + blend on a deterministic scene") {
  // frozen output of the full-resolution pipeline on a synthetic pair;
  // guards against silent numeric drift in flow, warping or fusion
  const Image frame0 = testutil::smooth_noise(160, 120, 2024, 2.0f);
  const Image frame1 = testutil::shift_image(frame0, 3.0f, -2.0f);
  PipelineOptions opts;
  const Image out = interpolate(frame0, frame1, Timestep(0.5f), opts);

  const char* golden_path = MIDFRAME_GOLDEN_DIR "/gf_blend_golden.png";
  if (std::getenv("MIDFRAME_UPDATE_GOLDEN")) {
    save_image(out, golden_path);
    MESSAGE("golden image regenerated");
  }
  const Image golden = load_image(golden_path);
  REQUIRE(golden.width == out.width);
  REQUIRE(golden.height == out.height);
  CHECK(psnr(out, golden) > 55.0);

  // plausibility against the true middle frame
  const Image gt = testutil::shift_image(frame0, 1.5f, -1.0f);
  CHECK(psnr(out, gt) > 28.0);
}
