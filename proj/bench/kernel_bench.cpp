// Kernel benchmark: OpenMP-parallel production kernels against the plain
// serial reference implementations, plus end-to-end flow estimator timings.
// Run with --benchmark_filter=... to narrow.

#include <benchmark/benchmark.h>

#include "midframe/flow_gf.hpp"
#include "midframe/flow_lk.hpp"
#include "midframe/image.hpp"
#include "midframe/metrics.hpp"
#include "midframe/nn.hpp"
#include "midframe/pipeline.hpp"
#include "midframe/rng.hpp"
#include "midframe/warp.hpp"
#include "reference/reference.hpp"

using namespace midframe;

namespace {

Image make_noise(int w, int h, int channels = 1) {
  Rng rng(99);
  Image img(w, h, channels);
  for (float& v : img.data) v = rng.uniform();
  return img;
}

DenseFlow make_flow(int w, int h) {
  Rng rng(7);
  DenseFlow f(w, h);
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.u[i] = rng.uniform(-4.0f, 4.0f);
    f.v[i] = rng.uniform(-4.0f, 4.0f);
  }
  return f;
}

const std::vector<float> kGauss5 = gaussian_kernel(0.8f);

}  // namespace

static void BM_convolve_separable(benchmark::State& state) {
  const Image img = make_noise(448, 256);
  for (auto _ : state) {
    Image out = convolve_separable(img, kGauss5, kGauss5, BorderPolicy::Replicate);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_convolve_separable);

static void BM_convolve_reference(benchmark::State& state) {
  const Image img = make_noise(448, 256);
  const int klen = static_cast<int>(kGauss5.size());
  std::vector<float> k2d(static_cast<std::size_t>(klen) * klen);
  for (int j = 0; j < klen; ++j)
    for (int i = 0; i < klen; ++i)
      k2d[static_cast<std::size_t>(j) * klen + i] = kGauss5[j] * kGauss5[i];
  for (auto _ : state) {
    Image out = reference::convolve_dense(img, k2d, klen, klen, BorderPolicy::Replicate);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_convolve_reference);

static void BM_min_eig_map(benchmark::State& state) {
  const Image img = make_noise(448, 256);
  for (auto _ : state) {
    auto out = min_eig_response(img, 7);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_min_eig_map);

static void BM_min_eig_reference(benchmark::State& state) {
  const Image img = make_noise(448, 256);
  for (auto _ : state) {
    auto out = reference::min_eig_response(img, 7);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_min_eig_reference);

static void BM_densify(benchmark::State& state) {
  Rng rng(3);
  SparseFlow sf;
  for (int i = 0; i < 100; ++i)
    sf.matches.push_back({rng.uniform(0, 447), rng.uniform(0, 255),
                          rng.uniform(-5, 5), rng.uniform(-5, 5), true});
  for (auto _ : state) {
    DenseFlow out = densify(sf, 448, 256);
    benchmark::DoNotOptimize(out.u.data());
  }
}
BENCHMARK(BM_densify);

static void BM_densify_reference(benchmark::State& state) {
  Rng rng(3);
  std::vector<float> mx, my, mu, mv;
  for (int i = 0; i < 100; ++i) {
    mx.push_back(rng.uniform(0, 447));
    my.push_back(rng.uniform(0, 255));
    mu.push_back(rng.uniform(-5, 5));
    mv.push_back(rng.uniform(-5, 5));
  }
  for (auto _ : state) {
    DenseFlow out = reference::densify(mx, my, mu, mv, 448, 256);
    benchmark::DoNotOptimize(out.u.data());
  }
}
BENCHMARK(BM_densify_reference);

static void BM_backward_warp(benchmark::State& state) {
  const Image img = make_noise(448, 256, 3);
  const DenseFlow flow = make_flow(448, 256);
  for (auto _ : state) {
    Image out = backward_warp(img, flow);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_backward_warp);

static void BM_backward_warp_reference(benchmark::State& state) {
  const Image img = make_noise(448, 256, 3);
  const DenseFlow flow = make_flow(448, 256);
  for (auto _ : state) {
    Image out = reference::backward_warp(img, flow);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_backward_warp_reference);

static void BM_ssim(benchmark::State& state) {
  const Image a = make_noise(448, 256);
  const Image b = make_noise(448, 256);
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_ssim);

static void BM_ssim_reference(benchmark::State& state) {
  const Image a = make_noise(448, 256);
  const Image b = make_noise(448, 256);
  for (auto _ : state) benchmark::DoNotOptimize(reference::ssim(a, b));
}
BENCHMARK(BM_ssim_reference);

static void BM_conv2d(benchmark::State& state) {
  Rng rng(5);
  Tensor4 x(1, 16, 64, 64), w(16, 16, 3, 3), b(1, 16, 1, 1);
  for (auto& v : x.data) v = rng.uniform(-1, 1);
  for (auto& v : w.data) v = rng.uniform(-1, 1);
  for (auto _ : state) {
    Tensor4 out = conv2d_forward(x, w, b, 1, 1);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_conv2d);

static void BM_conv2d_reference(benchmark::State& state) {
  Rng rng(5);
  Tensor4 x(1, 16, 64, 64), w(16, 16, 3, 3), b(1, 16, 1, 1);
  for (auto& v : x.data) v = rng.uniform(-1, 1);
  for (auto& v : w.data) v = rng.uniform(-1, 1);
  Tensor4 out(1, 16, 64, 64);
  for (auto _ : state) {
    reference::conv2d_naive(x.data.data(), 1, 16, 64, 64, w.data.data(), 16, 3, 3,
                            b.data.data(), 1, 1, out.data.data(), 64, 64);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_conv2d_reference);

static void BM_flow_gf_448x256(benchmark::State& state) {
  const Image a = make_noise(448, 256);
  const Image b = make_noise(448, 256);
  for (auto _ : state) {
    DenseFlow f = estimate_flow_gf(a, b, GFParams{});
    benchmark::DoNotOptimize(f.u.data());
  }
}
BENCHMARK(BM_flow_gf_448x256);

static void BM_flow_lk_448x256(benchmark::State& state) {
  const Image a = make_noise(448, 256);
  const Image b = make_noise(448, 256);
  for (auto _ : state) {
    DenseFlow f = estimate_flow_lk(a, b);
    benchmark::DoNotOptimize(f.u.data());
  }
}
BENCHMARK(BM_flow_lk_448x256);

BENCHMARK_MAIN();
