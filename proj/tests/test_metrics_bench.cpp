#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "midframe/bench_harness.hpp"
#include "midframe/dataset.hpp"
#include "midframe/flo_io.hpp"
#include "midframe/flow_color.hpp"
#include "midframe/image_io.hpp"
#include "midframe/metrics.hpp"
#include "reference/reference.hpp"
#include "test_util.hpp"

using namespace midframe;

TEST_CASE("psnr") {
  const Image a = testutil::random_image(8, 8, 1, 1);
  CHECK(std::isinf(psnr(a, a)));
  CHECK(psnr(a, a) > 0);

  Image black(4, 4, 1, 0.0f), white(4, 4, 1, 1.0f);
  CHECK(psnr(black, white) == doctest::Approx(0.0).epsilon(1e-12));

  // MSE of exactly 1 on the 255 scale
  Image base(16, 16, 1, 0.5f);
  Image off = base;
  for (float& v : off.data) v += 1.0f / 255.0f;
  CHECK(psnr(off, base) == doctest::Approx(10.0 * std::log10(65025.0)).epsilon(1e-6));
  CHECK(psnr(off, base) == doctest::Approx(48.1308).epsilon(1e-4));
}

TEST_CASE("ssim") {
  const Image a = testutil::random_image(16, 16, 1, 2);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

  const Image b = testutil::random_image(16, 16, 1, 3);
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-9));

  SUBCASE("constant vs noisy constant sits in (0.5, 1)") {
    Image base(32, 32, 1, 0.5f);
    Image noisy = base;
    testutil::Rng rng(4);
    for (float& v : noisy.data) v += 0.01f * rng.normal();
    const double s = ssim(base, noisy);
    CHECK(s > 0.5);
    CHECK(s < 1.0);
    CHECK(s == doctest::Approx(reference::ssim(base, noisy)).epsilon(1e-6));
  }

  SUBCASE("window smaller than image rejected") {
    Image tiny(8, 8, 1, 0.5f);
    CHECK_THROWS_AS(ssim(tiny, tiny), DataError);
  }
}

TEST_CASE("interpolation_error") {
  const Image a = testutil::random_image(8, 8, 1, 5);
  CHECK(interpolation_error(a, a) == 0.0);
  Image b = a;
  for (float& v : b.data) v += 5.0f / 255.0f;
  CHECK(interpolation_error(b, a) == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("metric oracles agree on random pairs") {
  for (int trial = 0; trial < 100; ++trial) {
    const Image a = testutil::random_image(8, 8, 1, 1000 + trial);
    const Image b = testutil::random_image(8, 8, 1, 2000 + trial);
    CHECK(psnr(a, b) == doctest::Approx(reference::psnr(a, b)).epsilon(1e-6));
    CHECK(interpolation_error(a, b) ==
          doctest::Approx(reference::interpolation_error(a, b)).epsilon(1e-6));
  }
  // ssim needs at least the 11x11 window
  for (int trial = 0; trial < 20; ++trial) {
    const Image a = testutil::random_image(16, 12, 3, 3000 + trial);
    const Image b = testutil::random_image(16, 12, 3, 4000 + trial);
    CHECK(ssim(a, b) == doctest::Approx(reference::ssim(a, b)).epsilon(1e-6));
  }
}

TEST_CASE("flo roundtrip is bit-exact") {
  testutil::TempDir tmp("flo");
  testutil::Rng rng(6);
  for (int trial = 0; trial < 12; ++trial) {
    const int w = 1 + static_cast<int>(rng.uniform() * 63);
    const int h = 1 + static_cast<int>(rng.uniform() * 63);
    DenseFlow flow(w, h);
    for (std::size_t i = 0; i < flow.size(); ++i) {
      flow.u[i] = rng.uniform(-100.0f, 100.0f);
      flow.v[i] = rng.uniform(-100.0f, 100.0f);
    }
    const std::string path = tmp.str("f" + std::to_string(trial) + ".flo");
    write_flo(flow, path);
    const DenseFlow back = read_flo(path);
    REQUIRE(back.width == w);
    REQUIRE(back.height == h);
    for (std::size_t i = 0; i < flow.size(); ++i) {
      CHECK(back.u[i] == flow.u[i]);
      CHECK(back.v[i] == flow.v[i]);
    }
  }
}

TEST_CASE("flo format details") {
  testutil::TempDir tmp("flo");

  SUBCASE("bad magic rejected") {
    std::ofstream f(tmp.str("bad.flo"), std::ios::binary);
    const float magic = 0.0f;
    const int32_t one = 1;
    f.write(reinterpret_cast<const char*>(&magic), 4);
    f.write(reinterpret_cast<const char*>(&one), 4);
    f.write(reinterpret_cast<const char*>(&one), 4);
    f.close();
    CHECK_THROWS_AS(read_flo(tmp.str("bad.flo")), DataError);
  }

  SUBCASE("truncated payload rejected") {
    DenseFlow flow(4, 4, 1.0f, 2.0f);
    write_flo(flow, tmp.str("t.flo"));
    std::ifstream in(tmp.str("t.flo"), std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();
    std::ofstream out(tmp.str("t.flo"), std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 8));
    out.close();
    CHECK_THROWS_AS(read_flo(tmp.str("t.flo")), IoError);
  }

  SUBCASE("1x1 file layout is exactly 20 bytes with the documented fields") {
    DenseFlow flow(1, 1, 1.5f, -2.5f);
    write_flo(flow, tmp.str("one.flo"));
    std::ifstream in(tmp.str("one.flo"), std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    REQUIRE(bytes.size() == 20);
    float magic, u, v;
    int32_t w, h;
    std::memcpy(&magic, bytes.data(), 4);
    std::memcpy(&w, bytes.data() + 4, 4);
    std::memcpy(&h, bytes.data() + 8, 4);
    std::memcpy(&u, bytes.data() + 12, 4);
    std::memcpy(&v, bytes.data() + 16, 4);
    CHECK(magic == 202021.25f);
    CHECK(w == 1);
    CHECK(h == 1);
    CHECK(u == 1.5f);
    CHECK(v == -2.5f);
  }

  SUBCASE("non-finite values rejected unless forced") {
    DenseFlow flow(2, 2);
    flow.u[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(write_flo(flow, tmp.str("nan.flo")), NumericError);
    write_flo(flow, tmp.str("nan.flo"), true);  // explicit override works
    const DenseFlow back = read_flo(tmp.str("nan.flo"));
    CHECK(std::isnan(back.u[0]));
  }
}

TEST_CASE("flow_to_color") {
  SUBCASE("zero flow renders white") {
    const DenseFlow zero(8, 8);
    const Image img = flow_to_color(zero);
    REQUIRE(img.channels == 3);
    for (float v : img.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("constant flow renders one color") {
    const DenseFlow flow(8, 8, 2.0f, 1.0f);
    const Image img = flow_to_color(flow);
    for (int c = 0; c < 3; ++c)
      for (std::size_t i = 1; i < flow.size(); ++i)
        CHECK(img.plane(c)[i] == doctest::Approx(img.plane(c)[0]).epsilon(1e-6));
  }
  SUBCASE("rotating field: frozen anchor colors and hue continuity") {
    const int n = 65;  // odd size centers the singularity
    DenseFlow flow(n, n);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        flow.u_at(x, y) = -(y - n / 2);
        flow.v_at(x, y) = static_cast<float>(x - n / 2);
      }
    const Image img = flow_to_color(flow, 32.0f);
    // center is zero motion -> white
    CHECK(img.at(n / 2, n / 2, 0) == doctest::Approx(1.0));
    CHECK(img.at(n / 2, n / 2, 1) == doctest::Approx(1.0));
    CHECK(img.at(n / 2, n / 2, 2) == doctest::Approx(1.0));
    // pure +u at full saturation -> hue 0 (red)
    {
      DenseFlow probe(1, 1, 32.0f, 0.0f);
      const Image c = flow_to_color(probe, 32.0f);
      CHECK(c.at(0, 0, 0) == doctest::Approx(1.0));
      CHECK(c.at(0, 0, 1) == doctest::Approx(0.0));
      CHECK(c.at(0, 0, 2) == doctest::Approx(0.0));
    }
    // pure +v -> hue 90deg (yellow-green)
    {
      DenseFlow probe(1, 1, 0.0f, 32.0f);
      const Image c = flow_to_color(probe, 32.0f);
      CHECK(c.at(0, 0, 0) == doctest::Approx(0.5));
      CHECK(c.at(0, 0, 1) == doctest::Approx(1.0));
      CHECK(c.at(0, 0, 2) == doctest::Approx(0.0));
    }
    // hue varies continuously along the ring
    const int r = 20;
    float prev[3] = {img.at(n / 2 + r, n / 2, 0), img.at(n / 2 + r, n / 2, 1),
                     img.at(n / 2 + r, n / 2, 2)};
    for (int step = 1; step <= 360; ++step) {
      const double angle = step * std::acos(-1.0) / 180.0;
      const int x = n / 2 + static_cast<int>(std::lround(r * std::cos(angle)));
      const int y = n / 2 + static_cast<int>(std::lround(r * std::sin(angle)));
      float cur[3] = {img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)};
      for (int c = 0; c < 3; ++c) {
        CHECK(std::abs(cur[c] - prev[c]) < 0.2f);
        prev[c] = cur[c];
      }
    }
  }
}

namespace {

void write_triplet(const std::string& dir, const Image& f0, const Image& gt,
                   const Image& f1, bool im_names = false) {
  std::filesystem::create_directories(dir);
  save_image(f0, dir + (im_names ? "/im1.png" : "/frame0.png"));
  save_image(gt, dir + (im_names ? "/im2.png" : "/gt.png"));
  save_image(f1, dir + (im_names ? "/im3.png" : "/frame1.png"));
}

}  // namespace

TEST_CASE("load_dataset: triplet-dirs") {
  testutil::TempDir tmp("ds");
  const Image img = testutil::smooth_noise(32, 24, 1);
  write_triplet(tmp.str("a"), img, img, img);
  write_triplet(tmp.str("b"), img, img, img, true);
  std::filesystem::create_directories(tmp.str("junk"));

  const DatasetLoadResult r = load_dataset(tmp.str(), DatasetLayout::TripletDirs);
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0].id == "a");
  CHECK(r.records[1].id == "b");
  CHECK(r.records[0].frame0 == tmp.str("a/frame0.png"));
  CHECK(r.records[1].gt == tmp.str("b/im2.png"));
  CHECK(r.warnings.size() == 1);  // junk dir
}

TEST_CASE("load_dataset: empty root gives empty list without error") {
  testutil::TempDir tmp("ds");
  const DatasetLoadResult r = load_dataset(tmp.str(), DatasetLayout::TripletDirs);
  CHECK(r.records.empty());
  CHECK(r.warnings.empty());
}

TEST_CASE("load_dataset: vimeo list with a garbage line") {
  testutil::TempDir tmp("ds");
  const Image img = testutil::smooth_noise(32, 24, 1);
  for (const char* seq : {"00001/0001", "00001/0002", "00002/0001"})
    write_triplet(tmp.str("sequences/") + seq, img, img, img, true);
  std::ofstream list(tmp.str("tri_testlist.txt"));
  list << "00001/0001\n00001/0002\nthis-is-garbage\n00002/0001\n";
  list.close();

  const DatasetLoadResult r = load_dataset(tmp.str(), DatasetLayout::VimeoList);
  REQUIRE(r.records.size() == 3);
  CHECK(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("line 3") != std::string::npos);
  CHECK(r.records[0].frame0 == tmp.str("sequences/00001/0001/im1.png"));
}

TEST_CASE("load_dataset: middlebury-other skips scenes without ground truth") {
  testutil::TempDir tmp("ds");
  const Image img = testutil::smooth_noise(32, 24, 1);
  std::filesystem::create_directories(tmp.str("SceneA"));
  save_image(img, tmp.str("SceneA/frame10.png"));
  save_image(img, tmp.str("SceneA/frame10i11.png"));
  save_image(img, tmp.str("SceneA/frame11.png"));
  std::filesystem::create_directories(tmp.str("SceneB"));
  save_image(img, tmp.str("SceneB/frame10.png"));
  save_image(img, tmp.str("SceneB/frame11.png"));  // no gt

  const DatasetLoadResult r = load_dataset(tmp.str(), DatasetLayout::MiddleburyOther);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].id == "SceneA");
  CHECK(r.records[0].gt == tmp.str("SceneA/frame10i11.png"));
}

TEST_CASE("load_dataset: missing root") {
  CHECK_THROWS_AS(load_dataset("/nonexistent/nowhere", DatasetLayout::TripletDirs),
                  IoError);
}

TEST_CASE("run_benchmark: static triplet hits the degenerate sentinels") {
  testutil::TempDir tmp("bench");
  const Image img = testutil::smooth_noise(48, 40, 8);
  write_triplet(tmp.str("static"), img, img, img);
  const DatasetLoadResult ds = load_dataset(tmp.str(), DatasetLayout::TripletDirs);
  PipelineOptions opts;
  const BenchmarkReport report = run_benchmark(ds.records, opts, 1, "flow=gf\n");
  REQUIRE(report.rows.size() == 1);
  CHECK(std::isinf(report.rows[0].psnr));
  CHECK(report.rows[0].ie == 0.0);
  CHECK(report.rows[0].ssim == doctest::Approx(1.0));
  CHECK(report.failures.empty());
}

TEST_CASE("run_benchmark: metrics deterministic across runs; failures recorded") {
  testutil::TempDir tmp("bench");
  const Image base = testutil::smooth_noise(64, 48, 9, 2.0f);
  write_triplet(tmp.str("t0"), base, testutil::shift_image(base, 1.0f, 0.5f),
                testutil::shift_image(base, 2.0f, 1.0f));
  // broken triplet: mismatched dimensions
  std::filesystem::create_directories(tmp.str("t1"));
  save_image(base, tmp.str("t1/frame0.png"));
  save_image(testutil::smooth_noise(32, 32, 1), tmp.str("t1/gt.png"));
  save_image(base, tmp.str("t1/frame1.png"));

  const DatasetLoadResult ds = load_dataset(tmp.str(), DatasetLayout::TripletDirs);
  REQUIRE(ds.records.size() == 2);
  PipelineOptions opts;
  const BenchmarkReport r1 = run_benchmark(ds.records, opts, 1, "");
  const BenchmarkReport r2 = run_benchmark(ds.records, opts, 1, "");
  REQUIRE(r1.rows.size() == 1);
  REQUIRE(r1.failures.size() == 1);
  CHECK(r1.failures[0].id == "t1");
  CHECK(r1.rows[0].psnr == r2.rows[0].psnr);
  CHECK(r1.rows[0].ssim == r2.rows[0].ssim);
  CHECK(r1.rows[0].ie == r2.rows[0].ie);
}

TEST_CASE("report CSV aggregates recompute exactly from its rows") {
  testutil::TempDir tmp("bench");
  const Image base = testutil::smooth_noise(64, 48, 10, 2.0f);
  for (int i = 0; i < 3; ++i) {
    const float dx = 0.5f + 0.5f * i;
    write_triplet(tmp.str("t" + std::to_string(i)),
                  base, testutil::shift_image(base, dx, 0.25f),
                  testutil::shift_image(base, 2 * dx, 0.5f));
  }
  const DatasetLoadResult ds = load_dataset(tmp.str(), DatasetLayout::TripletDirs);
  PipelineOptions opts;
  const BenchmarkReport report = run_benchmark(ds.records, opts, 1, "flow=gf\n");
  write_report_csv(report, tmp.str("report.csv"));

  // parse the CSV back and recompute
  std::ifstream in(tmp.str("report.csv"));
  std::string line;
  std::vector<BenchmarkRow> rows;
  double mean_line[5] = {0}, median_line[5] = {0};
  bool saw_mean = false, saw_median = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("id,", 0) == 0) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    REQUIRE(fields.size() == 6);
    if (fields[0] == "mean" || fields[0] == "median") {
      double* dst = fields[0] == "mean" ? mean_line : median_line;
      (fields[0] == "mean" ? saw_mean : saw_median) = true;
      for (int k = 0; k < 5; ++k) dst[k] = std::stod(fields[static_cast<std::size_t>(k) + 1]);
    } else {
      BenchmarkRow r;
      r.id = fields[0];
      r.psnr = std::stod(fields[1]);
      r.ssim = std::stod(fields[2]);
      r.ie = std::stod(fields[3]);
      r.flow_ms = std::stod(fields[4]);
      r.total_ms = std::stod(fields[5]);
      rows.push_back(r);
    }
  }
  REQUIRE(rows.size() == 3);
  REQUIRE(saw_mean);
  REQUIRE(saw_median);
  const BenchmarkAggregates agg = recompute_aggregates(rows);
  CHECK(agg.mean_psnr == doctest::Approx(mean_line[0]).epsilon(1e-9));
  CHECK(agg.mean_ssim == doctest::Approx(mean_line[1]).epsilon(1e-9));
  CHECK(agg.mean_ie == doctest::Approx(mean_line[2]).epsilon(1e-9));
  CHECK(agg.median_psnr == doctest::Approx(median_line[0]).epsilon(1e-9));
  CHECK(agg.median_ie == doctest::Approx(median_line[2]).epsilon(1e-9));
  // and the report's own aggregates match the recomputation bit-for-bit
  CHECK(report.aggregates.mean_psnr == agg.mean_psnr);
  CHECK(report.aggregates.median_total_ms == agg.median_total_ms);
}
