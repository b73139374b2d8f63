#include "midframe/bench_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "midframe/image_io.hpp"
#include "midframe/metrics.hpp"

namespace midframe {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  if (v.size() % 2 == 1) return v[mid];
  return 0.5 * (v[mid - 1] + v[mid]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

BenchmarkAggregates recompute_aggregates(const std::vector<BenchmarkRow>& rows) {
  std::vector<double> p, s, e, f, t;
  for (const BenchmarkRow& r : rows) {
    p.push_back(r.psnr);
    s.push_back(r.ssim);
    e.push_back(r.ie);
    f.push_back(r.flow_ms);
    t.push_back(r.total_ms);
  }
  BenchmarkAggregates a;
  a.mean_psnr = mean(p);
  a.median_psnr = median(p);
  a.mean_ssim = mean(s);
  a.median_ssim = median(s);
  a.mean_ie = mean(e);
  a.median_ie = median(e);
  a.mean_flow_ms = mean(f);
  a.median_flow_ms = median(f);
  a.mean_total_ms = mean(t);
  a.median_total_ms = median(t);
  return a;
}

BenchmarkReport run_benchmark(const std::vector<TripletRecord>& dataset,
                              const PipelineOptions& opts, int repeat,
                              const std::string& config_echo, std::ostream* verbose) {
  if (dataset.empty()) throw DataError("benchmark dataset is empty");
  if (repeat < 1) throw DataError("repeat must be >= 1");

  BenchmarkReport report;
  report.config_echo = config_echo;
  for (const TripletRecord& rec : dataset) {
    try {
      const Image frame0 = load_image(rec.frame0);
      const Image gt = load_image(rec.gt);
      const Image frame1 = load_image(rec.frame1);
      if (!frame0.same_shape(frame1) || !frame0.same_shape(gt))
        throw DataError("triplet frames have mismatched dimensions");

      if (repeat > 1) interpolate_timed(frame0, frame1, Timestep(0.5f), opts);  // warm-up
      std::vector<double> flow_times, total_times;
      PipelineResult last;
      for (int r = 0; r < repeat; ++r) {
        last = interpolate_timed(frame0, frame1, Timestep(0.5f), opts);
        flow_times.push_back(last.flow_ms);
        total_times.push_back(last.total_ms);
        if (verbose)
          *verbose << rec.id << " run " << (r + 1) << "/" << repeat
                   << " flow_ms=" << last.flow_ms << " total_ms=" << last.total_ms
                   << "\n";
      }

      // quality metrics on luma; the report header flags the colorspace
      const Image out_luma = to_grayscale(last.frame);
      const Image gt_luma = to_grayscale(gt);
      BenchmarkRow row;
      row.id = rec.id;
      row.psnr = psnr(out_luma, gt_luma);
      row.ssim = ssim(out_luma, gt_luma);
      row.ie = interpolation_error(out_luma, gt_luma);
      row.flow_ms = median(flow_times);
      row.total_ms = median(total_times);
      report.rows.push_back(std::move(row));
    } catch (const std::exception& ex) {
      report.failures.push_back({rec.id, ex.what()});
    }
  }
  report.aggregates = recompute_aggregates(report.rows);
  return report;
}

void write_report_csv(const BenchmarkReport& report, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot write " + path);
  std::string echo = report.config_echo;
  std::replace(echo.begin(), echo.end(), '\n', ';');
  std::fprintf(f, "# config: %s\n", echo.c_str());
  std::fprintf(f, "# metrics: luma, 0-255 scale\n");
  std::fprintf(f, "id,psnr,ssim,ie,flow_ms,total_ms\n");
  for (const BenchmarkRow& r : report.rows)
    std::fprintf(f, "%s,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.id.c_str(), r.psnr, r.ssim,
                 r.ie, r.flow_ms, r.total_ms);
  const BenchmarkAggregates& a = report.aggregates;
  std::fprintf(f, "mean,%.17g,%.17g,%.17g,%.17g,%.17g\n", a.mean_psnr, a.mean_ssim,
               a.mean_ie, a.mean_flow_ms, a.mean_total_ms);
  std::fprintf(f, "median,%.17g,%.17g,%.17g,%.17g,%.17g\n", a.median_psnr, a.median_ssim,
               a.median_ie, a.median_flow_ms, a.median_total_ms);
  for (const BenchmarkFailure& fail : report.failures)
    std::fprintf(f, "# failed,%s,%s\n", fail.id.c_str(), fail.error.c_str());
  std::fclose(f);
}

std::string format_report_table(const BenchmarkReport& report) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-20s %10s %8s %8s %10s %10s\n", "id", "psnr[dB]",
                "ssim", "ie", "flow[ms]", "total[ms]");
  os << buf;
  for (const BenchmarkRow& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%-20s %10.3f %8.4f %8.3f %10.2f %10.2f\n",
                  r.id.c_str(), r.psnr, r.ssim, r.ie, r.flow_ms, r.total_ms);
    os << buf;
  }
  const BenchmarkAggregates& a = report.aggregates;
  std::snprintf(buf, sizeof buf, "%-20s %10.3f %8.4f %8.3f %10.2f %10.2f\n", "mean",
                a.mean_psnr, a.mean_ssim, a.mean_ie, a.mean_flow_ms, a.mean_total_ms);
  os << buf;
  std::snprintf(buf, sizeof buf, "%-20s %10.3f %8.4f %8.3f %10.2f %10.2f\n", "median",
                a.median_psnr, a.median_ssim, a.median_ie, a.median_flow_ms,
                a.median_total_ms);
  os << buf;
  for (const BenchmarkFailure& fail : report.failures)
    os << "failed: " << fail.id << " (" << fail.error << ")\n";
  return os.str();
}

}  // namespace midframe
