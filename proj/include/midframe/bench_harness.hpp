#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "midframe/dataset.hpp"
#include "midframe/pipeline.hpp"

namespace midframe {

struct BenchmarkRow {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
  double ie = 0.0;
  double flow_ms = 0.0;
  double total_ms = 0.0;
};

struct BenchmarkFailure {
  std::string id;
  std::string error;
};

struct BenchmarkAggregates {
  double mean_psnr = 0.0, median_psnr = 0.0;
  double mean_ssim = 0.0, median_ssim = 0.0;
  double mean_ie = 0.0, median_ie = 0.0;
  double mean_flow_ms = 0.0, median_flow_ms = 0.0;
  double mean_total_ms = 0.0, median_total_ms = 0.0;
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;
  std::vector<BenchmarkFailure> failures;
  BenchmarkAggregates aggregates;
  std::string config_echo;  // resolved run configuration, key=value lines
};

// Interpolates every triplet at t=0.5, compares against the ground-truth
// middle frame (quality metrics on luma) and times the flow phase and the
// whole pipeline. With repeat > 1 a warm-up run precedes `repeat` timed
// runs and the medians are reported. Per-sample failures are recorded and
// the run continues.
BenchmarkReport run_benchmark(const std::vector<TripletRecord>& dataset,
                              const PipelineOptions& opts, int repeat,
                              const std::string& config_echo,
                              std::ostream* verbose = nullptr);

BenchmarkAggregates recompute_aggregates(const std::vector<BenchmarkRow>& rows);

void write_report_csv(const BenchmarkReport& report, const std::string& path);
std::string format_report_table(const BenchmarkReport& report);

}  // namespace midframe
