#pragma once

#include <string>
#include <vector>

#include "mcpo/types.hpp"

namespace mcpo::harness {

struct Series {
  std::vector<double> x;  // env_steps
  std::vector<double> y;
};

// pulls one metric out of a metrics.jsonl stream
Series read_metric_series(const std::string& path, const std::string& metric);

struct Aggregate {
  std::vector<double> x;
  std::vector<double> mean;
  std::vector<double> stddev;
  int n = 0;
};

// Mean and std across runs. Mismatched env_steps grids are linearly
// resampled onto a common grid over the overlapping range (a note is logged
// when that happens).
Aggregate aggregate_series(const std::vector<Series>& runs);

// mean curve with a +-std band, written as a standalone SVG; the aggregated
// data always lands in <output>.csv next to it
void plot(const std::vector<std::string>& metrics_files,
          const std::string& metric, const std::string& output_svg);

void write_aggregate_csv(const Aggregate& agg, const std::string& path);

}  // namespace mcpo::harness
