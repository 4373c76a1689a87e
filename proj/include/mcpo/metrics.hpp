#pragma once

#include <fstream>
#include <string>

#include "mcpo/types.hpp"

namespace mcpo::harness {

// One record per outer iteration. Everything here is a pure function of
// (config, seed); wall-clock throughput lives in a separate timing sidecar
// so the metrics stream stays byte-reproducible.
struct MetricsRecord {
  long iteration = 0;
  long env_steps = 0;
  long episodes = 0;
  double return_mean_100 = std::numeric_limits<double>::quiet_NaN();
  double surrogate = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double kl_old = 0.0;
  double kl_psi = 0.0;
  double beta_mean = 0.0;
  // MCPO diagnostics
  double mean_alpha = 0.0;
  double beta_max_fraction = 0.0;
  long memory_size = 0;
  long write_count = 0;
  long argmax_slot = -1;
  double d_old_theta = 0.0;
  double d_old_psi = 0.0;

  std::string to_json_line() const;
};

// line-delimited records, appended and flushed one at a time so an
// interrupted run keeps every completed iteration
class JsonlWriter {
 public:
  JsonlWriter() = default;
  explicit JsonlWriter(const std::string& path, bool append);
  void write_line(const std::string& line);
  bool is_open() const { return out_.is_open(); }

 private:
  std::ofstream out_;
};

}  // namespace mcpo::harness
