#include "mcpo/metrics.hpp"

#include <json.hpp>

namespace mcpo::harness {

using nlohmann::json;

std::string MetricsRecord::to_json_line() const {
  json j;
  j["iteration"] = iteration;
  j["env_steps"] = env_steps;
  j["episodes"] = episodes;
  if (std::isfinite(return_mean_100))
    j["return_mean_100"] = return_mean_100;
  else
    j["return_mean_100"] = nullptr;
  j["surrogate"] = surrogate;
  j["value_loss"] = value_loss;
  j["entropy"] = entropy;
  j["kl_old"] = kl_old;
  j["kl_psi"] = kl_psi;
  j["beta_mean"] = beta_mean;
  j["mean_alpha"] = mean_alpha;
  j["beta_max_fraction"] = beta_max_fraction;
  j["memory_size"] = memory_size;
  j["write_count"] = write_count;
  j["argmax_slot"] = argmax_slot;
  j["d_old_theta"] = d_old_theta;
  j["d_old_psi"] = d_old_psi;
  return j.dump();
}

JsonlWriter::JsonlWriter(const std::string& path, bool append) {
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) throw ConfigError("metrics: cannot open '" + path + "'");
}

void JsonlWriter::write_line(const std::string& line) {
  out_ << line << '\n';
  out_.flush();
}

}  // namespace mcpo::harness
