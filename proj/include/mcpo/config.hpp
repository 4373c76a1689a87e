#pragma once

#include <string>
#include <vector>

#include "mcpo/mcpo_update.hpp"
#include "mcpo/objectives.hpp"

namespace mcpo::harness {

// Fully resolved experiment configuration. parse_config() fills every
// default explicitly, so an echoed RunConfig is the complete record of the
// run; nothing is defaulted downstream.
struct RunConfig {
  std::string env;
  objectives::ObjectiveKind algorithm = objectives::ObjectiveKind::Mcpo;
  long total_steps = 0;
  std::vector<std::uint64_t> seeds;

  int horizon = 2048;       // T
  int epochs = 10;          // K
  int minibatch_size = 64;  // B
  double gamma = 0.99;
  double lambda = 0.95;
  int n_actors = 4;
  double adam_step_size = 3e-4;
  int hidden_size = 64;

  objectives::ObjectiveConfig objective;
  McpoConfig mcpo;

  std::string out_dir = "runs/out";
  int checkpoint_interval = 0;  // iterations between checkpoints; 0 = final only

  long steps_per_iteration() const {
    return static_cast<long>(horizon) * n_actors;
  }
  long iterations() const {
    return (total_steps + steps_per_iteration() - 1) / steps_per_iteration();
  }
  long minibatch_updates_per_iteration() const {
    long rows = steps_per_iteration();
    return static_cast<long>(epochs) *
           ((rows + minibatch_size - 1) / minibatch_size);
  }

  std::string algorithm_name() const;
  // complete key/value echo, defaults included
  std::string to_json() const;
};

// Parses a JSON document (// comments allowed). Unknown keys, keys not
// applicable to the chosen algorithm, missing required keys and invariant
// violations are configuration errors naming the offending key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace mcpo::harness
