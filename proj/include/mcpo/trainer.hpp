#pragma once

#include <filesystem>

#include "mcpo/checkpoint.hpp"
#include "mcpo/config.hpp"
#include "mcpo/env.hpp"
#include "mcpo/metrics.hpp"

namespace mcpo::harness {

// 2-layer tanh policy+value net sized for the environment's spaces
nn::NetArch arch_for_env(const envs::EnvSpec& spec, int hidden);

struct SeedRunResult {
  bool ok = false;
  std::string error;
  double final_return_mean = std::numeric_limits<double>::quiet_NaN();
  long episodes = 0;
  long env_steps = 0;
};

// Full training of one seed: collect -> GAE -> K epochs of minibatch updates
// -> theta_old <- theta, with a metrics record per iteration and checkpoints
// on schedule. With resume=true an existing checkpoint in seed_dir continues
// the run bit-identically.
SeedRunResult train_seed(const RunConfig& cfg, std::uint64_t seed,
                         const std::filesystem::path& seed_dir, bool resume,
                         bool verbose = true);

// Runs every seed in the config (one subdirectory each) and writes an
// aggregate summary with the mean +- std of the final-window return. A seed
// that fails is recorded as failed without stopping the others.
std::filesystem::path run(const RunConfig& cfg, bool resume = false,
                          bool verbose = true);

// Root for run outputs: $MCPO_OUTPUT_ROOT if set, else the config's out_dir
// as given.
std::filesystem::path resolve_out_dir(const RunConfig& cfg);

struct EvalResult {
  double mean_return = 0.0;
  double std_return = 0.0;
  double success_rate = 0.0;  // fraction of episodes with positive return
  long episodes = 0;
};
EvalResult evaluate_checkpoint(const std::filesystem::path& checkpoint,
                               int episodes, std::uint64_t seed);

}  // namespace mcpo::harness
