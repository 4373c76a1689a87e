#pragma once

#include <deque>
#include <filesystem>

#include "mcpo/mcpo_update.hpp"

namespace mcpo::harness {

// Everything a training run needs to continue bit-identically: policy and
// optimizer state (McpoState covers the baselines too; they simply never use
// the memory/attention parts), episode bookkeeping, the trainer stream, and
// the serialized environments.
struct TrainerState {
  McpoState policy;
  long iteration = 0;
  long env_steps = 0;
  long episodes = 0;
  double beta = 1.0;  // baseline fixed/adaptive coefficient
  std::deque<double> return_window;        // trailing episode returns
  std::vector<double> episode_return_acc;  // per-actor partial returns
  RngStream rng;
};

struct Checkpoint {
  std::string algorithm;
  std::string env_id;
  TrainerState state;
  std::vector<Vec> env_blobs;
};

// Self-describing file: a text header (format version, architecture,
// algorithm, counters) followed by one flat little-endian double array whose
// layout the header fully determines. Loading parses into a fresh object and
// commits only on success; version or architecture mismatches and truncated
// files are rejected without partial state.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct LoadError : std::runtime_error {
  explicit LoadError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mcpo::harness
