#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mcpo/dist.hpp"
#include "mcpo/types.hpp"

namespace mcpo::envs {

using nn::Action;

struct ActionSpace {
  bool discrete = true;
  int n = 0;     // number of discrete actions, or box dimension
  Vec low, high; // continuous box bounds

  static ActionSpace make_discrete(int k) { return {true, k, Vec(), Vec()}; }
  static ActionSpace box(Vec low, Vec high) {
    ActionSpace a{false, static_cast<int>(low.size()), std::move(low),
                  std::move(high)};
    return a;
  }
};

struct EnvSpec {
  std::string id;
  int obs_dim = 0;
  ActionSpace action_space;
  int max_episode_len = 0;
};

struct StepResult {
  Vec obs;
  double reward = 0.0;
  bool done = false;       // episode ended (terminal or truncated)
  bool truncated = false;  // ended only because max_episode_len was reached
};

// Uniform step/reset interface. An instance is single-threaded; distinct
// instances may be stepped concurrently. Dynamics are deterministic; all
// randomness comes from the internal stream seeded at reset(seed), which
// also drives the automatic re-draws used by reset_continue().
class Env {
 public:
  virtual ~Env() = default;
  virtual const EnvSpec& spec() const = 0;

  Vec reset(std::uint64_t seed) {
    rng_ = RngStream(seed);
    return reset_continue();
  }

  // new episode drawn from the current internal stream (auto-reset on done)
  Vec reset_continue() {
    steps_ = 0;
    awaiting_reset_ = false;
    return do_reset();
  }

  StepResult step(const Action& action) {
    if (awaiting_reset_)
      throw UsageError(spec().id + ": step() called on a finished episode");
    StepResult r = do_step(action);
    ++steps_;
    if (!r.done && steps_ >= spec().max_episode_len) {
      r.done = true;
      r.truncated = true;
    }
    if (r.done) awaiting_reset_ = true;
    return r;
  }

  int episode_steps() const { return steps_; }
  bool awaiting_reset() const { return awaiting_reset_; }

  // current observation, without advancing the environment
  virtual Vec observe() const = 0;

  // flat snapshot of the internal state, for checkpointing
  virtual Vec get_state() const = 0;
  virtual void set_state(const Vec& s) = 0;
  Vec serialize() const;
  void deserialize(const Vec& blob);

 protected:
  virtual Vec do_reset() = 0;
  virtual StepResult do_step(const Action& action) = 0;

  RngStream rng_;
  int steps_ = 0;
  bool awaiting_reset_ = true;
};

using EnvPtr = std::unique_ptr<Env>;

// Accepted ids: "pendulum", "cartpole", "keydoor", "chain:<n_states>".
EnvPtr make_env(const std::string& id);

}  // namespace mcpo::envs
