#pragma once

#include <vector>

#include "mcpo/env.hpp"
#include "mcpo/net.hpp"
#include "mcpo/types.hpp"

namespace mcpo::rollout {

using envs::Env;

// Per-timestep experience for T steps from each of N_actor environments,
// stored actor-major: row a*T + t. Alongside the sampled transition we cache
// the sampling policy's full per-row distribution so later KL terms against
// it need no re-evaluation.
struct RolloutBatch {
  int n_actors = 0;
  int horizon = 0;  // T

  Mat states;              // rows x obs_dim
  std::vector<int> disc_actions;
  Mat cont_actions;        // rows x action_dim (continuous policies)
  Vec rewards;
  std::vector<std::uint8_t> done;       // episode ended after this row
  std::vector<std::uint8_t> terminal;   // ended in a true terminal state
  Vec logprob_old;
  Vec value_old;
  Vec next_value;          // V(s_{t+1}) under the sampling policy, pre-reset
  Mat old_mean_or_logits;  // sampling policy dist per row
  Vec old_log_std;

  Vec advantage;
  Vec value_target;
  Vec bootstrap_value;     // V(s_T) per actor
  bool gae_done = false;
  bool normalized = false;

  // episode returns completed during collection, in completion order
  std::vector<double> finished_returns;

  int rows() const { return n_actors * horizon; }
};

// Runs the sampling policy for T steps in every environment, auto-resetting
// finished episodes. Action sampling uses one independent stream per actor
// derived from rng_seed, so results do not depend on stepping order.
// `episode_return_acc` carries partial episode returns across calls (one
// slot per actor); pass nullptr when that bookkeeping is not needed.
RolloutBatch collect(const Vec& policy, const nn::NetArch& arch,
                     std::vector<envs::EnvPtr>& envs, int horizon,
                     std::uint64_t rng_seed,
                     std::vector<double>* episode_return_acc = nullptr);

// Fills advantage and value_target. delta_t = r_t + gamma*V(s_{t+1})*(1-terminal_t) - V(s_t),
// accumulated with gamma*lambda and reset across any episode boundary;
// time-limit truncation bootstraps from V(s_{t+1}) instead of zero.
void compute_gae(RolloutBatch& batch, double gamma, double lambda);

struct MinibatchPlan {
  int epochs = 10;      // K
  int batch_size = 64;  // B; the last minibatch of an epoch may be short
  std::uint64_t seed = 0;
};

// Index sets per epoch, every row exactly once per epoch. On first use the
// batch's advantages are normalized (mean 0, std 1, eps 1e-8) over the whole
// rollout.
std::vector<std::vector<std::vector<int>>> minibatches(RolloutBatch& batch,
                                                       const MinibatchPlan& plan);

void normalize_advantages(RolloutBatch& batch);

// Dense view of selected rows, used by the update rules.
struct MinibatchView {
  Mat states;
  std::vector<int> disc_actions;
  Mat cont_actions;
  Vec advantage;
  Vec value_target;
  Vec logprob_old;
  Vec value_old;
  Mat old_mean_or_logits;
  Vec old_log_std;

  int rows() const { return static_cast<int>(states.rows()); }
};
MinibatchView gather(const RolloutBatch& batch, const std::vector<int>& idx);

}  // namespace mcpo::rollout
