#include "mcpo/rollout.hpp"

#include <numeric>

namespace mcpo::rollout {

using nn::Action;
using nn::PolicyHead;

RolloutBatch collect(const Vec& policy, const nn::NetArch& arch,
                     std::vector<envs::EnvPtr>& envs, int horizon,
                     std::uint64_t rng_seed,
                     std::vector<double>* episode_return_acc) {
  if (horizon < 1) throw ConfigError("collect: horizon must be >= 1");
  if (envs.empty()) throw ConfigError("collect: no environments");
  if (!policy.allFinite()) throw NumericalError("collect: non-finite policy");

  const int n_actors = static_cast<int>(envs.size());
  const int rows = n_actors * horizon;
  const bool discrete = arch.policy_head == PolicyHead::CategoricalLogits;

  RolloutBatch b;
  b.n_actors = n_actors;
  b.horizon = horizon;
  b.states.resize(rows, arch.input_dim);
  if (discrete)
    b.disc_actions.assign(rows, 0);
  else
    b.cont_actions.resize(rows, arch.action_dim);
  b.rewards.resize(rows);
  b.done.assign(rows, 0);
  b.terminal.assign(rows, 0);
  b.logprob_old.resize(rows);
  b.value_old.resize(rows);
  b.next_value = Vec::Zero(rows);
  b.old_mean_or_logits.resize(rows, arch.action_dim);
  b.bootstrap_value.resize(n_actors);

  std::vector<RngStream> action_rng;
  action_rng.reserve(n_actors);
  for (int a = 0; a < n_actors; ++a)
    action_rng.emplace_back(split_seed(rng_seed, static_cast<std::uint64_t>(a)));

  std::vector<double> running(n_actors, 0.0);
  if (episode_return_acc) running = *episode_return_acc;

  // lockstep over actors: one batched forward per timestep
  Mat cur_obs(n_actors, arch.input_dim);
  for (int a = 0; a < n_actors; ++a)
    cur_obs.row(a) = envs[a]->awaiting_reset() ? envs[a]->reset_continue()
                                               : envs[a]->observe();

  auto value_of = [&](const Vec& obs) {
    return nn::forward(policy, arch, obs).value;
  };

  for (int t = 0; t < horizon; ++t) {
    nn::BatchForwardOut fwd = nn::forward_batch(policy, arch, cur_obs);
    if (t > 0)
      for (int a = 0; a < n_actors; ++a) {
        int prev = a * horizon + (t - 1);
        if (!b.done[prev]) b.next_value(prev) = fwd.values(a);
      }
    if (t == 0) b.old_log_std = fwd.log_std;

    for (int a = 0; a < n_actors; ++a) {
      const int row = a * horizon + t;
      b.states.row(row) = cur_obs.row(a);
      b.old_mean_or_logits.row(row) = fwd.mean_or_logits.row(a);
      b.value_old(row) = fwd.values(a);

      nn::DistParams dist = fwd.dist_row(arch, a);
      Action act = nn::sample(dist, action_rng[a]);
      b.logprob_old(row) = nn::log_prob(dist, act);
      if (discrete)
        b.disc_actions[row] = act.index;
      else
        b.cont_actions.row(row) = act.values;

      envs::StepResult sr;
      try {
        sr = envs[a]->step(act);
      } catch (const std::exception& e) {
        throw UsageError("collect: actor " + std::to_string(a) + ": " +
                         e.what());
      }
      b.rewards(row) = sr.reward;
      running[a] += sr.reward;
      if (sr.done) {
        b.done[row] = 1;
        b.terminal[row] = sr.truncated ? 0 : 1;
        b.next_value(row) = sr.truncated ? value_of(sr.obs) : 0.0;
        b.finished_returns.push_back(running[a]);
        running[a] = 0.0;
        cur_obs.row(a) = envs[a]->reset_continue();
      } else {
        cur_obs.row(a) = sr.obs;
      }
    }
  }

  // bootstrap the rollout tail from V(s_T)
  nn::BatchForwardOut tail = nn::forward_batch(policy, arch, cur_obs);
  for (int a = 0; a < n_actors; ++a) {
    int last = a * horizon + horizon - 1;
    if (!b.done[last]) b.next_value(last) = tail.values(a);
    b.bootstrap_value(a) = b.next_value(last);
  }

  if (episode_return_acc) *episode_return_acc = running;
  return b;
}

void compute_gae(RolloutBatch& batch, double gamma, double lambda) {
  if (gamma <= 0.0 || gamma > 1.0 || lambda <= 0.0 || lambda > 1.0)
    throw ConfigError("compute_gae: gamma and lambda must lie in (0,1]");
  if (batch.next_value.size() != batch.rows() ||
      batch.bootstrap_value.size() != batch.n_actors)
    throw UsageError("compute_gae: batch is missing bootstrap values");

  batch.advantage.resize(batch.rows());
  batch.value_target.resize(batch.rows());
  const double gl = gamma * lambda;
  for (int a = 0; a < batch.n_actors; ++a) {
    double acc = 0.0;
    for (int t = batch.horizon - 1; t >= 0; --t) {
      const int row = a * batch.horizon + t;
      double boot = batch.terminal[row] ? 0.0 : batch.next_value(row);
      double delta = batch.rewards(row) + gamma * boot - batch.value_old(row);
      acc = delta + gl * (batch.done[row] ? 0.0 : acc);
      batch.advantage(row) = acc;
    }
  }
  if (!batch.advantage.allFinite())
    throw NumericalError("compute_gae: non-finite advantage");
  batch.value_target = batch.advantage + batch.value_old;
  batch.gae_done = true;
  batch.normalized = false;
}

void normalize_advantages(RolloutBatch& batch) {
  if (!batch.gae_done)
    throw UsageError("normalize_advantages: run compute_gae first");
  if (batch.normalized) return;  // applied once per rollout
  double mean = batch.advantage.mean();
  double var = (batch.advantage.array() - mean).square().mean();
  batch.advantage = (batch.advantage.array() - mean) / (std::sqrt(var) + 1e-8);
  batch.normalized = true;
}

std::vector<std::vector<std::vector<int>>> minibatches(
    RolloutBatch& batch, const MinibatchPlan& plan) {
  if (plan.batch_size <= 0)
    throw ConfigError("minibatches: batch size must be positive");
  if (plan.epochs <= 0) throw ConfigError("minibatches: epochs must be positive");
  normalize_advantages(batch);

  const int n = batch.rows();
  RngStream rng(split_seed(plan.seed, 0x517));
  std::vector<int> perm(n);
  std::vector<std::vector<std::vector<int>>> out(plan.epochs);
  for (int e = 0; e < plan.epochs; ++e) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) {
      int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i + 1)));
      std::swap(perm[i], perm[j]);
    }
    for (int start = 0; start < n; start += plan.batch_size) {
      int len = std::min(plan.batch_size, n - start);
      out[e].emplace_back(perm.begin() + start, perm.begin() + start + len);
    }
  }
  return out;
}

MinibatchView gather(const RolloutBatch& batch, const std::vector<int>& idx) {
  const int m = static_cast<int>(idx.size());
  MinibatchView v;
  v.states.resize(m, batch.states.cols());
  if (!batch.disc_actions.empty()) v.disc_actions.resize(m);
  if (batch.cont_actions.size() > 0)
    v.cont_actions.resize(m, batch.cont_actions.cols());
  v.advantage.resize(m);
  v.value_target.resize(m);
  v.logprob_old.resize(m);
  v.value_old.resize(m);
  v.old_mean_or_logits.resize(m, batch.old_mean_or_logits.cols());
  v.old_log_std = batch.old_log_std;
  for (int i = 0; i < m; ++i) {
    const int r = idx[i];
    v.states.row(i) = batch.states.row(r);
    if (!batch.disc_actions.empty()) v.disc_actions[i] = batch.disc_actions[r];
    if (batch.cont_actions.size() > 0)
      v.cont_actions.row(i) = batch.cont_actions.row(r);
    v.advantage(i) = batch.advantage(r);
    v.value_target(i) = batch.value_target(r);
    v.logprob_old(i) = batch.logprob_old(r);
    v.value_old(i) = batch.value_old(r);
    v.old_mean_or_logits.row(i) = batch.old_mean_or_logits.row(r);
  }
  return v;
}

}  // namespace mcpo::rollout
