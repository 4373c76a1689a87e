#include "mcpo/env.hpp"

#include <bit>

#include "mcpo/env_cartpole.hpp"
#include "mcpo/env_keydoor.hpp"
#include "mcpo/env_pendulum.hpp"
#include "mcpo/tabular.hpp"

namespace mcpo::envs {

Vec Env::serialize() const {
  Vec s = get_state();
  Vec out(5 + s.size());
  out(0) = std::bit_cast<double>(rng_.state());
  out(1) = rng_.have_spare() ? 1.0 : 0.0;
  out(2) = rng_.spare();
  out(3) = static_cast<double>(steps_);
  out(4) = awaiting_reset_ ? 1.0 : 0.0;
  out.tail(s.size()) = s;
  return out;
}

void Env::deserialize(const Vec& blob) {
  rng_.restore(std::bit_cast<std::uint64_t>(blob(0)), blob(1) != 0.0, blob(2));
  steps_ = static_cast<int>(blob(3));
  awaiting_reset_ = blob(4) != 0.0;
  set_state(blob.tail(blob.size() - 5));
}

namespace {

// Steppable view of a TabularMDP with one-hot observations. The absorbing
// chain never terminates on its own, so episodes end by truncation.
class TabularEnv final : public Env {
 public:
  explicit TabularEnv(TabularMDP mdp, std::string id) : mdp_(std::move(mdp)) {
    spec_.id = std::move(id);
    spec_.obs_dim = mdp_.n_states;
    spec_.action_space = ActionSpace::make_discrete(mdp_.n_actions);
    spec_.max_episode_len = 200;
  }

  const EnvSpec& spec() const override { return spec_; }
  Vec observe() const override {
    Vec o = Vec::Zero(mdp_.n_states);
    o(state_) = 1.0;
    return o;
  }
  Vec get_state() const override {
    Vec s(1);
    s << static_cast<double>(state_);
    return s;
  }
  void set_state(const Vec& s) override { state_ = static_cast<int>(s(0)); }

 protected:
  Vec do_reset() override {
    double u = rng_.uniform();
    double acc = 0.0;
    state_ = mdp_.n_states - 1;
    for (int s = 0; s < mdp_.n_states; ++s) {
      acc += mdp_.initial_dist(s);
      if (u < acc) {
        state_ = s;
        break;
      }
    }
    return observe();
  }

  StepResult do_step(const Action& action) override {
    if (action.index < 0 || action.index >= mdp_.n_actions)
      throw InputError(spec_.id + ": action out of range");
    double reward = mdp_.reward(state_, action.index);
    double u = rng_.uniform();
    double acc = 0.0;
    const Mat& p = mdp_.transition[action.index];
    int next = mdp_.n_states - 1;
    for (int s = 0; s < mdp_.n_states; ++s) {
      acc += p(state_, s);
      if (u < acc) {
        next = s;
        break;
      }
    }
    state_ = next;
    return {observe(), reward, false, false};
  }

 private:
  TabularMDP mdp_;
  EnvSpec spec_;
  int state_ = 0;
};

}  // namespace

EnvPtr make_env(const std::string& id) {
  if (id == "pendulum") return std::make_unique<PendulumEnv>();
  if (id == "cartpole") return std::make_unique<CartpoleEnv>();
  if (id == "keydoor") return std::make_unique<KeyDoorEnv>();
  if (id.rfind("chain:", 0) == 0) {
    int n = 0;
    try {
      n = std::stoi(id.substr(6));
    } catch (const std::exception&) {
      throw ConfigError("make_env: bad chain size in '" + id + "'");
    }
    return std::make_unique<TabularEnv>(chain_mdp(n, 0.99), id);
  }
  throw ConfigError("make_env: unknown environment id '" + id + "'");
}

}  // namespace mcpo::envs
