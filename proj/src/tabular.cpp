#include "mcpo/tabular.hpp"

namespace mcpo::envs {

void TabularMDP::validate() const {
  if (n_states < 1 || n_actions < 1)
    throw ConfigError("TabularMDP: empty state or action set");
  if (discount <= 0.0 || discount >= 1.0)
    throw ConfigError("TabularMDP: discount must lie in (0,1)");
  if (static_cast<int>(transition.size()) != n_actions)
    throw ConfigError("TabularMDP: one transition matrix per action required");
  for (const Mat& p : transition) {
    if (p.rows() != n_states || p.cols() != n_states)
      throw ConfigError("TabularMDP: transition matrix shape mismatch");
    for (int s = 0; s < n_states; ++s)
      if (std::abs(p.row(s).sum() - 1.0) > 1e-12 || p.row(s).minCoeff() < 0.0)
        throw ConfigError("TabularMDP: transition row is not a distribution");
  }
  if (reward.rows() != n_states || reward.cols() != n_actions)
    throw ConfigError("TabularMDP: reward shape mismatch");
  if (initial_dist.size() != n_states ||
      std::abs(initial_dist.sum() - 1.0) > 1e-12 ||
      initial_dist.minCoeff() < 0.0)
    throw ConfigError("TabularMDP: initial_dist is not a distribution");
}

TabularMDP chain_mdp(int n_states, double discount, double slip) {
  if (n_states < 2) throw ConfigError("chain_mdp: need at least 2 states");
  if (discount <= 0.0 || discount >= 1.0)
    throw ConfigError("chain_mdp: discount must lie in (0,1)");
  if (slip < 0.0 || slip > 0.5) throw ConfigError("chain_mdp: bad slip");

  TabularMDP m;
  m.n_states = n_states;
  m.n_actions = 2;
  m.discount = discount;
  m.reward = Mat::Zero(n_states, 2);
  m.reward.row(n_states - 1).setConstant(1.0);
  m.initial_dist = Vec::Zero(n_states);
  m.initial_dist(0) = 1.0;
  m.transition.assign(2, Mat::Zero(n_states, n_states));
  for (int s = 0; s < n_states - 1; ++s) {
    int left = std::max(s - 1, 0);
    int right = s + 1;
    m.transition[0](s, left) += 1.0 - slip;
    m.transition[0](s, right) += slip;
    m.transition[1](s, right) += 1.0 - slip;
    m.transition[1](s, left) += slip;
  }
  // absorbing terminal loop
  m.transition[0](n_states - 1, n_states - 1) = 1.0;
  m.transition[1](n_states - 1, n_states - 1) = 1.0;
  m.validate();
  return m;
}

}  // namespace mcpo::envs
