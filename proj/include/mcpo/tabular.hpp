#pragma once

#include <vector>

#include "mcpo/types.hpp"

namespace mcpo::envs {

// Explicit finite MDP: transition[a] is the SxS row-stochastic matrix for
// action a, reward is SxA, discount in (0,1).
struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  std::vector<Mat> transition;  // one SxS matrix per action
  Mat reward;                   // SxA
  double discount = 0.99;
  Vec initial_dist;             // length S

  void validate() const;
};

// Fixed chain walk: states 0..n-1, two actions (0 = left, 1 = right).
// A move goes the intended way with probability 1 - slip and the opposite
// way with probability slip, clamped at the ends. State n-1 is an absorbing
// loop paying reward 1 per step; all other rewards are 0. Episodes start at
// state 0.
TabularMDP chain_mdp(int n_states, double discount, double slip = 0.1);

}  // namespace mcpo::envs
