#pragma once

#include "mcpo/env.hpp"

namespace mcpo::envs {

// Sparse-reward key-door gridworld on a fixed 6x6 room. A wall fills column
// 3 except for a locked door at (2,3); the agent starts at (5,0), the key
// sits at (0,2) and the goal at (5,5) behind the door. Walking onto the key
// picks it up; walking onto the closed door opens it only while holding the
// key. Reward is +1 exactly once, on reaching the goal, which ends the
// episode. Observation is a flat one-hot block: agent cell (36), key cell
// when not yet held (36), key-held flag, door-open flag.
class KeyDoorEnv final : public Env {
 public:
  static constexpr int kSize = 6;
  static constexpr int kObsDim = kSize * kSize * 2 + 2;

  KeyDoorEnv();

  const EnvSpec& spec() const override { return spec_; }
  Vec get_state() const override;
  void set_state(const Vec& s) override;

  bool key_held() const { return key_held_; }
  bool door_open() const { return door_open_; }
  std::pair<int, int> agent() const { return {agent_r_, agent_c_}; }

 protected:
  Vec do_reset() override;
  StepResult do_step(const Action& action) override;

 private:
  Vec observe() const override;
  bool blocked(int r, int c) const;

  EnvSpec spec_;
  int agent_r_ = 5, agent_c_ = 0;
  bool key_held_ = false;
  bool door_open_ = false;

  static constexpr int kWallCol = 3;
  static constexpr int kDoorR = 2, kDoorC = 3;
  static constexpr int kKeyR = 0, kKeyC = 2;
  static constexpr int kGoalR = 5, kGoalC = 5;
  static constexpr int kStartR = 5, kStartC = 0;
};

}  // namespace mcpo::envs
