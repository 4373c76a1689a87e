#include "mcpo/env_keydoor.hpp"

namespace mcpo::envs {

KeyDoorEnv::KeyDoorEnv() {
  spec_.id = "keydoor";
  spec_.obs_dim = kObsDim;
  spec_.action_space = ActionSpace::make_discrete(4);  // up down left right
  spec_.max_episode_len = 45;
}

bool KeyDoorEnv::blocked(int r, int c) const {
  if (r < 0 || r >= kSize || c < 0 || c >= kSize) return true;
  if (c == kWallCol) {
    if (r == kDoorR && c == kDoorC) return !door_open_ && !key_held_;
    return true;  // solid wall
  }
  return false;
}

Vec KeyDoorEnv::observe() const {
  Vec o = Vec::Zero(kObsDim);
  o(agent_r_ * kSize + agent_c_) = 1.0;
  if (!key_held_) o(kSize * kSize + kKeyR * kSize + kKeyC) = 1.0;
  o(2 * kSize * kSize) = key_held_ ? 1.0 : 0.0;
  o(2 * kSize * kSize + 1) = door_open_ ? 1.0 : 0.0;
  return o;
}

Vec KeyDoorEnv::do_reset() {
  agent_r_ = kStartR;
  agent_c_ = kStartC;
  key_held_ = false;
  door_open_ = false;
  return observe();
}

StepResult KeyDoorEnv::do_step(const Action& action) {
  static constexpr int dr[4] = {-1, 1, 0, 0};
  static constexpr int dc[4] = {0, 0, -1, 1};
  if (action.index < 0 || action.index >= 4)
    throw InputError("keydoor: action must be in [0,4)");

  int nr = agent_r_ + dr[action.index];
  int nc = agent_c_ + dc[action.index];
  if (!blocked(nr, nc)) {
    agent_r_ = nr;
    agent_c_ = nc;
    if (agent_r_ == kKeyR && agent_c_ == kKeyC) key_held_ = true;
    if (agent_r_ == kDoorR && agent_c_ == kDoorC && key_held_)
      door_open_ = true;
  }
  bool reached_goal = agent_r_ == kGoalR && agent_c_ == kGoalC;
  return {observe(), reached_goal ? 1.0 : 0.0, reached_goal, false};
}

Vec KeyDoorEnv::get_state() const {
  Vec s(4);
  s << agent_r_, agent_c_, key_held_ ? 1.0 : 0.0, door_open_ ? 1.0 : 0.0;
  return s;
}

void KeyDoorEnv::set_state(const Vec& s) {
  agent_r_ = static_cast<int>(s(0));
  agent_c_ = static_cast<int>(s(1));
  key_held_ = s(2) != 0.0;
  door_open_ = s(3) != 0.0;
}

}  // namespace mcpo::envs
