#include "mcpo/env_cartpole.hpp"

namespace mcpo::envs {

CartpoleEnv::CartpoleEnv() {
  spec_.id = "cartpole";
  spec_.obs_dim = 4;
  spec_.action_space = ActionSpace::make_discrete(2);
  spec_.max_episode_len = 500;
  state_ = Vec::Zero(4);
}

Vec CartpoleEnv::do_reset() {
  for (int i = 0; i < 4; ++i) state_(i) = rng_.uniform(-0.05, 0.05);
  return state_;
}

StepResult CartpoleEnv::do_step(const Action& action) {
  if (action.index < 0 || action.index > 1)
    throw InputError("cartpole: action must be 0 or 1");
  double force = action.index == 1 ? kForceMag : -kForceMag;
  double x = state_(0), x_dot = state_(1), th = state_(2), th_dot = state_(3);

  double total_mass = kMassCart + kMassPole;
  double pml = kMassPole * kPoleHalfLength;
  double cos_th = std::cos(th), sin_th = std::sin(th);
  double temp = (force + pml * th_dot * th_dot * sin_th) / total_mass;
  double th_acc =
      (kGravity * sin_th - cos_th * temp) /
      (kPoleHalfLength * (4.0 / 3.0 - kMassPole * cos_th * cos_th / total_mass));
  double x_acc = temp - pml * th_acc * cos_th / total_mass;

  x += kDt * x_dot;
  x_dot += kDt * x_acc;
  th += kDt * th_dot;
  th_dot += kDt * th_acc;
  state_ << x, x_dot, th, th_dot;

  bool fell = std::abs(th) > kThetaLimit || std::abs(x) > kXLimit;
  return {state_, 1.0, fell, false};
}

}  // namespace mcpo::envs
