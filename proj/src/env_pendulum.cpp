#include "mcpo/env_pendulum.hpp"

namespace mcpo::envs {

namespace {
double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0) a += 2.0 * M_PI;
  return a - M_PI;
}
}  // namespace

PendulumEnv::PendulumEnv() {
  spec_.id = "pendulum";
  spec_.obs_dim = 3;
  Vec lo(1), hi(1);
  lo << -kMaxTorque;
  hi << kMaxTorque;
  spec_.action_space = ActionSpace::box(lo, hi);
  spec_.max_episode_len = 200;
}

Vec PendulumEnv::observe() const {
  Vec o(3);
  o << std::cos(phi_), std::sin(phi_), phi_dot_;
  return o;
}

Vec PendulumEnv::do_reset() {
  phi_ = rng_.uniform(-M_PI, M_PI);
  phi_dot_ = rng_.uniform(-1.0, 1.0);
  return observe();
}

StepResult PendulumEnv::do_step(const Action& action) {
  if (action.values.size() != 1)
    throw InputError("pendulum: expected a 1-dim continuous action");
  double u = std::clamp(action.values(0), -kMaxTorque, kMaxTorque);

  double phi_w = wrap_angle(phi_);
  double reward = -(phi_w * phi_w + 0.1 * phi_dot_ * phi_dot_ + 0.001 * u * u);

  // semi-implicit Euler: velocity first, then position with the new velocity
  double acc = 3.0 * g_ / (2.0 * kLength) * std::sin(phi_) +
               3.0 / (kMass * kLength * kLength) * u;
  phi_dot_ = std::clamp(phi_dot_ + acc * kDt, -kMaxSpeed, kMaxSpeed);
  phi_ = phi_ + phi_dot_ * kDt;

  return {observe(), reward, false, false};
}

double PendulumEnv::energy() const {
  // moment of inertia m l^2 / 3 about the pivot, center of mass at l/2,
  // phi measured from upright so potential peaks at phi = 0
  double inertia = kMass * kLength * kLength / 3.0;
  return 0.5 * inertia * phi_dot_ * phi_dot_ +
         kMass * g_ * (kLength / 2.0) * std::cos(phi_);
}

Vec PendulumEnv::get_state() const {
  Vec s(3);
  s << phi_, phi_dot_, g_;
  return s;
}

void PendulumEnv::set_state(const Vec& s) {
  phi_ = s(0);
  phi_dot_ = s(1);
  g_ = s(2);
}

}  // namespace mcpo::envs
