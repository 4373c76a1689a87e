#pragma once

#include "mcpo/env.hpp"

namespace mcpo::envs {

// Classic cart-pole balance: observation (x, x_dot, theta, theta_dot),
// two discrete push actions, +1 reward per step, terminates when the pole
// falls past 12 degrees or the cart leaves [-2.4, 2.4].
class CartpoleEnv final : public Env {
 public:
  CartpoleEnv();

  const EnvSpec& spec() const override { return spec_; }
  Vec observe() const override { return state_; }
  Vec get_state() const override { return state_; }
  void set_state(const Vec& s) override { state_ = s; }

 protected:
  Vec do_reset() override;
  StepResult do_step(const Action& action) override;

 private:
  EnvSpec spec_;
  Vec state_;  // x, x_dot, theta, theta_dot

  static constexpr double kGravity = 9.8;
  static constexpr double kMassCart = 1.0;
  static constexpr double kMassPole = 0.1;
  static constexpr double kPoleHalfLength = 0.5;
  static constexpr double kForceMag = 10.0;
  static constexpr double kDt = 0.02;
  static constexpr double kThetaLimit = 12.0 * M_PI / 180.0;
  static constexpr double kXLimit = 2.4;
};

}  // namespace mcpo::envs
