#pragma once

#include "mcpo/env.hpp"

namespace mcpo::envs {

// Torque-limited pendulum swing-up: observation (cos phi, sin phi, phi_dot),
// one continuous torque clipped to [-2, 2], reward
// -(phi^2 + 0.1 phi_dot^2 + 0.001 u^2) with phi wrapped to [-pi, pi].
// Semi-implicit Euler, h = 0.05; mass 1, length 1, g 10. Episodes only
// truncate (length 200), they never terminate.
class PendulumEnv final : public Env {
 public:
  PendulumEnv();

  const EnvSpec& spec() const override { return spec_; }
  Vec get_state() const override;
  void set_state(const Vec& s) override;

  // zero-gravity/zero-torque variant keeps total energy constant; used by
  // the integrator tolerance checks
  void set_gravity(double g) { g_ = g; }
  double energy() const;

 protected:
  Vec do_reset() override;
  StepResult do_step(const Action& action) override;

 private:
  Vec observe() const override;

  EnvSpec spec_;
  double phi_ = 0.0;
  double phi_dot_ = 0.0;
  double g_ = 10.0;

  static constexpr double kDt = 0.05;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;
  static constexpr double kMaxTorque = 2.0;
  static constexpr double kMaxSpeed = 8.0;
};

}  // namespace mcpo::envs
