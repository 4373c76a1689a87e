#pragma once

#include "mcpo/types.hpp"

namespace mcpo::nn {

// Bias-corrected Adam. One state per parameter vector; step counts updates.
struct AdamState {
  long step = 0;
  Vec first_moment;
  Vec second_moment;
  double step_size = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState make(int dim, double step_size) {
    AdamState s;
    s.first_moment = Vec::Zero(dim);
    s.second_moment = Vec::Zero(dim);
    s.step_size = step_size;
    return s;
  }
};

// Returns the updated parameters and optimizer state; maximize negates the
// gradient (gradient ascent).
std::pair<Vec, AdamState> adam_step(const AdamState& state, const Vec& params,
                                    const Vec& gradient, bool maximize);

}  // namespace mcpo::nn
