#include "mcpo/adam.hpp"

namespace mcpo::nn {

std::pair<Vec, AdamState> adam_step(const AdamState& state, const Vec& params,
                                    const Vec& gradient, bool maximize) {
  if (params.size() != gradient.size() ||
      params.size() != state.first_moment.size())
    throw ConfigError("adam_step: vector length mismatch");
  if (!gradient.allFinite())
    throw NumericalError("adam_step: non-finite gradient");

  AdamState s = state;
  s.step += 1;
  Vec g = maximize ? Vec(-gradient) : gradient;
  s.first_moment = s.beta1 * s.first_moment + (1.0 - s.beta1) * g;
  s.second_moment =
      s.beta2 * s.second_moment.array() + (1.0 - s.beta2) * g.array().square();
  double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  Vec update = (s.first_moment / bc1).array() /
               ((s.second_moment / bc2).array().sqrt() + s.epsilon);
  return {params - s.step_size * update, std::move(s)};
}

}  // namespace mcpo::nn
