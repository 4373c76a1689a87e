#pragma once

#include "mcpo/types.hpp"

namespace mcpo::nn {

enum class DistFamily { Categorical, DiagGaussian };

// Parameters of one action distribution π(·|s): either categorical logits or
// diagonal-Gaussian mean with a state-independent log-std vector.
struct DistParams {
  DistFamily family = DistFamily::Categorical;
  Vec logits_or_mean;  // logits (categorical) or mean (gaussian)
  Vec log_std;         // gaussian only; same length as mean

  static DistParams categorical(Vec logits) {
    return {DistFamily::Categorical, std::move(logits), Vec()};
  }
  static DistParams diag_gaussian(Vec mean, Vec log_std) {
    return {DistFamily::DiagGaussian, std::move(mean), std::move(log_std)};
  }
  int dim() const { return static_cast<int>(logits_or_mean.size()); }
};

// Discrete index or continuous vector, depending on the action space.
struct Action {
  int index = 0;
  Vec values;

  static Action discrete(int i) { return {i, Vec()}; }
  static Action continuous(Vec v) { return {0, std::move(v)}; }
};

inline Vec softmax(const Vec& logits) {
  Vec z = (logits.array() - logits.maxCoeff()).exp();
  return z / z.sum();
}

inline Vec log_softmax(const Vec& logits) {
  double m = logits.maxCoeff();
  double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

double log_prob(const DistParams& dist, const Action& action);
double entropy(const DistParams& dist);

// KL(p || q), closed form; both must share family and dimension.
double kl(const DistParams& p, const DistParams& q);

// Draws an action from the distribution; gaussian actions are returned
// pre-clip (the environment clips to its box before dynamics).
Action sample(const DistParams& dist, RngStream& rng);

}  // namespace mcpo::nn
