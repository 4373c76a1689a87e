#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mcpo/dist.hpp"
#include "mcpo/tape.hpp"
#include "mcpo/types.hpp"

namespace mcpo::nn {

enum class Activation { Tanh, Relu };

enum class PolicyHead { CategoricalLogits, GaussianMean };

// Architecture of the policy+value network. Both heads share one flat
// parameter vector; gaussian policies carry a state-independent log_std.
struct NetArch {
  int input_dim = 0;
  std::vector<std::pair<int, Activation>> hidden;
  PolicyHead policy_head = PolicyHead::CategoricalLogits;
  int action_dim = 0;  // K (categorical) or D (gaussian)
  bool value_head = true;

  // 2-layer tanh trunk with h units, matching the vector-input default
  static NetArch mlp(int input_dim, PolicyHead head, int action_dim,
                     int h = 64) {
    NetArch a;
    a.input_dim = input_dim;
    a.hidden = {{h, Activation::Tanh}, {h, Activation::Tanh}};
    a.policy_head = head;
    a.action_dim = action_dim;
    return a;
  }
};

bool operator==(const NetArch& a, const NetArch& b);

// Flat layout: [W1 b1 W2 b2 ... Wp bp (log_std) Wv bv], matrices column-major.
int param_count(const NetArch& arch);

// Orthogonal trunk (gain sqrt(2)), small policy head (gain 0.01), unit value
// head, zero biases and log_std. Deterministic for a given seed.
Vec init_params(const NetArch& arch, std::uint64_t seed);

// Single-state evaluation.
struct ForwardOut {
  DistParams dist;
  double value = 0.0;
};
ForwardOut forward(const Vec& params, const NetArch& arch, const Vec& state);

// Batched evaluation: one row per state. mean_or_logits is BxK or BxD,
// log_std the shared vector (gaussian), values Bx1.
struct BatchForwardOut {
  Mat mean_or_logits;
  Vec log_std;
  Vec values;

  DistParams dist_row(const NetArch& arch, int i) const;
};
BatchForwardOut forward_batch(const Vec& params, const NetArch& arch,
                              const Mat& states);

// Tape-recorded batched forward used inside losses; `flat` is the parameter
// leaf (or any Px1 node, e.g. a virtual policy assembled on-tape).
struct TapeForwardOut {
  Tape::Var mean_or_logits;
  Tape::Var log_std = -1;  // gaussian only
  Tape::Var values = -1;
};
TapeForwardOut forward_on_tape(Tape& tape, Tape::Var flat, const NetArch& arch,
                               const Mat& states);

// log π(a_t|s_t) per row for fixed actions; returns a Bx1 node.
Tape::Var log_prob_on_tape(Tape& tape, const TapeForwardOut& fwd,
                           const NetArch& arch, const std::vector<int>& disc,
                           const Mat& cont);

// Exact reverse-mode gradient of a tape-built scalar loss at `params`.
using LossBuilder = std::function<Tape::Var(Tape&, Tape::Var)>;
Vec grad(const LossBuilder& loss_fn, const Vec& params);
double eval_loss(const LossBuilder& loss_fn, const Vec& params);

}  // namespace mcpo::nn
