#pragma once

#include "mcpo/tape.hpp"
#include "mcpo/types.hpp"

namespace mcpo {

// Feedforward attention over memory slots: ctx_dim inputs, one hidden layer
// of n_slots units (tanh) with dropout p = 0.5, and an n_slots softmax
// output. Slots beyond the occupied count are masked out before the softmax
// so they receive exactly zero weight.
struct AttentionNet {
  int ctx_dim = 12;
  int n_slots = 0;
  Vec phi;  // [W1(ctx x n) b1(n) W2(n x n) b2(n)], column-major

  static int param_count(int ctx_dim, int n_slots) {
    return ctx_dim * n_slots + n_slots + n_slots * n_slots + n_slots;
  }
  static AttentionNet init(int ctx_dim, int n_slots, std::uint64_t seed);
};

constexpr double kDropoutProb = 0.5;

// Fresh inverted-dropout mask for the hidden layer: entries are 0 or 1/(1-p).
Vec sample_dropout_mask(int n, RngStream& rng, double p = kDropoutProb);

// Softmax attention weights over the first `occupied` slots. Pass a dropout
// mask while training; nullptr runs the deterministic eval path. The result
// has length `occupied` and sums to 1.
Vec attention_weights(const AttentionNet& net, const Vec& context,
                      int occupied, const Vec* dropout_mask);

// Tape-recorded weights (same arithmetic as attention_weights) for
// backpropagating through the attention network. Returns a 1 x n_slots node;
// masked slots carry weight 0.
nn::Tape::Var attention_weights_on_tape(nn::Tape& tape, nn::Tape::Var phi,
                                        const AttentionNet& net,
                                        const Vec& context, int occupied,
                                        const Vec* dropout_mask);

}  // namespace mcpo
