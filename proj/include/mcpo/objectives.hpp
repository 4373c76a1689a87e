#pragma once

#include "mcpo/net.hpp"
#include "mcpo/rollout.hpp"

namespace mcpo::objectives {

using nn::Tape;
using rollout::MinibatchView;

enum class ObjectiveKind { PpoClip, KlFixed, KlAdaptive, MdpoAnneal, Mcpo };

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::PpoClip;
  double clip_eps = 0.2;
  double beta = 0.1;      // kl-fixed coefficient; also adaptive initial value
  double d_targ = 0.01;   // kl-adaptive target
  double beta0 = 1.0;     // mdpo-anneal start value
  double c1 = 0.5;        // value coefficient
  double c2 = 0.0;        // entropy coefficient
};

// importance ratio tau = pi_new / pi_old from log-probs; log-ratios beyond
// +-60 are clamped (with a warning) instead of overflowing
double ratio(double logprob_new, double logprob_old);

// min(tau*A, clip(tau, 1-eps, 1+eps)*A)
double ppo_clip_term(double tau, double adv, double eps);

// multiplicative rule from the cited adaptive-KL scheme: x2 above
// 1.5*d_targ, /2 below d_targ/1.5, clamped to [1e-4, 1e4]
double adaptive_beta_update(double beta, double measured_kl, double d_targ);

// beta0 * (1 - i/t_total), floored at zero
double mdpo_anneal_beta(long step, long t_total, double beta0);

// surrogate - c1*value_loss + c2*entropy (maximized)
double full_loss(double surrogate, double value_loss, double entropy,
                 double c1, double c2);

// One policy evaluated on a minibatch, as tape nodes. kl_old is the
// closed-form per-row KL from the sampling policy cached in the view.
struct PolicyTerms {
  nn::TapeForwardOut fwd;
  Tape::Var logprob;         // Bx1
  Tape::Var tau;             // Bx1
  Tape::Var kl_old;          // Bx1
  Tape::Var surrogate_rows;  // Bx1, tau*A
  Tape::Var value_loss;      // scalar
  Tape::Var neg_logprob;     // scalar approximate entropy
};
PolicyTerms policy_terms_on_tape(Tape& tape, Tape::Var flat,
                                 const nn::NetArch& arch,
                                 const MinibatchView& view);

// Scalar losses on a fully built tape, per objective. Every builder returns
// the node to maximize, already combined via full_loss.
struct BuiltLoss {
  Tape::Var total;      // maximize this
  double surrogate = 0; // diagnostics, plain values
  double value_loss = 0;
  double entropy = 0;
  double kl_old = 0;
};
BuiltLoss build_ppo_clip_loss(Tape& tape, Tape::Var flat,
                              const nn::NetArch& arch,
                              const MinibatchView& view,
                              const ObjectiveConfig& cfg);
BuiltLoss build_kl_penalty_loss(Tape& tape, Tape::Var flat,
                                const nn::NetArch& arch,
                                const MinibatchView& view, double beta,
                                const ObjectiveConfig& cfg);

// Spec-level scalar evaluation of L^KL on a minibatch (no value/entropy
// terms): mean(tau*A) - beta * mean(KL(pi_old || pi_theta)).
double kl_penalty_loss(const MinibatchView& view, const Vec& theta,
                       const nn::NetArch& arch, double beta);

// softmax rows of cached categorical logits
Mat old_probs(const MinibatchView& view);

}  // namespace mcpo::objectives
