#pragma once

#include "mcpo/adam.hpp"
#include "mcpo/attention.hpp"
#include "mcpo/objectives.hpp"
#include "mcpo/policy_memory.hpp"

namespace mcpo {

using objectives::BuiltLoss;
using rollout::MinibatchView;

// One policy evaluated on a minibatch without gradients: distribution per
// row, values, and log-probs at the stored actions.
struct PolicyEval {
  Mat mean_or_logits;
  Vec log_std;
  Vec values;
  Vec logprob;
};
PolicyEval eval_policy(const Vec& params, const nn::NetArch& arch,
                       const MinibatchView& view);

// closed-form KL(p || q) per minibatch row
Vec row_kls(const PolicyEval& p, const PolicyEval& q, const nn::NetArch& arch);

// D(a,b): mean closed-form KL between the two policies over a state batch.
double policy_distance(const Vec& a, const Vec& b, const nn::NetArch& arch,
                       const Mat& states);

// The 12 context features, in table order: D(theta,psi_old),
// D(theta_old,psi_old), D(theta_old,theta), then estimated return, entropy
// and value-loss triples for (psi_old, theta_old, theta). Estimated returns
// are mean tau*A with the view's (normalized) advantages; entropies are mean
// negative log-prob at the stored actions.
Vec context_features(const PolicyEval& theta, const PolicyEval& psi_old,
                     const MinibatchView& view, const nn::NetArch& arch);

// per-timestep weight between the two trust regions:
// sigmoid(R_t(psi) - R_t(theta_old)), computed stably and never
// differentiated through
double alpha_t(double r_psi, double r_theta_old);
Vec alpha_rows(const PolicyEval& psi, const MinibatchView& view);

// two-level penalty: beta_max when D(theta_old,theta) > D(theta_old,psi)
double switching_beta(const Vec& theta, const Vec& theta_old, const Vec& psi,
                      const nn::NetArch& arch, const Mat& states,
                      double beta_min, double beta_max);

// Diversity-promoting write: appends theta iff D(theta,psi) >= D(theta_old,psi)
// on the given states (strict uses >), evicting the oldest entry at capacity.
// Returns whether a write occurred.
bool memory_write(PolicyMemory& memory, const Vec& theta, const Vec& theta_old,
                  const Vec& psi, const nn::NetArch& arch, const Mat& states,
                  long created_at_update, bool strict = false);

// Two-trust-region surrogate on the tape:
// mean(tau*A) - beta * mean((1-alpha)*KL(old||new) + alpha*KL(psi||new)),
// combined with value and entropy terms like the baselines. The virtual
// policy enters only through constants (no gradient into the attention net).
BuiltLoss build_l1_loss(nn::Tape& tape, nn::Tape::Var flat,
                        const nn::NetArch& arch, const MinibatchView& view,
                        const PolicyEval& psi, const Vec& alpha, double beta,
                        const objectives::ObjectiveConfig& cfg,
                        double* kl_psi_out = nullptr);

// scalar value of the bare surrogate (no value/entropy terms)
double l1_loss(const MinibatchView& view, const Vec& theta,
               const nn::NetArch& arch, const PolicyEval& psi,
               const Vec& alpha, double beta);

// L2 = mean(tau_t(psi_phi) * A_t) and its exact gradient in phi, chaining
// through the snapshot combination, softmax, dropout and hidden layer.
std::pair<double, Vec> l2_loss_and_grad(const MinibatchView& view,
                                        const PolicyMemory& memory,
                                        const AttentionNet& net,
                                        const Vec& context,
                                        const nn::NetArch& arch,
                                        const Vec* dropout_mask);

enum class WriteRule { Diversity, Frequent, Uniform, Sparse };
enum class AlphaMode { Learned, Fixed };
enum class AttentionVariant { Learned, MeanPsi, HalfFeature };
enum class BetaMode { Switching, Annealed, Adaptive };

struct McpoConfig {
  int memory_capacity = 5;
  double beta_min = 0.01;
  double beta_max = 10.0;
  WriteRule write_rule = WriteRule::Diversity;
  bool write_strict = false;  // use '>' instead of '>=' in the write test
  int write_interval = 10;    // uniform: 10, sparse: 100 (set by the harness)
  AlphaMode alpha_mode = AlphaMode::Learned;
  double alpha_fixed = 0.5;
  AttentionVariant attention = AttentionVariant::Learned;
  BetaMode beta_mode = BetaMode::Switching;
  double beta0 = 1.0;         // annealed start value
  long t_total_updates = 0;   // annealed denominator
  double d_targ = 0.03;       // adaptive target
  bool dropout_enabled = true;

  int context_dim() const {
    return attention == AttentionVariant::HalfFeature ? 6 : 12;
  }
};

struct McpoState {
  nn::NetArch arch;
  Vec theta;
  Vec theta_old;
  Vec psi_old;
  PolicyMemory memory{1};
  AttentionNet attention;
  nn::AdamState adam_theta;
  nn::AdamState adam_phi;
  long update_count = 0;
  double beta_adaptive = 1.0;  // adaptive-beta ablation state
};

// Fresh state per Algorithm start: theta = theta_old = psi_old = theta0,
// empty memory (the virtual policy falls back to theta_old until the first
// write).
McpoState make_mcpo_state(const nn::NetArch& arch, Vec theta0,
                          const McpoConfig& cfg, double adam_step_size,
                          std::uint64_t seed);

struct UpdateDiag {
  double mean_alpha = 0.0;
  double beta = 0.0;
  double d_old_theta = 0.0;
  double d_old_psi = 0.0;
  bool wrote = false;
  int argmax_slot = -1;
  int memory_size = 0;
  double surrogate = 0.0, value_loss = 0.0, entropy = 0.0;
  double kl_old = 0.0, kl_psi = 0.0, l2 = 0.0;
};

// One minibatch update, in order: context features, virtual policy, theta
// ascent on L1, phi ascent on L2, diversity-gated memory write with the
// post-step theta, psi_old <- psi. Returns the updated state; any failure
// throws and leaves the input state untouched.
McpoState mcpo_update(const McpoState& state, const McpoConfig& cfg,
                      const objectives::ObjectiveConfig& obj,
                      const MinibatchView& view, RngStream& rng,
                      UpdateDiag* diag = nullptr);

}  // namespace mcpo
