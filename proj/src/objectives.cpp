#include "mcpo/objectives.hpp"

#include <cstdio>

namespace mcpo::objectives {

using nn::PolicyHead;

double ratio(double logprob_new, double logprob_old) {
  if (!std::isfinite(logprob_new) || !std::isfinite(logprob_old))
    throw NumericalError("ratio: non-finite log-prob");
  double diff = logprob_new - logprob_old;
  if (std::abs(diff) > 60.0) {
    std::fprintf(stderr, "[objectives] warning: log-ratio %.3g clamped\n",
                 diff);
    diff = std::clamp(diff, -60.0, 60.0);
  }
  return std::exp(diff);
}

double ppo_clip_term(double tau, double adv, double eps) {
  if (eps <= 0.0 || eps >= 1.0) throw ConfigError("ppo_clip_term: bad epsilon");
  double clipped = std::clamp(tau, 1.0 - eps, 1.0 + eps);
  return std::min(tau * adv, clipped * adv);
}

double adaptive_beta_update(double beta, double measured_kl, double d_targ) {
  if (measured_kl > 1.5 * d_targ)
    beta *= 2.0;
  else if (measured_kl < d_targ / 1.5)
    beta *= 0.5;
  return std::clamp(beta, 1e-4, 1e4);
}

double mdpo_anneal_beta(long step, long t_total, double beta0) {
  if (t_total <= 0) throw ConfigError("mdpo_anneal_beta: t_total must be > 0");
  double frac = 1.0 - static_cast<double>(step) / static_cast<double>(t_total);
  return beta0 * std::max(frac, 0.0);
}

double full_loss(double surrogate, double value_loss, double entropy,
                 double c1, double c2) {
  return surrogate - c1 * value_loss + c2 * entropy;
}

Mat old_probs(const MinibatchView& view) {
  Mat p(view.old_mean_or_logits.rows(), view.old_mean_or_logits.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Vec row = view.old_mean_or_logits.row(i).transpose();
    p.row(i) = nn::softmax(row).transpose();
  }
  return p;
}

PolicyTerms policy_terms_on_tape(Tape& tape, Tape::Var flat,
                                 const nn::NetArch& arch,
                                 const MinibatchView& view) {
  PolicyTerms t;
  t.fwd = nn::forward_on_tape(tape, flat, arch, view.states);
  t.logprob = nn::log_prob_on_tape(tape, t.fwd, arch, view.disc_actions,
                                   view.cont_actions);

  Mat lp_old = view.logprob_old;
  t.tau = tape.exp_op(tape.clip(tape.cadd(t.logprob, -lp_old), -60.0, 60.0));
  t.surrogate_rows = tape.cmul(t.tau, view.advantage);

  if (arch.policy_head == PolicyHead::CategoricalLogits)
    t.kl_old = tape.categorical_kl_from(t.fwd.mean_or_logits, old_probs(view));
  else
    t.kl_old = tape.gaussian_kl_from(t.fwd.mean_or_logits, t.fwd.log_std,
                                     view.old_mean_or_logits, view.old_log_std);

  Mat tgt = view.value_target;
  t.value_loss = tape.mean_all(tape.square(tape.cadd(t.fwd.values, -tgt)));
  t.neg_logprob = tape.mean_all(tape.scale(t.logprob, -1.0));
  return t;
}

namespace {
BuiltLoss finish(Tape& tape, const PolicyTerms& t, Tape::Var surrogate,
                 Tape::Var kl_mean, const ObjectiveConfig& cfg) {
  BuiltLoss out;
  Tape::Var total =
      tape.add(tape.add(surrogate, tape.scale(t.value_loss, -cfg.c1)),
               tape.scale(t.neg_logprob, cfg.c2));
  out.total = total;
  out.surrogate = tape.scalar(surrogate);
  out.value_loss = tape.scalar(t.value_loss);
  out.entropy = tape.scalar(t.neg_logprob);
  out.kl_old = kl_mean >= 0 ? tape.scalar(kl_mean) : 0.0;
  return out;
}
}  // namespace

BuiltLoss build_ppo_clip_loss(Tape& tape, Tape::Var flat,
                              const nn::NetArch& arch,
                              const MinibatchView& view,
                              const ObjectiveConfig& cfg) {
  PolicyTerms t = policy_terms_on_tape(tape, flat, arch, view);
  Tape::Var clipped = tape.cmul(
      tape.clip(t.tau, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps),
      view.advantage);
  Tape::Var surrogate =
      tape.mean_all(tape.minimum(t.surrogate_rows, clipped));
  Tape::Var kl_mean = tape.mean_all(t.kl_old);
  return finish(tape, t, surrogate, kl_mean, cfg);
}

BuiltLoss build_kl_penalty_loss(Tape& tape, Tape::Var flat,
                                const nn::NetArch& arch,
                                const MinibatchView& view, double beta,
                                const ObjectiveConfig& cfg) {
  PolicyTerms t = policy_terms_on_tape(tape, flat, arch, view);
  Tape::Var kl_mean = tape.mean_all(t.kl_old);
  Tape::Var surrogate = tape.add(tape.mean_all(t.surrogate_rows),
                                 tape.scale(kl_mean, -beta));
  return finish(tape, t, surrogate, kl_mean, cfg);
}

double kl_penalty_loss(const MinibatchView& view, const Vec& theta,
                       const nn::NetArch& arch, double beta) {
  if (beta < 0.0) throw ConfigError("kl_penalty_loss: beta must be >= 0");
  Tape tape;
  Tape::Var flat = tape.param_flat(theta);
  PolicyTerms t = policy_terms_on_tape(tape, flat, arch, view);
  Tape::Var loss = tape.add(tape.mean_all(t.surrogate_rows),
                            tape.scale(tape.mean_all(t.kl_old), -beta));
  return tape.scalar(loss);
}

}  // namespace mcpo::objectives
