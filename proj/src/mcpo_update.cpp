#include "mcpo/mcpo_update.hpp"

namespace mcpo {

using nn::PolicyHead;
using nn::Tape;

PolicyEval eval_policy(const Vec& params, const nn::NetArch& arch,
                       const MinibatchView& view) {
  nn::BatchForwardOut fwd = nn::forward_batch(params, arch, view.states);
  PolicyEval e;
  e.mean_or_logits = std::move(fwd.mean_or_logits);
  e.log_std = std::move(fwd.log_std);
  e.values = std::move(fwd.values);
  const bool discrete = arch.policy_head == PolicyHead::CategoricalLogits;
  // a states-only view (distance computations) carries no actions; log-probs
  // are only defined when the view stores them
  const bool have_actions =
      discrete ? view.disc_actions.size() == static_cast<size_t>(view.rows())
               : view.cont_actions.rows() == view.rows() &&
                     view.cont_actions.cols() == arch.action_dim;
  if (!have_actions) return e;
  e.logprob.resize(view.rows());
  for (int i = 0; i < view.rows(); ++i) {
    if (discrete) {
      Vec logits = e.mean_or_logits.row(i).transpose();
      e.logprob(i) = nn::log_softmax(logits)(view.disc_actions[i]);
    } else {
      Vec mu = e.mean_or_logits.row(i).transpose();
      e.logprob(i) = nn::log_prob(
          nn::DistParams::diag_gaussian(mu, e.log_std),
          nn::Action::continuous(view.cont_actions.row(i).transpose()));
    }
  }
  return e;
}

Vec row_kls(const PolicyEval& p, const PolicyEval& q, const nn::NetArch& arch) {
  const int rows = static_cast<int>(p.mean_or_logits.rows());
  Vec out(rows);
  const bool discrete = arch.policy_head == PolicyHead::CategoricalLogits;
  for (int i = 0; i < rows; ++i) {
    if (discrete) {
      Vec lp = p.mean_or_logits.row(i).transpose();
      Vec lq = q.mean_or_logits.row(i).transpose();
      out(i) = nn::kl(nn::DistParams::categorical(lp),
                      nn::DistParams::categorical(lq));
    } else {
      out(i) = nn::kl(
          nn::DistParams::diag_gaussian(p.mean_or_logits.row(i).transpose(),
                                        p.log_std),
          nn::DistParams::diag_gaussian(q.mean_or_logits.row(i).transpose(),
                                        q.log_std));
    }
  }
  return out;
}

namespace {
MinibatchView states_only_view(const Mat& states) {
  MinibatchView v;
  v.states = states;
  return v;
}

// old policy's cached outputs wrapped as a PolicyEval
PolicyEval old_eval(const MinibatchView& view) {
  PolicyEval e;
  e.mean_or_logits = view.old_mean_or_logits;
  e.log_std = view.old_log_std;
  e.values = view.value_old;
  e.logprob = view.logprob_old;
  return e;
}

Vec tau_rows(const Vec& logprob_new, const Vec& logprob_old) {
  Vec t(logprob_new.size());
  for (int i = 0; i < t.size(); ++i) {
    double diff =
        std::clamp(logprob_new(i) - logprob_old(i), -60.0, 60.0);
    t(i) = std::exp(diff);
  }
  return t;
}
}  // namespace

double policy_distance(const Vec& a, const Vec& b, const nn::NetArch& arch,
                       const Mat& states) {
  if (states.rows() == 0)
    throw InputError("policy_distance: empty state batch");
  MinibatchView v = states_only_view(states);
  PolicyEval ea = eval_policy(a, arch, v);
  PolicyEval eb = eval_policy(b, arch, v);
  double d = row_kls(ea, eb, arch).mean();
  if (!std::isfinite(d)) throw NumericalError("policy_distance: non-finite");
  return d;
}

Vec context_features(const PolicyEval& theta, const PolicyEval& psi_old,
                     const MinibatchView& view, const nn::NetArch& arch) {
  PolicyEval old = old_eval(view);
  Vec v(12);
  v(0) = row_kls(theta, psi_old, arch).mean();
  v(1) = row_kls(old, psi_old, arch).mean();
  v(2) = row_kls(old, theta, arch).mean();
  v(3) = tau_rows(psi_old.logprob, view.logprob_old)
             .cwiseProduct(view.advantage)
             .mean();
  v(4) = view.advantage.mean();  // tau(theta_old) = 1
  v(5) = tau_rows(theta.logprob, view.logprob_old)
             .cwiseProduct(view.advantage)
             .mean();
  v(6) = -psi_old.logprob.mean();
  v(7) = -view.logprob_old.mean();
  v(8) = -theta.logprob.mean();
  v(9) = (psi_old.values - view.value_target).array().square().mean();
  v(10) = (view.value_old - view.value_target).array().square().mean();
  v(11) = (theta.values - view.value_target).array().square().mean();
  for (int i = 0; i < 12; ++i)
    if (!std::isfinite(v(i)))
      throw NumericalError("context_features: feature " + std::to_string(i) +
                           " is non-finite");
  return v;
}

double alpha_t(double r_psi, double r_theta_old) {
  // stable two-way softmax of the estimated returns
  double d = r_psi - r_theta_old;
  if (d >= 0) return 1.0 / (1.0 + std::exp(-d));
  double e = std::exp(d);
  return e / (1.0 + e);
}

Vec alpha_rows(const PolicyEval& psi, const MinibatchView& view) {
  Vec tau_psi = tau_rows(psi.logprob, view.logprob_old);
  Vec a(view.rows());
  for (int i = 0; i < a.size(); ++i)
    a(i) = alpha_t(tau_psi(i) * view.advantage(i), view.advantage(i));
  return a;
}

double switching_beta(const Vec& theta, const Vec& theta_old, const Vec& psi,
                      const nn::NetArch& arch, const Mat& states,
                      double beta_min, double beta_max) {
  if (beta_min >= beta_max)
    throw ConfigError("switching_beta: beta_min must be below beta_max");
  double d_theta = policy_distance(theta_old, theta, arch, states);
  double d_psi = policy_distance(theta_old, psi, arch, states);
  return d_theta > d_psi ? beta_max : beta_min;
}

bool memory_write(PolicyMemory& memory, const Vec& theta, const Vec& theta_old,
                  const Vec& psi, const nn::NetArch& arch, const Mat& states,
                  long created_at_update, bool strict) {
  double d_theta = policy_distance(theta, psi, arch, states);
  double d_old = policy_distance(theta_old, psi, arch, states);
  bool write = strict ? d_theta > d_old : d_theta >= d_old;
  if (write) memory.push(theta, created_at_update);
  return write;
}

BuiltLoss build_l1_loss(Tape& tape, Tape::Var flat, const nn::NetArch& arch,
                        const MinibatchView& view, const PolicyEval& psi,
                        const Vec& alpha, double beta,
                        const objectives::ObjectiveConfig& cfg,
                        double* kl_psi_out) {
  objectives::PolicyTerms t =
      objectives::policy_terms_on_tape(tape, flat, arch, view);

  Tape::Var kl_psi;
  if (arch.policy_head == PolicyHead::CategoricalLogits) {
    Mat probs(psi.mean_or_logits.rows(), psi.mean_or_logits.cols());
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      Vec row = psi.mean_or_logits.row(i).transpose();
      probs.row(i) = nn::softmax(row).transpose();
    }
    kl_psi = tape.categorical_kl_from(t.fwd.mean_or_logits, probs);
  } else {
    kl_psi = tape.gaussian_kl_from(t.fwd.mean_or_logits, t.fwd.log_std,
                                   psi.mean_or_logits, psi.log_std);
  }

  Vec one_minus_alpha = Vec::Ones(alpha.size()) - alpha;
  Tape::Var penalty_rows = tape.add(tape.cmul(t.kl_old, one_minus_alpha),
                                    tape.cmul(kl_psi, alpha));
  Tape::Var penalty = tape.mean_all(penalty_rows);
  Tape::Var surrogate = tape.add(tape.mean_all(t.surrogate_rows),
                                 tape.scale(penalty, -beta));

  BuiltLoss out;
  out.total = tape.add(tape.add(surrogate, tape.scale(t.value_loss, -cfg.c1)),
                       tape.scale(t.neg_logprob, cfg.c2));
  out.surrogate = tape.scalar(surrogate);
  out.value_loss = tape.scalar(t.value_loss);
  out.entropy = tape.scalar(t.neg_logprob);
  out.kl_old = tape.value(t.kl_old).mean();
  if (kl_psi_out) *kl_psi_out = tape.value(kl_psi).mean();
  return out;
}

double l1_loss(const MinibatchView& view, const Vec& theta,
               const nn::NetArch& arch, const PolicyEval& psi,
               const Vec& alpha, double beta) {
  Tape tape;
  Tape::Var flat = tape.param_flat(theta);
  objectives::ObjectiveConfig cfg;
  cfg.c1 = 0.0;
  cfg.c2 = 0.0;
  BuiltLoss l = build_l1_loss(tape, flat, arch, view, psi, alpha, beta, cfg);
  return l.surrogate;
}

std::pair<double, Vec> l2_loss_and_grad(const MinibatchView& view,
                                        const PolicyMemory& memory,
                                        const AttentionNet& net,
                                        const Vec& context,
                                        const nn::NetArch& arch,
                                        const Vec* dropout_mask) {
  if (memory.empty()) throw UsageError("l2_loss_and_grad: memory is empty");

  Tape tape;
  Tape::Var phi = tape.param_flat(net.phi);
  Tape::Var weights = attention_weights_on_tape(tape, phi, net, context,
                                                memory.size(), dropout_mask);

  // psi = sum_i w_i theta_i as a flat column; empty slots contribute zero
  Mat snaps = Mat::Zero(memory.entry(0).params->size(), net.n_slots);
  snaps.leftCols(memory.size()) = memory.snapshot_matrix();
  Tape::Var psi =
      tape.matmul(tape.constant(snaps), tape.transpose(weights));

  nn::TapeForwardOut fwd = nn::forward_on_tape(tape, psi, arch, view.states);
  Tape::Var logprob = nn::log_prob_on_tape(tape, fwd, arch, view.disc_actions,
                                           view.cont_actions);
  Mat lp_old = view.logprob_old;
  Tape::Var tau =
      tape.exp_op(tape.clip(tape.cadd(logprob, -lp_old), -60.0, 60.0));
  Tape::Var l2 = tape.mean_all(tape.cmul(tau, view.advantage));
  tape.backward(l2);
  return {tape.scalar(l2), tape.grad_flat(phi)};
}

McpoState make_mcpo_state(const nn::NetArch& arch, Vec theta0,
                          const McpoConfig& cfg, double adam_step_size,
                          std::uint64_t seed) {
  McpoState s;
  s.arch = arch;
  s.theta = theta0;
  s.theta_old = theta0;
  s.psi_old = std::move(theta0);
  s.memory = PolicyMemory(cfg.memory_capacity);
  s.attention =
      AttentionNet::init(cfg.context_dim(), cfg.memory_capacity, seed);
  s.adam_theta =
      nn::AdamState::make(static_cast<int>(s.theta.size()), adam_step_size);
  s.adam_phi = nn::AdamState::make(static_cast<int>(s.attention.phi.size()),
                                   adam_step_size);
  s.beta_adaptive = 1.0;
  return s;
}

McpoState mcpo_update(const McpoState& state, const McpoConfig& cfg,
                      const objectives::ObjectiveConfig& obj,
                      const MinibatchView& view, RngStream& rng,
                      UpdateDiag* diag) {
  McpoState next = state;
  UpdateDiag d;

  // (1) context from (psi_old, theta, theta_old) on this minibatch
  PolicyEval theta_eval = eval_policy(next.theta, next.arch, view);
  PolicyEval psi_old_eval = eval_policy(next.psi_old, next.arch, view);
  Vec v_full = context_features(theta_eval, psi_old_eval, view, next.arch);
  Vec v = cfg.attention == AttentionVariant::HalfFeature ? Vec(v_full.head(6))
                                                         : v_full;

  // (2) virtual policy from memory; empty memory falls back to theta_old
  Vec psi;
  Vec weights;
  Vec mask;
  const Vec* mask_ptr = nullptr;
  const bool have_memory = !next.memory.empty();
  if (have_memory) {
    if (cfg.attention == AttentionVariant::MeanPsi) {
      weights = uniform_weights(next.memory);
    } else {
      if (cfg.dropout_enabled) {
        mask = sample_dropout_mask(next.attention.n_slots, rng);
        mask_ptr = &mask;
      }
      weights =
          attention_weights(next.attention, v, next.memory.size(), mask_ptr);
    }
    psi = virtual_policy(weights, next.memory);
    int best = 0;
    weights.maxCoeff(&best);
    d.argmax_slot = best;
  } else {
    psi = next.theta_old;
  }
  PolicyEval psi_eval = eval_policy(psi, next.arch, view);

  // alpha and beta for this minibatch
  Vec alpha = cfg.alpha_mode == AlphaMode::Fixed
                  ? Vec(Vec::Constant(view.rows(), cfg.alpha_fixed))
                  : alpha_rows(psi_eval, view);
  PolicyEval old = old_eval(view);
  double d_old_theta = row_kls(old, theta_eval, next.arch).mean();
  double d_old_psi = row_kls(old, psi_eval, next.arch).mean();
  double beta = 0.0;
  switch (cfg.beta_mode) {
    case BetaMode::Switching:
      beta = d_old_theta > d_old_psi ? cfg.beta_max : cfg.beta_min;
      break;
    case BetaMode::Annealed:
      beta = objectives::mdpo_anneal_beta(next.update_count,
                                          cfg.t_total_updates, cfg.beta0);
      break;
    case BetaMode::Adaptive:
      beta = next.beta_adaptive;
      break;
  }

  // (3) ascend L1 in theta with psi and phi fixed
  {
    Tape tape;
    Tape::Var flat = tape.param_flat(next.theta);
    BuiltLoss l1 = build_l1_loss(tape, flat, next.arch, view, psi_eval, alpha,
                                 beta, obj, &d.kl_psi);
    tape.backward(l1.total);
    auto [params, adam] =
        nn::adam_step(next.adam_theta, next.theta, tape.grad_flat(flat), true);
    next.theta = std::move(params);
    next.adam_theta = std::move(adam);
    d.surrogate = l1.surrogate;
    d.value_loss = l1.value_loss;
    d.entropy = l1.entropy;
    d.kl_old = l1.kl_old;
  }

  // (4) ascend L2 in phi with theta fixed (learned attention only)
  if (have_memory && cfg.attention != AttentionVariant::MeanPsi) {
    auto [l2, g] = l2_loss_and_grad(view, next.memory, next.attention, v,
                                    next.arch, mask_ptr);
    auto [phi, adam] = nn::adam_step(next.adam_phi, next.attention.phi, g, true);
    next.attention.phi = std::move(phi);
    next.adam_phi = std::move(adam);
    d.l2 = l2;
  }

  // (5) memory write with the post-step theta; D(theta_old, psi) is the
  // diversity threshold and did not move during the theta step
  bool write = false;
  switch (cfg.write_rule) {
    case WriteRule::Diversity: {
      PolicyEval new_eval = eval_policy(next.theta, next.arch, view);
      double d_theta_psi = row_kls(new_eval, psi_eval, next.arch).mean();
      write = cfg.write_strict ? d_theta_psi > d_old_psi
                               : d_theta_psi >= d_old_psi;
      break;
    }
    case WriteRule::Frequent:
      write = true;
      break;
    case WriteRule::Uniform:
    case WriteRule::Sparse:
      write = next.update_count % cfg.write_interval == 0;
      break;
  }
  if (write) next.memory.push(next.theta, next.update_count);

  // (6) carry the virtual policy forward
  next.psi_old = std::move(psi);
  next.update_count += 1;

  d.mean_alpha = alpha.mean();
  d.beta = beta;
  d.d_old_theta = d_old_theta;
  d.d_old_psi = d_old_psi;
  d.wrote = write;
  d.memory_size = next.memory.size();
  if (diag) *diag = d;
  return next;
}

}  // namespace mcpo
