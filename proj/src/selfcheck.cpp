#include "mcpo/selfcheck.hpp"

#include <sstream>

#include "mcpo/objectives.hpp"

namespace mcpo::selfcheck {

using nn::Tape;
using oracle::TabularPolicy;
using rollout::MinibatchView;

namespace {

std::string fail_detail(const std::string& what, double worst) {
  std::ostringstream ss;
  ss << what << " (worst " << worst << ")";
  return ss.str();
}

nn::NetArch random_arch(RngStream& rng, bool discrete) {
  nn::NetArch a;
  a.input_dim = 2 + static_cast<int>(rng.below(3));
  int layers = 1 + static_cast<int>(rng.below(2));
  for (int i = 0; i < layers; ++i)
    a.hidden.emplace_back(2 + static_cast<int>(rng.below(4)),
                          rng.uniform() < 0.8 ? nn::Activation::Tanh
                                              : nn::Activation::Relu);
  a.policy_head = discrete ? nn::PolicyHead::CategoricalLogits
                           : nn::PolicyHead::GaussianMean;
  a.action_dim = discrete ? 2 + static_cast<int>(rng.below(3))
                          : 1 + static_cast<int>(rng.below(2));
  return a;
}

Vec perturbed(const Vec& v, RngStream& rng, double scale) {
  Vec out = v;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out(i) += scale * rng.normal();
  return out;
}

envs::TabularMDP random_mdp(RngStream& rng, int max_states = 4,
                            int n_actions = 2) {
  envs::TabularMDP m;
  m.n_states = 2 + static_cast<int>(rng.below(
                       static_cast<std::uint64_t>(max_states - 1)));
  m.n_actions = n_actions;
  m.discount = rng.uniform(0.8, 0.99);
  auto dirichlet_row = [&rng](int k) {
    Vec v(k);
    double sum = 0.0;
    for (int i = 0; i < k; ++i) {
      v(i) = -std::log(1.0 - rng.uniform());
      sum += v(i);
    }
    return Vec(v / sum);
  };
  m.transition.assign(n_actions, Mat(m.n_states, m.n_states));
  for (int a = 0; a < n_actions; ++a)
    for (int s = 0; s < m.n_states; ++s)
      m.transition[a].row(s) = dirichlet_row(m.n_states).transpose();
  m.reward.resize(m.n_states, n_actions);
  for (int s = 0; s < m.n_states; ++s)
    for (int a = 0; a < n_actions; ++a) m.reward(s, a) = rng.uniform(-1.0, 1.0);
  m.initial_dist = dirichlet_row(m.n_states);
  m.validate();
  return m;
}

}  // namespace

SyntheticCase make_synthetic_case(RngStream& rng, bool discrete, int rows) {
  SyntheticCase c;
  c.arch = random_arch(rng, discrete);
  c.theta_old = nn::init_params(c.arch, rng.next_u64());
  c.theta_old = perturbed(c.theta_old, rng, 0.15);
  c.theta = perturbed(c.theta_old, rng, 0.1);

  Mat states(rows, c.arch.input_dim);
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < c.arch.input_dim; ++k) states(i, k) = rng.normal();

  nn::BatchForwardOut old = nn::forward_batch(c.theta_old, c.arch, states);
  MinibatchView& v = c.view;
  v.states = states;
  v.old_mean_or_logits = old.mean_or_logits;
  v.old_log_std = old.log_std;
  v.value_old = old.values;
  v.logprob_old.resize(rows);
  v.advantage.resize(rows);
  v.value_target.resize(rows);
  if (discrete)
    v.disc_actions.assign(rows, 0);
  else
    v.cont_actions.resize(rows, c.arch.action_dim);
  for (int i = 0; i < rows; ++i) {
    nn::DistParams dist = old.dist_row(c.arch, i);
    nn::Action a = nn::sample(dist, rng);
    if (discrete)
      v.disc_actions[i] = a.index;
    else
      v.cont_actions.row(i) = a.values;
    v.logprob_old(i) = nn::log_prob(dist, a);
    v.advantage(i) = rng.normal();
    v.value_target(i) = rng.normal();
  }
  return c;
}

CheckResult check_gradients(int cases, std::uint64_t seed) {
  RngStream rng(split_seed(seed, 0x6AAD));
  double worst = 0.0;
  int l2_cases = std::max(cases / 4, 1);

  auto compare = [&worst](const Vec& g, const Vec& fd) {
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      double scale = std::max(std::abs(g(i)), std::abs(fd(i)));
      if (scale <= 1e-6) continue;
      worst = std::max(worst, std::abs(g(i) - fd(i)) / scale);
    }
  };

  for (int n = 0; n < cases - l2_cases; ++n) {
    bool discrete = n % 2 == 0;
    SyntheticCase c = make_synthetic_case(rng, discrete);
    int kind = n % 4;
    // the l1 case needs a fixed virtual policy and alpha, drawn once so the
    // finite-difference oracle evaluates the same function
    PolicyEval psi_fixed;
    Vec alpha_fixed;
    if (kind == 3) {
      psi_fixed =
          eval_policy(perturbed(c.theta_old, rng, 0.05), c.arch, c.view);
      alpha_fixed.resize(c.view.rows());
      for (int i = 0; i < alpha_fixed.size(); ++i)
        alpha_fixed(i) = rng.uniform();
    }
    nn::LossBuilder builder = [&](Tape& tape, Tape::Var flat) {
      objectives::ObjectiveConfig cfg;
      cfg.clip_eps = 0.2;
      cfg.c1 = 0.5;
      cfg.c2 = 0.01;
      switch (kind) {
        case 0:  // plain mean log-prob of the stored actions
          return tape.mean_all(nn::log_prob_on_tape(
              tape, nn::forward_on_tape(tape, flat, c.arch, c.view.states),
              c.arch, c.view.disc_actions, c.view.cont_actions));
        case 1:
          return objectives::build_kl_penalty_loss(tape, flat, c.arch, c.view,
                                                   0.7, cfg)
              .total;
        case 2:
          return objectives::build_ppo_clip_loss(tape, flat, c.arch, c.view,
                                                 cfg)
              .total;
        default:
          return build_l1_loss(tape, flat, c.arch, c.view, psi_fixed,
                               alpha_fixed, 0.4, cfg)
              .total;
      }
    };
    Vec g = nn::grad(builder, c.theta);
    Vec fd = oracle::finite_diff_grad(
        [&](const Vec& p) { return nn::eval_loss(builder, p); }, c.theta);
    compare(g, fd);
  }

  for (int n = 0; n < l2_cases; ++n) {
    bool discrete = n % 2 == 0;
    SyntheticCase c = make_synthetic_case(rng, discrete);
    PolicyMemory mem(3);
    mem.push(perturbed(c.theta_old, rng, 0.1), 0);
    mem.push(perturbed(c.theta_old, rng, 0.1), 1);
    if (n % 2) mem.push(perturbed(c.theta_old, rng, 0.1), 2);
    AttentionNet net = AttentionNet::init(12, 3, rng.next_u64());
    net.phi = perturbed(net.phi, rng, 0.3);
    Vec ctx(12);
    for (int i = 0; i < 12; ++i) ctx(i) = rng.normal();

    auto [l2, g] = l2_loss_and_grad(c.view, mem, net, ctx, c.arch, nullptr);
    (void)l2;
    AttentionNet probe = net;
    Vec fd = oracle::finite_diff_grad(
        [&](const Vec& phi) {
          probe.phi = phi;
          return l2_loss_and_grad(c.view, mem, probe, ctx, c.arch, nullptr)
              .first;
        },
        net.phi);
    compare(g, fd);
  }

  CheckResult r;
  r.name = "gradient-vs-finite-difference";
  r.pass = worst <= 1e-4;
  r.detail = fail_detail("rel err", worst);
  return r;
}

CheckResult check_gae_equivalence(int instances, std::uint64_t seed) {
  RngStream rng(split_seed(seed, 0x6AE));
  double worst = 0.0;
  for (int n = 0; n < instances; ++n) {
    int t_len = 1 + static_cast<int>(rng.below(32));
    Vec rewards(t_len), values(t_len);
    std::vector<std::uint8_t> dones(t_len, 0);
    for (int t = 0; t < t_len; ++t) {
      rewards(t) = rng.normal();
      values(t) = rng.normal();
      dones[t] = rng.uniform() < 0.15 ? 1 : 0;
    }
    double bootstrap = rng.normal();
    double gamma = rng.uniform(0.8, 1.0);
    double lambda = rng.uniform(0.8, 1.0);

    rollout::RolloutBatch b;
    b.n_actors = 1;
    b.horizon = t_len;
    b.rewards = rewards;
    b.value_old = values;
    b.done = dones;
    b.terminal = dones;
    b.next_value.resize(t_len);
    for (int t = 0; t < t_len; ++t)
      b.next_value(t) =
          dones[t] ? 0.0 : (t + 1 < t_len ? values(t + 1) : bootstrap);
    b.bootstrap_value = Vec::Constant(1, b.next_value(t_len - 1));
    rollout::compute_gae(b, gamma, lambda);

    Vec ref =
        oracle::gae_bruteforce(rewards, values, dones, bootstrap, gamma, lambda);
    worst = std::max(worst, (b.advantage - ref).cwiseAbs().maxCoeff());
  }
  CheckResult r;
  r.name = "gae-recursive-vs-bruteforce";
  r.pass = worst <= 1e-10;
  r.detail = fail_detail("abs err", worst);
  return r;
}

CheckResult check_kl_monte_carlo(int pairs_per_family, long samples,
                                 std::uint64_t seed) {
  RngStream rng(split_seed(seed, 0x316));
  double worst_z = 0.0;
  for (int family = 0; family < 2; ++family) {
    for (int n = 0; n < pairs_per_family; ++n) {
      nn::DistParams p, q;
      if (family == 0) {
        int k = 2 + static_cast<int>(rng.below(4));
        Vec lp(k), lq(k);
        for (int i = 0; i < k; ++i) {
          lp(i) = rng.normal();
          lq(i) = rng.normal();
        }
        p = nn::DistParams::categorical(lp);
        q = nn::DistParams::categorical(lq);
      } else {
        int d = 1 + static_cast<int>(rng.below(3));
        Vec mp(d), mq(d), sp(d), sq(d);
        for (int i = 0; i < d; ++i) {
          mp(i) = rng.normal();
          mq(i) = rng.normal();
          sp(i) = rng.uniform(-0.7, 0.3);
          sq(i) = rng.uniform(-0.7, 0.3);
        }
        p = nn::DistParams::diag_gaussian(mp, sp);
        q = nn::DistParams::diag_gaussian(mq, sq);
      }
      double closed = nn::kl(p, q);
      double sum = 0.0, sumsq = 0.0;
      for (long s = 0; s < samples; ++s) {
        nn::Action a = nn::sample(p, rng);
        double x = nn::log_prob(p, a) - nn::log_prob(q, a);
        sum += x;
        sumsq += x * x;
      }
      double mean = sum / static_cast<double>(samples);
      double var = sumsq / static_cast<double>(samples) - mean * mean;
      double se = std::sqrt(std::max(var, 0.0) / static_cast<double>(samples));
      double z = std::abs(mean - closed) / std::max(se, 1e-12);
      worst_z = std::max(worst_z, z);
    }
  }
  CheckResult r;
  r.name = "kl-closed-form-vs-monte-carlo";
  r.pass = worst_z <= 3.0;
  r.detail = fail_detail("z-score", worst_z);
  return r;
}

CheckResult check_entropy_kl_relation(int cases, std::uint64_t seed) {
  RngStream rng(split_seed(seed, 0xE57));
  double worst = 0.0;
  for (int n = 0; n < cases; ++n) {
    int k = 2 + static_cast<int>(rng.below(5));
    Vec logits(k);
    for (int i = 0; i < k; ++i) logits(i) = 2.0 * rng.normal();
    nn::DistParams p = nn::DistParams::categorical(logits);
    nn::DistParams u = nn::DistParams::categorical(Vec::Zero(k));
    double lhs = nn::kl(p, u);
    double rhs = std::log(static_cast<double>(k)) - nn::entropy(p);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  CheckResult r;
  r.name = "kl-to-uniform-equals-lnK-minus-entropy";
  r.pass = worst <= 1e-9;
  r.detail = fail_detail("abs err", worst);
  return r;
}

CheckResult check_attention_simplex(int cases, std::uint64_t seed) {
  RngStream rng(split_seed(seed, 0x51A));
  double worst = 0.0;
  for (int n = 0; n < cases; ++n) {
    int slots = 1 + static_cast<int>(rng.below(8));
    int occupied = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(slots)));
    AttentionNet net = AttentionNet::init(12, slots, rng.next_u64());
    net.phi = perturbed(net.phi, rng, 2.0);
    Vec ctx(12);
    for (int i = 0; i < 12; ++i) ctx(i) = 3.0 * rng.normal();
    Vec mask = sample_dropout_mask(slots, rng);
    const Vec* mask_ptr = n % 2 ? &mask : nullptr;
    Vec w = attention_weights(net, ctx, occupied, mask_ptr);
    worst = std::max(worst, std::abs(w.sum() - 1.0));
    worst = std::max(worst, std::max(-w.minCoeff(), 0.0));

    Tape tape;
    Tape::Var phi = tape.param_flat(net.phi);
    Tape::Var wt =
        attention_weights_on_tape(tape, phi, net, ctx, occupied, mask_ptr);
    const Mat& tw = tape.value(wt);
    worst = std::max(worst, std::abs(tw.sum() - 1.0));
    for (int i = occupied; i < slots; ++i)
      worst = std::max(worst, std::abs(tw(0, i)));
  }
  CheckResult r;
  r.name = "attention-weights-on-simplex";
  r.pass = worst <= 1e-9;
  r.detail = fail_detail("violation", worst);
  return r;
}

CheckResult check_memory_fifo(std::uint64_t seed) {
  RngStream rng(split_seed(seed, 0xF1F0));
  bool ok = true;
  PolicyMemory mem(3);
  for (int i = 0; i < 10; ++i) {
    mem.push(Vec::Constant(2, static_cast<double>(i)), i);
    ok = ok && mem.size() <= 3;
    for (int j = 1; j < mem.size(); ++j)
      ok = ok && mem.entry(j).created_at_update >
                     mem.entry(j - 1).created_at_update;
  }
  ok = ok && mem.size() == 3 && mem.entry(0).created_at_update == 7 &&
       mem.entry(2).created_at_update == 9;
  (void)rng;
  CheckResult r;
  r.name = "policy-memory-fifo";
  r.pass = ok;
  r.detail = ok ? "order and capacity preserved" : "violated";
  return r;
}

CheckResult check_ablation_identities(std::uint64_t seed) {
  RngStream rng(split_seed(seed, 0xAB1));
  double worst = 0.0;
  bool exact_ok = true;

  for (int n = 0; n < 10; ++n) {
    SyntheticCase c = make_synthetic_case(rng, n % 2 == 0);
    double beta = rng.uniform(0.05, 2.0);

    // (a) empty memory falls back to psi = theta_old; alpha forced to 0
    PolicyEval psi = eval_policy(c.theta_old, c.arch, c.view);
    Vec alpha = Vec::Zero(c.view.rows());
    double l1 = l1_loss(c.view, c.theta, c.arch, psi, alpha, beta);
    double lkl = objectives::kl_penalty_loss(c.view, c.theta, c.arch, beta);
    worst = std::max(worst, std::abs(l1 - lkl));

    // (b) uniform weights equal the arithmetic snapshot mean
    PolicyMemory mem(4);
    int count = 2 + static_cast<int>(rng.below(3));
    Vec mean = Vec::Zero(c.theta.size());
    for (int i = 0; i < count; ++i) {
      Vec snap = perturbed(c.theta, rng, 0.2);
      mean += snap;
      mem.push(std::move(snap), i);
    }
    mean /= static_cast<double>(count);
    Vec psi_mean = virtual_policy(uniform_weights(mem), mem);
    worst = std::max(worst, (psi_mean - mean).cwiseAbs().maxCoeff());

    // (c) switching boundaries return the exact configured levels
    double b1 = switching_beta(c.theta_old, c.theta_old, c.theta, c.arch,
                               c.view.states, 0.01, 10.0);
    double b2 = switching_beta(c.theta, c.theta_old, c.theta_old, c.arch,
                               c.view.states, 0.01, 10.0);
    exact_ok = exact_ok && b1 == 0.01 && b2 == 10.0;
  }

  CheckResult r;
  r.name = "ablation-identities";
  r.pass = worst <= 1e-12 && exact_ok;
  r.detail = fail_detail("abs err", worst);
  return r;
}

CheckResult check_eta_rho_identity(int cases, std::uint64_t seed) {
  RngStream rng(split_seed(seed, 0xE7A));
  double worst = 0.0;
  for (int n = 0; n < cases; ++n) {
    envs::TabularMDP mdp = random_mdp(rng);
    TabularPolicy pi = TabularPolicy::random(mdp, rng);
    double eta = oracle::exact_return(mdp, pi);
    Vec rho = oracle::visitation(mdp, pi);
    double direct =
        rho.dot((pi.probs.array() * mdp.reward.array()).rowwise().sum().matrix());
    worst = std::max(worst, std::abs(eta - direct));
  }
  CheckResult r;
  r.name = "eta-equals-rho-weighted-reward";
  r.pass = worst <= 1e-9;
  r.detail = fail_detail("abs err", worst);
  return r;
}

BoundSuiteResult run_bound_suite(int instances, std::uint64_t seed) {
  RngStream rng(split_seed(seed, 0xB0D));
  BoundSuiteResult out;
  for (int n = 0; n < instances; ++n) {
    envs::TabularMDP mdp = random_mdp(rng);
    TabularPolicy pi_old = TabularPolicy::random(mdp, rng);
    TabularPolicy pi_new = TabularPolicy::random(mdp, rng);
    ++out.bound_checked;
    if (oracle::bound_check(mdp, pi_old, pi_new).holds) ++out.bound_holds;

    std::vector<TabularPolicy> memory = {pi_old,
                                         TabularPolicy::random(mdp, rng)};
    if (rng.uniform() < 0.5) memory.push_back(TabularPolicy::random(mdp, rng));
    double c2_scale = rng.uniform() < 0.5 ? 0.0 : 1.0;
    ++out.two_region_checked;
    if (oracle::two_region_improvement_check(mdp, pi_old, memory, c2_scale))
      ++out.two_region_holds;
  }
  return out;
}

std::vector<CheckResult> run_all(std::uint64_t seed) {
  std::vector<CheckResult> out;
  out.push_back(check_gradients(20, seed));
  out.push_back(check_gae_equivalence(100, seed));
  out.push_back(check_kl_monte_carlo(10, 1000000, seed));
  out.push_back(check_entropy_kl_relation(50, seed));
  out.push_back(check_attention_simplex(50, seed));
  out.push_back(check_memory_fifo(seed));
  out.push_back(check_ablation_identities(seed));
  out.push_back(check_eta_rho_identity(25, seed));
  return out;
}

}  // namespace mcpo::selfcheck
