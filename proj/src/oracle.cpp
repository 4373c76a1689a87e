#include "mcpo/oracle.hpp"

#include <Eigen/Dense>

namespace mcpo::oracle {

void TabularPolicy::validate(const TabularMDP& mdp) const {
  if (probs.rows() != mdp.n_states || probs.cols() != mdp.n_actions)
    throw ConfigError("TabularPolicy: shape mismatch");
  for (int s = 0; s < mdp.n_states; ++s)
    if (std::abs(probs.row(s).sum() - 1.0) > 1e-12 ||
        probs.row(s).minCoeff() < 0.0)
      throw ConfigError("TabularPolicy: row is not a distribution");
}

TabularPolicy TabularPolicy::uniform(const TabularMDP& mdp) {
  return {Mat::Constant(mdp.n_states, mdp.n_actions, 1.0 / mdp.n_actions)};
}

TabularPolicy TabularPolicy::random(const TabularMDP& mdp, RngStream& rng) {
  Mat p(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    double sum = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a) {
      // exponential draws normalize to a Dirichlet(1) sample
      p(s, a) = -std::log(1.0 - rng.uniform());
      sum += p(s, a);
    }
    p.row(s) /= sum;
  }
  return {std::move(p)};
}

TabularPolicy TabularPolicy::mix(const std::vector<TabularPolicy>& parts,
                                 const Vec& weights) {
  if (parts.empty() || weights.size() != static_cast<Eigen::Index>(parts.size()))
    throw InputError("TabularPolicy::mix: one weight per policy required");
  Mat p = Mat::Zero(parts[0].probs.rows(), parts[0].probs.cols());
  for (size_t i = 0; i < parts.size(); ++i)
    p += weights(static_cast<Eigen::Index>(i)) * parts[i].probs;
  return {std::move(p)};
}

namespace {
Mat policy_transition(const TabularMDP& mdp, const TabularPolicy& pi) {
  Mat p = Mat::Zero(mdp.n_states, mdp.n_states);
  for (int a = 0; a < mdp.n_actions; ++a)
    p += pi.probs.col(a).asDiagonal() * mdp.transition[a];
  return p;
}

Vec policy_reward(const TabularMDP& mdp, const TabularPolicy& pi) {
  return (pi.probs.array() * mdp.reward.array()).rowwise().sum();
}
}  // namespace

Vec state_values(const TabularMDP& mdp, const TabularPolicy& pi) {
  mdp.validate();
  pi.validate(mdp);
  Mat p = policy_transition(mdp, pi);
  Mat a = Mat::Identity(mdp.n_states, mdp.n_states) - mdp.discount * p;
  return a.fullPivLu().solve(policy_reward(mdp, pi));
}

double exact_return(const TabularMDP& mdp, const TabularPolicy& pi) {
  return mdp.initial_dist.dot(state_values(mdp, pi));
}

Mat advantages(const TabularMDP& mdp, const TabularPolicy& pi) {
  Vec v = state_values(mdp, pi);
  Mat adv(mdp.n_states, mdp.n_actions);
  for (int a = 0; a < mdp.n_actions; ++a)
    adv.col(a) =
        mdp.reward.col(a) + mdp.discount * (mdp.transition[a] * v) - v;
  return adv;
}

Vec visitation(const TabularMDP& mdp, const TabularPolicy& pi) {
  mdp.validate();
  pi.validate(mdp);
  Mat p = policy_transition(mdp, pi);
  Mat a = Mat::Identity(mdp.n_states, mdp.n_states) -
          mdp.discount * p.transpose();
  return a.fullPivLu().solve(mdp.initial_dist);
}

double local_approx(const TabularMDP& mdp, const TabularPolicy& pi_old,
                    const TabularPolicy& pi_new) {
  double eta_old = exact_return(mdp, pi_old);
  Vec rho = visitation(mdp, pi_old);
  Mat adv = advantages(mdp, pi_old);
  return eta_old + rho.dot((pi_new.probs.array() * adv.array())
                               .rowwise()
                               .sum()
                               .matrix());
}

double max_state_kl(const TabularPolicy& p, const TabularPolicy& q) {
  double worst = 0.0;
  for (Eigen::Index s = 0; s < p.probs.rows(); ++s) {
    double kl = 0.0;
    for (Eigen::Index a = 0; a < p.probs.cols(); ++a) {
      double pa = p.probs(s, a);
      if (pa <= 0.0) continue;
      double qa = q.probs(s, a);
      if (qa <= 0.0) return std::numeric_limits<double>::infinity();
      kl += pa * std::log(pa / qa);
    }
    worst = std::max(worst, kl);
  }
  return worst;
}

namespace {
double penalty_c1(const TabularMDP& mdp, const TabularPolicy& pi_old) {
  double max_adv = advantages(mdp, pi_old).array().abs().maxCoeff();
  return 4.0 * max_adv * mdp.discount /
         ((1.0 - mdp.discount) * (1.0 - mdp.discount));
}
}  // namespace

BoundResult bound_check(const TabularMDP& mdp, const TabularPolicy& pi_old,
                        const TabularPolicy& pi_new) {
  BoundResult r;
  r.lhs = exact_return(mdp, pi_new);
  r.rhs = local_approx(mdp, pi_old, pi_new) -
          penalty_c1(mdp, pi_old) * max_state_kl(pi_old, pi_new);
  r.holds = r.lhs >= r.rhs - 1e-9;
  return r;
}

namespace {
// all simplex grid points with the given resolution (units of grid_step)
void simplex_grid(int dims, int units, std::vector<Vec>& out, Vec& work,
                  int pos, int left) {
  if (pos == dims - 1) {
    work(pos) = left;
    out.push_back(work);
    return;
  }
  for (int u = 0; u <= left; ++u) {
    work(pos) = u;
    simplex_grid(dims, units, out, work, pos + 1, left - u);
  }
}
}  // namespace

bool two_region_improvement_check(const TabularMDP& mdp,
                                  const TabularPolicy& pi_old,
                                  const std::vector<TabularPolicy>& memory,
                                  double c2_scale, double grid_step) {
  if (memory.empty())
    throw InputError("two_region_improvement_check: empty memory");
  if (mdp.n_actions != 2)
    throw ConfigError(
        "two_region_improvement_check: the policy grid assumes 2 actions");
  const double c1 = penalty_c1(mdp, pi_old);
  const double c2 = c2_scale * c1;
  const double eta_old = exact_return(mdp, pi_old);
  const Vec rho = visitation(mdp, pi_old);
  const Mat adv = advantages(mdp, pi_old);

  auto l_old = [&](const TabularPolicy& pi) {
    return eta_old +
           rho.dot((pi.probs.array() * adv.array()).rowwise().sum().matrix());
  };
  // c * d with c possibly 0 and d possibly infinite
  auto pen = [](double c, double d) { return c == 0.0 ? 0.0 : c * d; };

  // psi* maximizes L2 = L_old(psi) - C1 Dmax(old, psi) over the simplex grid
  const int units = static_cast<int>(std::lround(1.0 / grid_step));
  std::vector<Vec> grid;
  Vec work(static_cast<Eigen::Index>(memory.size()));
  simplex_grid(static_cast<int>(memory.size()), units, grid, work, 0, units);
  TabularPolicy psi_best = memory[0];
  double l2_best = -std::numeric_limits<double>::infinity();
  for (const Vec& g : grid) {
    TabularPolicy psi = TabularPolicy::mix(memory, g / units);
    double l2 = l_old(psi) - pen(c1, max_state_kl(pi_old, psi));
    if (l2 > l2_best) {
      l2_best = l2;
      psi_best = psi;
    }
  }

  auto l1 = [&](const TabularPolicy& pi) {
    return l_old(pi) - pen(c1, max_state_kl(pi_old, pi)) -
           pen(c2, max_state_kl(psi_best, pi));
  };

  // theta* maximizes L1 over a per-state grid on P(action 0)
  const int s_count = mdp.n_states;
  std::vector<int> digits(s_count, 0);
  TabularPolicy theta_best = pi_old;
  double l1_best = -std::numeric_limits<double>::infinity();
  TabularPolicy cand;
  cand.probs.resize(s_count, 2);
  while (true) {
    for (int s = 0; s < s_count; ++s) {
      double p0 = static_cast<double>(digits[s]) / units;
      cand.probs(s, 0) = p0;
      cand.probs(s, 1) = 1.0 - p0;
    }
    double l = l1(cand);
    if (l > l1_best) {
      l1_best = l;
      theta_best = cand;
    }
    int pos = 0;
    while (pos < s_count && ++digits[pos] > units) digits[pos++] = 0;
    if (pos == s_count) break;
  }

  double lhs = exact_return(mdp, theta_best) - eta_old;
  double rhs = l1_best - l1(psi_best);
  return lhs >= rhs - 1e-9;
}

Vec gae_bruteforce(const Vec& rewards, const Vec& values,
                   const std::vector<std::uint8_t>& dones, double bootstrap,
                   double gamma, double lambda) {
  const Eigen::Index t_len = rewards.size();
  if (values.size() != t_len ||
      static_cast<Eigen::Index>(dones.size()) != t_len)
    throw InputError("gae_bruteforce: length mismatch");
  Vec adv(t_len);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    double acc = 0.0;
    double w = 1.0;
    for (Eigen::Index k = t; k < t_len; ++k) {
      double next_v = dones[k] ? 0.0
                     : k + 1 < t_len ? values(k + 1)
                                     : bootstrap;
      acc += w * (rewards(k) + gamma * next_v - values(k));
      if (dones[k]) break;
      w *= gamma * lambda;
    }
    adv(t) = acc;
  }
  return adv;
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& loss_fn,
                     const Vec& params, double h) {
  if (h <= 0.0) throw ConfigError("finite_diff_grad: h must be positive");
  Vec g(params.size());
  Vec p = params;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    p(i) = params(i) + h;
    double up = loss_fn(p);
    p(i) = params(i) - h;
    double down = loss_fn(p);
    p(i) = params(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace mcpo::oracle
