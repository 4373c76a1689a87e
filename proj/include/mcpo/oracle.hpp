#pragma once

#include <functional>
#include <vector>

#include "mcpo/tabular.hpp"
#include "mcpo/types.hpp"

namespace mcpo::oracle {

using envs::TabularMDP;

// Row-stochastic SxA policy for exact evaluation.
struct TabularPolicy {
  Mat probs;

  void validate(const TabularMDP& mdp) const;
  static TabularPolicy uniform(const TabularMDP& mdp);
  static TabularPolicy random(const TabularMDP& mdp, RngStream& rng);
  // convex combination in probability space
  static TabularPolicy mix(const std::vector<TabularPolicy>& parts,
                           const Vec& weights);
};

// eta(pi): expected discounted return from the initial distribution, via the
// exact linear solve V = r_pi + gamma P_pi V.
double exact_return(const TabularMDP& mdp, const TabularPolicy& pi);

// state values and advantages of pi
Vec state_values(const TabularMDP& mdp, const TabularPolicy& pi);
Mat advantages(const TabularMDP& mdp, const TabularPolicy& pi);

// unnormalized discounted visitation rho_pi = (I - gamma P_pi^T)^-1 d0
Vec visitation(const TabularMDP& mdp, const TabularPolicy& pi);

// first-order local surrogate:
// L_old(new) = eta(old) + sum_s rho_old(s) sum_a new(a|s) A_old(s,a)
double local_approx(const TabularMDP& mdp, const TabularPolicy& pi_old,
                    const TabularPolicy& pi_new);

double max_state_kl(const TabularPolicy& p, const TabularPolicy& q);

// Lower-bound test eta(new) >= L_old(new) - C1 * Dmax_KL(old, new) with
// C1 = 4 max|A| gamma / (1-gamma)^2.
struct BoundResult {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};
BoundResult bound_check(const TabularMDP& mdp, const TabularPolicy& pi_old,
                        const TabularPolicy& pi_new);

// Tabular analog of the two-trust-region construction. The virtual policy
// maximizes L_old(psi) - C1 Dmax(old,psi) over convex combinations of memory
// entries (simplex grid, step 0.05); theta maximizes
// L_old(theta) - C1 Dmax(old,theta) - C2 Dmax(psi,theta) over a per-state
// probability grid. Checks eta(theta) - eta(old) >= L1(theta) - L1(psi).
// The memory must contain pi_old (the cold-start write always admits it),
// otherwise the maximizer need not dominate pi_old and the chain of
// inequalities is not a theorem.
bool two_region_improvement_check(const TabularMDP& mdp,
                                  const TabularPolicy& pi_old,
                                  const std::vector<TabularPolicy>& memory,
                                  double c2_scale = 0.0,
                                  double grid_step = 0.05);

// O(T^2) literal GAE double sum with done-boundary resets; the reference
// implementation the recursive path is tested against.
Vec gae_bruteforce(const Vec& rewards, const Vec& values,
                   const std::vector<std::uint8_t>& dones, double bootstrap,
                   double gamma, double lambda);

// central finite differences per coordinate
Vec finite_diff_grad(const std::function<double(const Vec&)>& loss_fn,
                     const Vec& params, double h = 1e-5);

}  // namespace mcpo::oracle
