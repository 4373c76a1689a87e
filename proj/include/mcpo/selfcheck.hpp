#pragma once

#include <string>
#include <vector>

#include "mcpo/mcpo_update.hpp"
#include "mcpo/oracle.hpp"

namespace mcpo::selfcheck {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// synthetic policy + minibatch fixture for gradient and identity checks
struct SyntheticCase {
  nn::NetArch arch;
  Vec theta;
  Vec theta_old;
  rollout::MinibatchView view;
};
SyntheticCase make_synthetic_case(RngStream& rng, bool discrete, int rows = 5);

// randomized grad vs central finite differences (h = 1e-5), including
// l2_loss_and_grad with dropout off; rel. error <= 1e-4 per coordinate
CheckResult check_gradients(int cases, std::uint64_t seed);

// recursive GAE vs the O(T^2) double-sum oracle, <= 1e-10
CheckResult check_gae_equivalence(int instances, std::uint64_t seed);

// closed-form kl vs Monte-Carlo E_p[log p - log q] within 3 standard errors
CheckResult check_kl_monte_carlo(int pairs_per_family, long samples,
                                 std::uint64_t seed);

// kl(p, uniform) = ln K - entropy(p) for categorical p, <= 1e-9
CheckResult check_entropy_kl_relation(int cases, std::uint64_t seed);

// attention weights on the simplex for random phi and contexts
CheckResult check_attention_simplex(int cases, std::uint64_t seed);

// FIFO order, capacity bound, oldest-first eviction
CheckResult check_memory_fifo(std::uint64_t seed);

// (a) alpha=0 + empty memory equals the KL-penalty loss within 1e-12
// (b) uniform-weight virtual policy equals the snapshot mean within 1e-12
// (c) switching_beta returns exactly {0.01, 10} on the boundary cases
CheckResult check_ablation_identities(std::uint64_t seed);

// eta = sum_s rho(s) sum_a pi(a|s) r(s,a) on random MDPs, <= 1e-9
CheckResult check_eta_rho_identity(int cases, std::uint64_t seed);

// the full randomized bound suite backing the verify-bound subcommand
struct BoundSuiteResult {
  int bound_checked = 0, bound_holds = 0;
  int two_region_checked = 0, two_region_holds = 0;
};
BoundSuiteResult run_bound_suite(int instances, std::uint64_t seed);

std::vector<CheckResult> run_all(std::uint64_t seed);

}  // namespace mcpo::selfcheck
