#include "mcpo/dist.hpp"

namespace mcpo::nn {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454836;  // ln(2π)

void check_same(const DistParams& p, const DistParams& q) {
  if (p.family != q.family) throw InputError("kl: distribution family mismatch");
  if (p.dim() != q.dim()) throw InputError("kl: dimension mismatch");
}
}  // namespace

double log_prob(const DistParams& dist, const Action& action) {
  if (dist.family == DistFamily::Categorical) {
    if (action.index < 0 || action.index >= dist.dim())
      throw InputError("log_prob: action index out of range");
    return log_softmax(dist.logits_or_mean)(action.index);
  }
  if (action.values.size() != dist.dim())
    throw InputError("log_prob: action dimension mismatch");
  const Vec& mu = dist.logits_or_mean;
  const Vec& ls = dist.log_std;
  Vec z = (action.values - mu).array() * (-ls).array().exp();
  return -0.5 * z.squaredNorm() - ls.sum() - 0.5 * kLogTwoPi * dist.dim();
}

double entropy(const DistParams& dist) {
  if (dist.family == DistFamily::Categorical) {
    Vec ls = log_softmax(dist.logits_or_mean);
    Vec p = ls.array().exp();
    return -(p.array() * ls.array()).sum();
  }
  // 0.5·ln(2πe) + log_std, per dimension
  return dist.log_std.sum() + 0.5 * (kLogTwoPi + 1.0) * dist.dim();
}

double kl(const DistParams& p, const DistParams& q) {
  check_same(p, q);
  if (p.family == DistFamily::Categorical) {
    Vec lp = log_softmax(p.logits_or_mean);
    Vec lq = log_softmax(q.logits_or_mean);
    Vec pp = lp.array().exp();
    return (pp.array() * (lp - lq).array()).sum();
  }
  // KL(N(μ1,σ1) || N(μ2,σ2)) summed over independent dimensions
  const Vec& m1 = p.logits_or_mean;
  const Vec& m2 = q.logits_or_mean;
  Eigen::ArrayXd s1sq = (2.0 * p.log_std).array().exp();
  Eigen::ArrayXd inv_s2sq = (-2.0 * q.log_std).array().exp();
  Eigen::ArrayXd dm = (m1 - m2).array();
  return ((q.log_std - p.log_std).array() +
          0.5 * (s1sq + dm.square()) * inv_s2sq - 0.5)
      .sum();
}

Action sample(const DistParams& dist, RngStream& rng) {
  if (dist.family == DistFamily::Categorical) {
    Vec p = softmax(dist.logits_or_mean);
    double u = rng.uniform();
    double acc = 0.0;
    for (int i = 0; i < p.size(); ++i) {
      acc += p(i);
      if (u < acc) return Action::discrete(i);
    }
    return Action::discrete(static_cast<int>(p.size()) - 1);
  }
  Vec a(dist.dim());
  for (int i = 0; i < a.size(); ++i)
    a(i) = dist.logits_or_mean(i) + std::exp(dist.log_std(i)) * rng.normal();
  return Action::continuous(std::move(a));
}

}  // namespace mcpo::nn
