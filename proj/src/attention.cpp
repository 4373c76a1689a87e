#include "mcpo/attention.hpp"

#include "mcpo/policy_memory.hpp"

namespace mcpo {

Vec virtual_policy(const Vec& weights, const PolicyMemory& memory) {
  if (memory.empty())
    throw UsageError("virtual_policy: memory is empty (caller falls back to "
                     "the sampling policy)");
  if (weights.size() != memory.size())
    throw InputError("virtual_policy: one weight per occupied slot required");
  if (weights.minCoeff() < -1e-9 || std::abs(weights.sum() - 1.0) > 1e-6)
    throw InputError("virtual_policy: weights must lie on the simplex");
  Vec psi = Vec::Zero(memory.entry(0).params->size());
  for (int i = 0; i < memory.size(); ++i)
    psi += weights(i) * (*memory.entry(i).params);
  return psi;
}

Vec uniform_weights(const PolicyMemory& memory) {
  if (memory.empty()) throw UsageError("uniform_weights: memory is empty");
  return Vec::Constant(memory.size(), 1.0 / memory.size());
}

namespace {
// mirrors nn::init_params: orthogonal-ish hidden layer, small output head
Mat gaussian_mat(int rows, int cols, RngStream& rng, double scale) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  return m;
}
}  // namespace

AttentionNet AttentionNet::init(int ctx_dim, int n_slots, std::uint64_t seed) {
  if (ctx_dim < 1 || n_slots < 1)
    throw ConfigError("AttentionNet: bad dimensions");
  AttentionNet net;
  net.ctx_dim = ctx_dim;
  net.n_slots = n_slots;
  net.phi = Vec::Zero(param_count(ctx_dim, n_slots));
  RngStream rng(split_seed(seed, 0xA77));
  double s1 = std::sqrt(2.0 / ctx_dim);
  Eigen::Map<Mat>(net.phi.data(), ctx_dim, n_slots) =
      gaussian_mat(ctx_dim, n_slots, rng, s1);
  // output layer starts near zero so initial attention is near uniform
  int w2_off = ctx_dim * n_slots + n_slots;
  Eigen::Map<Mat>(net.phi.data() + w2_off, n_slots, n_slots) =
      gaussian_mat(n_slots, n_slots, rng, 0.01);
  return net;
}

Vec sample_dropout_mask(int n, RngStream& rng, double p) {
  Vec mask(n);
  for (int i = 0; i < n; ++i)
    mask(i) = rng.uniform() < p ? 0.0 : 1.0 / (1.0 - p);
  return mask;
}

Vec attention_weights(const AttentionNet& net, const Vec& context,
                      int occupied, const Vec* dropout_mask) {
  if (context.size() != net.ctx_dim)
    throw InputError("attention_weights: context length mismatch");
  if (occupied < 1 || occupied > net.n_slots)
    throw InputError("attention_weights: occupied slot count out of range");

  const int n = net.n_slots;
  Eigen::Map<const Mat> w1(net.phi.data(), net.ctx_dim, n);
  Eigen::Map<const Vec> b1(net.phi.data() + net.ctx_dim * n, n);
  Eigen::Map<const Mat> w2(net.phi.data() + net.ctx_dim * n + n, n, n);
  Eigen::Map<const Vec> b2(net.phi.data() + net.ctx_dim * n + n + n * n, n);

  Vec h = ((w1.transpose() * context + b1).array().tanh()).matrix();
  if (dropout_mask) h = h.cwiseProduct(*dropout_mask);
  Vec logits = w2.transpose() * h + b2;

  Vec z = logits.head(occupied);
  double m = z.maxCoeff();
  Vec e = (z.array() - m).exp();
  return e / e.sum();
}

nn::Tape::Var attention_weights_on_tape(nn::Tape& tape, nn::Tape::Var phi,
                                        const AttentionNet& net,
                                        const Vec& context, int occupied,
                                        const Vec* dropout_mask) {
  using Tape = nn::Tape;
  const int n = net.n_slots;
  const int c = net.ctx_dim;
  Tape::Var w1 = tape.segment(phi, 0, c, n);
  Tape::Var b1 = tape.segment(phi, c * n, n, 1);
  Tape::Var w2 = tape.segment(phi, c * n + n, n, n);
  Tape::Var b2 = tape.segment(phi, c * n + n + n * n, n, 1);

  Mat v_row = context.transpose();  // 1 x ctx
  Tape::Var h =
      tape.tanh_op(tape.add_bias(tape.matmul(tape.constant(v_row), w1), b1));
  if (dropout_mask) h = tape.dropout_mask(h, dropout_mask->transpose());
  Tape::Var logits = tape.add_bias(tape.matmul(h, w2), b2);

  // mask empty slots far below the occupied logits, then zero them exactly
  // (vectorized exp clamps its argument rather than flushing to 0)
  Mat mask = Mat::Zero(1, n);
  Mat keep = Mat::Zero(1, n);
  for (int i = 0; i < n; ++i) {
    if (i < occupied)
      keep(0, i) = 1.0;
    else
      mask(0, i) = -1e30;
  }
  Tape::Var weights =
      tape.cmul(tape.exp_op(tape.row_log_softmax(tape.cadd(logits, mask))),
                keep);
  return weights;
}

}  // namespace mcpo
