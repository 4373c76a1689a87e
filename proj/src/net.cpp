#include "mcpo/net.hpp"

#include <Eigen/QR>

namespace mcpo::nn {

bool operator==(const NetArch& a, const NetArch& b) {
  return a.input_dim == b.input_dim && a.hidden == b.hidden &&
         a.policy_head == b.policy_head && a.action_dim == b.action_dim &&
         a.value_head == b.value_head;
}

namespace {

struct Layer {
  int in = 0, out = 0, w_off = 0, b_off = 0;
};

struct Layout {
  std::vector<Layer> trunk;
  Layer policy;
  int log_std_off = -1;
  Layer value;
  int total = 0;
};

Layout layout_of(const NetArch& arch) {
  Layout l;
  int off = 0, in = arch.input_dim;
  for (const auto& [w, act] : arch.hidden) {
    (void)act;
    l.trunk.push_back({in, w, off, off + in * w});
    off += in * w + w;
    in = w;
  }
  l.policy = {in, arch.action_dim, off, off + in * arch.action_dim};
  off += in * arch.action_dim + arch.action_dim;
  if (arch.policy_head == PolicyHead::GaussianMean) {
    l.log_std_off = off;
    off += arch.action_dim;
  }
  if (arch.value_head) {
    l.value = {in, 1, off, off + in};
    off += in + 1;
  }
  l.total = off;
  return l;
}

void check_params(const Vec& params, const Layout& l) {
  if (params.size() != l.total)
    throw ConfigError("parameter vector length " +
                      std::to_string(params.size()) +
                      " does not match architecture (" +
                      std::to_string(l.total) + ")");
}

Mat orthogonal(int rows, int cols, double gain, RngStream& rng) {
  // QR of a gaussian matrix, sign-fixed so the factor is unique
  Mat a(std::max(rows, cols), std::min(rows, cols));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ() * Mat::Identity(a.rows(), a.cols());
  Mat r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  if (rows < cols) return gain * q.transpose();
  return gain * q;
}

}  // namespace

int param_count(const NetArch& arch) { return layout_of(arch).total; }

Vec init_params(const NetArch& arch, std::uint64_t seed) {
  Layout l = layout_of(arch);
  RngStream rng(split_seed(seed, 0xA11));
  Vec p = Vec::Zero(l.total);
  auto fill = [&p](const Layer& layer, const Mat& w) {
    Eigen::Map<Mat>(p.data() + layer.w_off, layer.in, layer.out) = w;
  };
  for (const auto& layer : l.trunk)
    fill(layer, orthogonal(layer.in, layer.out, std::sqrt(2.0), rng));
  fill(l.policy, orthogonal(l.policy.in, l.policy.out, 0.01, rng));
  if (arch.value_head)
    fill(l.value, orthogonal(l.value.in, l.value.out, 1.0, rng));
  return p;
}

ForwardOut forward(const Vec& params, const NetArch& arch, const Vec& state) {
  if (state.size() != arch.input_dim)
    throw ConfigError("forward: state length does not match input_dim");
  BatchForwardOut out = forward_batch(params, arch, state.transpose());
  ForwardOut r;
  r.dist = out.dist_row(arch, 0);
  r.value = arch.value_head ? out.values(0) : 0.0;
  return r;
}

DistParams BatchForwardOut::dist_row(const NetArch& arch, int i) const {
  if (arch.policy_head == PolicyHead::CategoricalLogits)
    return DistParams::categorical(mean_or_logits.row(i).transpose());
  return DistParams::diag_gaussian(mean_or_logits.row(i).transpose(), log_std);
}

BatchForwardOut forward_batch(const Vec& params, const NetArch& arch,
                              const Mat& states) {
  Layout l = layout_of(arch);
  check_params(params, l);
  if (states.cols() != arch.input_dim)
    throw ConfigError("forward: state width does not match input_dim");

  Mat h = states;
  for (size_t i = 0; i < l.trunk.size(); ++i) {
    const Layer& layer = l.trunk[i];
    Eigen::Map<const Mat> w(params.data() + layer.w_off, layer.in, layer.out);
    Eigen::Map<const Vec> b(params.data() + layer.b_off, layer.out);
    Mat z = h * w;
    z.rowwise() += b.transpose();
    h = arch.hidden[i].second == Activation::Tanh
            ? Mat(z.array().tanh())
            : Mat(z.cwiseMax(0.0));
  }

  BatchForwardOut out;
  {
    Eigen::Map<const Mat> w(params.data() + l.policy.w_off, l.policy.in,
                            l.policy.out);
    Eigen::Map<const Vec> b(params.data() + l.policy.b_off, l.policy.out);
    out.mean_or_logits = h * w;
    out.mean_or_logits.rowwise() += b.transpose();
  }
  if (arch.policy_head == PolicyHead::GaussianMean)
    out.log_std = params.segment(l.log_std_off, arch.action_dim);
  if (arch.value_head) {
    Eigen::Map<const Mat> w(params.data() + l.value.w_off, l.value.in, 1);
    out.values = (h * w).col(0);
    out.values.array() += params(l.value.b_off);
  }
  if (!out.mean_or_logits.allFinite() ||
      (arch.value_head && !out.values.allFinite()))
    throw NumericalError("forward: non-finite network output");
  return out;
}

TapeForwardOut forward_on_tape(Tape& tape, Tape::Var flat, const NetArch& arch,
                               const Mat& states) {
  Layout l = layout_of(arch);
  if (tape.value(flat).rows() != l.total || tape.value(flat).cols() != 1)
    throw ConfigError("forward_on_tape: flat parameter node has wrong shape");

  Tape::Var h = tape.constant(states);
  for (size_t i = 0; i < l.trunk.size(); ++i) {
    const Layer& layer = l.trunk[i];
    Tape::Var w = tape.segment(flat, layer.w_off, layer.in, layer.out);
    Tape::Var b = tape.segment(flat, layer.b_off, layer.out, 1);
    Tape::Var z = tape.add_bias(tape.matmul(h, w), b);
    h = arch.hidden[i].second == Activation::Tanh ? tape.tanh_op(z)
                                                  : tape.relu(z);
  }

  TapeForwardOut out;
  {
    Tape::Var w = tape.segment(flat, l.policy.w_off, l.policy.in, l.policy.out);
    Tape::Var b = tape.segment(flat, l.policy.b_off, l.policy.out, 1);
    out.mean_or_logits = tape.add_bias(tape.matmul(h, w), b);
  }
  if (arch.policy_head == PolicyHead::GaussianMean)
    out.log_std = tape.segment(flat, l.log_std_off, arch.action_dim, 1);
  if (arch.value_head) {
    Tape::Var w = tape.segment(flat, l.value.w_off, l.value.in, 1);
    Tape::Var b = tape.segment(flat, l.value.b_off, 1, 1);
    out.values = tape.add_bias(tape.matmul(h, w), b);
  }
  return out;
}

Tape::Var log_prob_on_tape(Tape& tape, const TapeForwardOut& fwd,
                           const NetArch& arch, const std::vector<int>& disc,
                           const Mat& cont) {
  if (arch.policy_head == PolicyHead::CategoricalLogits)
    return tape.select_col(tape.row_log_softmax(fwd.mean_or_logits), disc);
  return tape.gaussian_log_prob(fwd.mean_or_logits, fwd.log_std, cont);
}

Vec grad(const LossBuilder& loss_fn, const Vec& params) {
  Tape tape;
  Tape::Var p = tape.param_flat(params);
  Tape::Var loss = loss_fn(tape, p);
  tape.backward(loss);
  return tape.grad_flat(p);
}

double eval_loss(const LossBuilder& loss_fn, const Vec& params) {
  Tape tape;
  Tape::Var p = tape.param_flat(params);
  return tape.scalar(loss_fn(tape, p));
}

}  // namespace mcpo::nn
