#include "mcpo/tape.hpp"

namespace mcpo::nn {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454836;
}

void Tape::check_finite(const Mat& m, const char* op) const {
  if (!m.allFinite())
    throw NumericalError(std::string("non-finite value produced by op '") +
                         op + "'");
}

Tape::Var Tape::push(Mat value, bool needs_grad, const char* op) {
  check_finite(value, op);
  Node n;
  n.grad = Mat::Zero(value.rows(), value.cols());
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.op = op;
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size() - 1);
}

Vec Tape::grad_flat(Var v) const {
  const Mat& g = nodes_[v].grad;
  return Eigen::Map<const Vec>(g.data(), g.size());
}

void Tape::backward(Var loss) {
  Node& ln = nodes_[loss];
  if (ln.value.size() != 1)
    throw UsageError("backward: loss must be a scalar node");
  ln.grad(0, 0) = 1.0;
  for (Var v = loss; v >= 0; --v)
    if (nodes_[v].back && nodes_[v].needs_grad) nodes_[v].back();
}

Tape::Var Tape::segment(Var flat, int offset, int rows, int cols) {
  const Mat& f = nodes_[flat].value;
  if (f.cols() != 1 || offset + rows * cols > f.rows())
    throw UsageError("segment: out of range on flat vector");
  Mat v = Eigen::Map<const Mat>(f.col(0).data() + offset, rows, cols);
  Var out = push(std::move(v), needs(flat), "segment");
  if (needs(flat))
    nodes_[out].back = [this, out, flat, offset, rows, cols] {
      const Mat& g = nodes_[out].grad;
      Eigen::Map<const Vec> gf(g.data(), rows * cols);
      nodes_[flat].grad.col(0).segment(offset, rows * cols) += gf;
    };
  return out;
}

Tape::Var Tape::transpose(Var a) {
  Var out = push(nodes_[a].value.transpose(), needs(a), "transpose");
  if (needs(a))
    nodes_[out].back = [this, out, a] {
      nodes_[a].grad += nodes_[out].grad.transpose();
    };
  return out;
}

Tape::Var Tape::matmul(Var a, Var b) {
  Var out =
      push(nodes_[a].value * nodes_[b].value, needs(a) || needs(b), "matmul");
  nodes_[out].back = [this, out, a, b] {
    const Mat& g = nodes_[out].grad;
    if (needs(a)) nodes_[a].grad.noalias() += g * nodes_[b].value.transpose();
    if (needs(b)) nodes_[b].grad.noalias() += nodes_[a].value.transpose() * g;
  };
  return out;
}

Tape::Var Tape::add(Var a, Var b) {
  Var out =
      push(nodes_[a].value + nodes_[b].value, needs(a) || needs(b), "add");
  nodes_[out].back = [this, out, a, b] {
    if (needs(a)) nodes_[a].grad += nodes_[out].grad;
    if (needs(b)) nodes_[b].grad += nodes_[out].grad;
  };
  return out;
}

Tape::Var Tape::add_bias(Var m, Var bias) {
  Mat v = nodes_[m].value;
  v.rowwise() += nodes_[bias].value.col(0).transpose();
  Var out = push(std::move(v), needs(m) || needs(bias), "add");
  nodes_[out].back = [this, out, m, bias] {
    const Mat& g = nodes_[out].grad;
    if (needs(m)) nodes_[m].grad += g;
    if (needs(bias))
      nodes_[bias].grad.col(0) += g.colwise().sum().transpose();
  };
  return out;
}

Tape::Var Tape::sub(Var a, Var b) {
  Var out =
      push(nodes_[a].value - nodes_[b].value, needs(a) || needs(b), "sub");
  nodes_[out].back = [this, out, a, b] {
    if (needs(a)) nodes_[a].grad += nodes_[out].grad;
    if (needs(b)) nodes_[b].grad -= nodes_[out].grad;
  };
  return out;
}

Tape::Var Tape::mul(Var a, Var b) {
  Var out = push(nodes_[a].value.cwiseProduct(nodes_[b].value),
                 needs(a) || needs(b), "mul");
  nodes_[out].back = [this, out, a, b] {
    const Mat& g = nodes_[out].grad;
    if (needs(a)) nodes_[a].grad += g.cwiseProduct(nodes_[b].value);
    if (needs(b)) nodes_[b].grad += g.cwiseProduct(nodes_[a].value);
  };
  return out;
}

Tape::Var Tape::cmul(Var a, const Mat& c) {
  Var out = push(nodes_[a].value.cwiseProduct(c), needs(a), "cmul");
  if (needs(a))
    nodes_[out].back = [this, out, a, c] {
      nodes_[a].grad += nodes_[out].grad.cwiseProduct(c);
    };
  return out;
}

Tape::Var Tape::cadd(Var a, const Mat& c) {
  Var out = push(nodes_[a].value + c, needs(a), "cadd");
  if (needs(a))
    nodes_[out].back = [this, out, a] { nodes_[a].grad += nodes_[out].grad; };
  return out;
}

Tape::Var Tape::scale(Var a, double c) {
  Var out = push(nodes_[a].value * c, needs(a), "scale");
  if (needs(a))
    nodes_[out].back = [this, out, a, c] {
      nodes_[a].grad += nodes_[out].grad * c;
    };
  return out;
}

Tape::Var Tape::add_scalar(Var a, double c) {
  Mat v = nodes_[a].value;
  v.array() += c;
  Var out = push(std::move(v), needs(a), "add_scalar");
  if (needs(a))
    nodes_[out].back = [this, out, a] { nodes_[a].grad += nodes_[out].grad; };
  return out;
}

Tape::Var Tape::tanh_op(Var a) {
  Var out = push(nodes_[a].value.array().tanh(), needs(a), "tanh");
  if (needs(a))
    nodes_[out].back = [this, out, a] {
      nodes_[a].grad.array() += nodes_[out].grad.array() *
                                (1.0 - nodes_[out].value.array().square());
    };
  return out;
}

Tape::Var Tape::relu(Var a) {
  Var out = push(nodes_[a].value.cwiseMax(0.0), needs(a), "relu");
  if (needs(a))
    nodes_[out].back = [this, out, a] {
      nodes_[a].grad.array() +=
          nodes_[out].grad.array() *
          (nodes_[a].value.array() > 0.0).cast<double>();
    };
  return out;
}

Tape::Var Tape::exp_op(Var a) {
  Var out = push(nodes_[a].value.array().exp(), needs(a), "exp");
  if (needs(a))
    nodes_[out].back = [this, out, a] {
      nodes_[a].grad.array() +=
          nodes_[out].grad.array() * nodes_[out].value.array();
    };
  return out;
}

Tape::Var Tape::log_op(Var a) {
  Var out = push(nodes_[a].value.array().log(), needs(a), "log");
  if (needs(a))
    nodes_[out].back = [this, out, a] {
      nodes_[a].grad.array() +=
          nodes_[out].grad.array() / nodes_[a].value.array();
    };
  return out;
}

Tape::Var Tape::square(Var a) {
  Var out = push(nodes_[a].value.array().square(), needs(a), "square");
  if (needs(a))
    nodes_[out].back = [this, out, a] {
      nodes_[a].grad.array() +=
          2.0 * nodes_[out].grad.array() * nodes_[a].value.array();
    };
  return out;
}

Tape::Var Tape::minimum(Var a, Var b) {
  Var out = push(nodes_[a].value.cwiseMin(nodes_[b].value),
                 needs(a) || needs(b), "min");
  nodes_[out].back = [this, out, a, b] {
    // ties route the gradient to the first operand
    Eigen::ArrayXXd take_a =
        (nodes_[a].value.array() <= nodes_[b].value.array()).cast<double>();
    if (needs(a)) nodes_[a].grad.array() += nodes_[out].grad.array() * take_a;
    if (needs(b))
      nodes_[b].grad.array() += nodes_[out].grad.array() * (1.0 - take_a);
  };
  return out;
}

Tape::Var Tape::clip(Var a, double lo, double hi) {
  Var out = push(nodes_[a].value.cwiseMax(lo).cwiseMin(hi), needs(a), "clip");
  if (needs(a))
    nodes_[out].back = [this, out, a, lo, hi] {
      Eigen::ArrayXXd inside = ((nodes_[a].value.array() >= lo) &&
                                (nodes_[a].value.array() <= hi))
                                   .cast<double>();
      nodes_[a].grad.array() += nodes_[out].grad.array() * inside;
    };
  return out;
}

Tape::Var Tape::dropout_mask(Var a, const Mat& mask) {
  Var out = push(nodes_[a].value.cwiseProduct(mask), needs(a), "dropout_mask");
  if (needs(a))
    nodes_[out].back = [this, out, a, mask] {
      nodes_[a].grad += nodes_[out].grad.cwiseProduct(mask);
    };
  return out;
}

Tape::Var Tape::row_sum(Var a) {
  Var out = push(nodes_[a].value.rowwise().sum(), needs(a), "row_sum");
  if (needs(a))
    nodes_[out].back = [this, out, a] {
      nodes_[a].grad.colwise() += nodes_[out].grad.col(0);
    };
  return out;
}

Tape::Var Tape::mean_all(Var a) {
  Mat v(1, 1);
  v(0, 0) = nodes_[a].value.mean();
  Var out = push(std::move(v), needs(a), "mean");
  if (needs(a))
    nodes_[out].back = [this, out, a] {
      nodes_[a].grad.array() +=
          nodes_[out].grad(0, 0) / static_cast<double>(nodes_[a].value.size());
    };
  return out;
}

Tape::Var Tape::sum_all(Var a) {
  Mat v(1, 1);
  v(0, 0) = nodes_[a].value.sum();
  Var out = push(std::move(v), needs(a), "sum");
  if (needs(a))
    nodes_[out].back = [this, out, a] {
      nodes_[a].grad.array() += nodes_[out].grad(0, 0);
    };
  return out;
}

Tape::Var Tape::row_log_softmax(Var logits) {
  const Mat& x = nodes_[logits].value;
  Mat ls(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double m = x.row(i).maxCoeff();
    double lse = m + std::log((x.row(i).array() - m).exp().sum());
    ls.row(i) = x.row(i).array() - lse;
  }
  Var out = push(std::move(ls), needs(logits), "softmax_log");
  if (needs(logits))
    nodes_[out].back = [this, out, logits] {
      // d log_softmax: G - softmax .* rowsum(G)
      const Mat& g = nodes_[out].grad;
      Mat p = nodes_[out].value.array().exp();
      Vec rs = g.rowwise().sum();
      for (Eigen::Index i = 0; i < g.rows(); ++i)
        nodes_[logits].grad.row(i) += g.row(i) - rs(i) * p.row(i);
    };
  return out;
}

Tape::Var Tape::select_col(Var a, std::vector<int> idx) {
  const Mat& x = nodes_[a].value;
  if (static_cast<Eigen::Index>(idx.size()) != x.rows())
    throw UsageError("select_col: one index per row required");
  Mat v(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (idx[i] < 0 || idx[i] >= x.cols())
      throw InputError("select_col: action index out of range");
    v(i, 0) = x(i, idx[i]);
  }
  Var out = push(std::move(v), needs(a), "select");
  if (needs(a))
    nodes_[out].back = [this, out, a, idx = std::move(idx)] {
      const Mat& g = nodes_[out].grad;
      for (Eigen::Index i = 0; i < g.rows(); ++i)
        nodes_[a].grad(i, idx[i]) += g(i, 0);
    };
  return out;
}

Tape::Var Tape::gaussian_log_prob(Var mean, Var log_std, const Mat& actions) {
  const Mat& mu = nodes_[mean].value;
  const Vec ls = nodes_[log_std].value.col(0);
  const Eigen::Index b = mu.rows(), d = mu.cols();
  Vec inv_var = (-2.0 * ls).array().exp();
  Mat v(b, 1);
  const double base = ls.sum() + 0.5 * kLogTwoPi * static_cast<double>(d);
  for (Eigen::Index i = 0; i < b; ++i) {
    double q = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      double diff = actions(i, k) - mu(i, k);
      q += diff * diff * inv_var(k);
    }
    v(i, 0) = -0.5 * q - base;
  }
  Var out =
      push(std::move(v), needs(mean) || needs(log_std), "gaussian_logprob");
  nodes_[out].back = [this, out, mean, log_std, actions, inv_var] {
    const Vec g = nodes_[out].grad.col(0);
    const Mat& mu2 = nodes_[mean].value;
    for (Eigen::Index i = 0; i < mu2.rows(); ++i)
      for (Eigen::Index k = 0; k < mu2.cols(); ++k) {
        double diff = actions(i, k) - mu2(i, k);
        if (needs(mean)) nodes_[mean].grad(i, k) += g(i) * diff * inv_var(k);
        if (needs(log_std))
          nodes_[log_std].grad(k, 0) += g(i) * (diff * diff * inv_var(k) - 1.0);
      }
  };
  return out;
}

Tape::Var Tape::categorical_kl_from(Var logits_new, const Mat& probs_old) {
  Var ls = row_log_softmax(logits_new);
  const Mat& lsv = nodes_[ls].value;
  Mat v(lsv.rows(), 1);
  for (Eigen::Index i = 0; i < lsv.rows(); ++i) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < lsv.cols(); ++k) {
      double p = probs_old(i, k);
      if (p > 0.0) acc += p * (std::log(p) - lsv(i, k));
    }
    v(i, 0) = acc;
  }
  Var out = push(std::move(v), needs(ls), "categorical_kl");
  if (needs(ls))
    nodes_[out].back = [this, out, ls, probs_old] {
      const Vec g = nodes_[out].grad.col(0);
      for (Eigen::Index i = 0; i < g.size(); ++i)
        nodes_[ls].grad.row(i) -= g(i) * probs_old.row(i);
    };
  return out;
}

Tape::Var Tape::gaussian_kl_from(Var mean_new, Var logstd_new,
                                 const Mat& mean_old, const Vec& logstd_old) {
  const Mat& m2 = nodes_[mean_new].value;
  const Vec ls2 = nodes_[logstd_new].value.col(0);
  const Eigen::Index b = m2.rows(), d = m2.cols();
  Vec s1sq = (2.0 * logstd_old).array().exp();
  Vec inv_s2sq = (-2.0 * ls2).array().exp();
  const double base = (ls2 - logstd_old).sum() - 0.5 * static_cast<double>(d);
  Mat v(b, 1);
  for (Eigen::Index i = 0; i < b; ++i) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      double dm = mean_old(i, k) - m2(i, k);
      acc += 0.5 * (s1sq(k) + dm * dm) * inv_s2sq(k);
    }
    v(i, 0) = acc + base;
  }
  Var out = push(std::move(v), needs(mean_new) || needs(logstd_new),
                 "gaussian_kl");
  nodes_[out].back = [this, out, mean_new, logstd_new, mean_old, s1sq,
                      inv_s2sq] {
    const Vec g = nodes_[out].grad.col(0);
    const Mat& m2b = nodes_[mean_new].value;
    for (Eigen::Index i = 0; i < m2b.rows(); ++i)
      for (Eigen::Index k = 0; k < m2b.cols(); ++k) {
        double dm = mean_old(i, k) - m2b(i, k);
        if (needs(mean_new))
          nodes_[mean_new].grad(i, k) -= g(i) * dm * inv_s2sq(k);
        if (needs(logstd_new))
          nodes_[logstd_new].grad(k, 0) +=
              g(i) * (1.0 - (s1sq(k) + dm * dm) * inv_s2sq(k));
      }
  };
  return out;
}

}  // namespace mcpo::nn
