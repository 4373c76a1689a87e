#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "mcpo/types.hpp"

namespace mcpo::nn {

// Reverse-mode differentiation over a fixed op set, recorded on a tape of
// Eigen matrices. Losses are built forward as a graph of Var handles; a
// single backward() pass accumulates exact gradients into every node that
// requires them. Scalars are 1x1 matrices, flat parameter vectors are Px1.
//
// A tape is single-use and not shareable mid-recording; build one per loss.
class Tape {
 public:
  using Var = int;

  Tape() { nodes_.reserve(96); }

  // -- leaves --
  Var constant(Mat value) { return push(std::move(value), false, "constant"); }
  Var param(Mat value) { return push(std::move(value), true, "param"); }
  Var param_flat(const Vec& v) { return param(v); }

  // -- structural ops --

  // rows x cols view of a flat (Px1) vector, column-major
  Var segment(Var flat, int offset, int rows, int cols);
  Var transpose(Var a);

  // -- arithmetic ops --
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  // broadcast a column-vector bias over every row of m
  Var add_bias(Var m, Var bias);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var cmul(Var a, const Mat& c);
  Var cadd(Var a, const Mat& c);
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);

  Var tanh_op(Var a);
  Var relu(Var a);
  Var exp_op(Var a);
  Var log_op(Var a);
  Var square(Var a);
  Var minimum(Var a, Var b);
  Var clip(Var a, double lo, double hi);
  // mask entries are 0 or 1/keep_prob (inverted dropout), supplied by caller
  Var dropout_mask(Var a, const Mat& mask);

  // -- reductions --
  Var row_sum(Var a);    // BxK -> Bx1
  Var mean_all(Var a);   // -> 1x1
  Var sum_all(Var a);    // -> 1x1

  // -- distribution ops --
  Var row_log_softmax(Var logits);
  // per-row pick: out(i,0) = a(i, idx[i])
  Var select_col(Var a, std::vector<int> idx);
  // diag-gaussian log-density of fixed actions; mean BxD, log_std Dx1
  Var gaussian_log_prob(Var mean, Var log_std, const Mat& actions);
  // closed-form KL(p_old || p_new) per row, old side constant
  Var categorical_kl_from(Var logits_new, const Mat& probs_old);
  Var gaussian_kl_from(Var mean_new, Var logstd_new, const Mat& mean_old,
                       const Vec& logstd_old);

  // -- access --
  const Mat& value(Var v) const { return nodes_[v].value; }
  double scalar(Var v) const { return nodes_[v].value(0, 0); }
  const Mat& grad(Var v) const { return nodes_[v].grad; }
  Vec grad_flat(Var v) const;

  // seeds d(loss)=1 and runs the recorded graph in reverse
  void backward(Var loss);

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    const char* op = "";
    std::function<void()> back;
  };

  Var push(Mat value, bool needs_grad, const char* op);
  bool needs(Var v) const { return nodes_[v].needs_grad; }
  void check_finite(const Mat& m, const char* op) const;

  std::vector<Node> nodes_;
};

}  // namespace mcpo::nn
