#include <doctest.h>

#include "mcpo/adam.hpp"
#include "mcpo/net.hpp"
#include "mcpo/oracle.hpp"

using namespace mcpo;
using nn::NetArch;

TEST_CASE("zero parameters give a uniform policy and zero value") {
  NetArch arch = NetArch::mlp(3, nn::PolicyHead::CategoricalLogits, 4, 8);
  Vec params = Vec::Zero(nn::param_count(arch));
  Vec state(3);
  state << 0.7, -1.2, 0.4;
  nn::ForwardOut out = nn::forward(params, arch, state);
  CHECK(out.dist.logits_or_mean.cwiseAbs().maxCoeff() == 0.0);
  CHECK(out.value == 0.0);
}

TEST_CASE("forward matches a hand-computed 2-1-2 network") {
  NetArch arch;
  arch.input_dim = 2;
  arch.hidden = {{1, nn::Activation::Tanh}};
  arch.policy_head = nn::PolicyHead::CategoricalLogits;
  arch.action_dim = 2;
  arch.value_head = true;

  // layout: W1(2x1) b1(1) Wp(1x2) bp(2) Wv(1x1) bv(1)
  Vec p(nn::param_count(arch));
  REQUIRE(p.size() == 9);
  p << 0.5, -0.25, 0.1, 0.3, -0.2, 0.05, -0.05, 2.0, -0.3;

  Vec state(2);
  state << 1.0, 2.0;
  nn::ForwardOut out = nn::forward(p, arch, state);

  // worked by hand with scalar arithmetic
  double pre = 0.5 * 1.0 + (-0.25) * 2.0 + 0.1;
  double h = std::tanh(pre);
  double logit0 = 0.3 * h + 0.05;
  double logit1 = -0.2 * h - 0.05;
  double value = 2.0 * h - 0.3;
  CHECK(out.dist.logits_or_mean(0) == doctest::Approx(logit0).epsilon(1e-15));
  CHECK(out.dist.logits_or_mean(1) == doctest::Approx(logit1).epsilon(1e-15));
  CHECK(out.value == doctest::Approx(value).epsilon(1e-15));
}

TEST_CASE("forward is deterministic bit for bit") {
  NetArch arch = NetArch::mlp(3, nn::PolicyHead::GaussianMean, 1, 16);
  Vec params = nn::init_params(arch, 99);
  Vec state(3);
  state << 0.2, 0.4, -0.9;
  nn::ForwardOut a = nn::forward(params, arch, state);
  Vec params2 = params;
  params2.array() += 0.0;
  nn::ForwardOut b = nn::forward(params2, arch, state);
  CHECK(a.dist.logits_or_mean(0) == b.dist.logits_or_mean(0));
  CHECK(a.value == b.value);
}

TEST_CASE("forward rejects mismatched dimensions") {
  NetArch arch = NetArch::mlp(3, nn::PolicyHead::CategoricalLogits, 2, 8);
  Vec params = Vec::Zero(nn::param_count(arch));
  CHECK_THROWS_AS(nn::forward(params, arch, Vec::Zero(4)), ConfigError);
  CHECK_THROWS_AS(nn::forward(Vec::Zero(3), arch, Vec::Zero(3)), ConfigError);
}

TEST_CASE("batched forward equals per-state forward") {
  NetArch arch = NetArch::mlp(4, nn::PolicyHead::GaussianMean, 2, 8);
  Vec params = nn::init_params(arch, 5);
  RngStream rng(2);
  Mat states(6, 4);
  for (int i = 0; i < states.size(); ++i) states.data()[i] = rng.normal();
  nn::BatchForwardOut batch = nn::forward_batch(params, arch, states);
  for (int i = 0; i < 6; ++i) {
    nn::ForwardOut one = nn::forward(params, arch, states.row(i).transpose());
    CHECK((one.dist.logits_or_mean -
           batch.mean_or_logits.row(i).transpose())
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    CHECK(one.value == doctest::Approx(batch.values(i)).epsilon(1e-12));
  }
}

TEST_CASE("tape forward agrees with the plain forward") {
  NetArch arch = NetArch::mlp(3, nn::PolicyHead::CategoricalLogits, 4, 8);
  Vec params = nn::init_params(arch, 31);
  RngStream rng(4);
  Mat states(5, 3);
  for (int i = 0; i < states.size(); ++i) states.data()[i] = rng.normal();

  nn::BatchForwardOut plain = nn::forward_batch(params, arch, states);
  nn::Tape tape;
  nn::Tape::Var flat = tape.param_flat(params);
  nn::TapeForwardOut rec = nn::forward_on_tape(tape, flat, arch, states);
  CHECK((tape.value(rec.mean_or_logits) - plain.mean_or_logits)
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK((tape.value(rec.values).col(0) - plain.values).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("network log-prob gradient matches finite differences") {
  RngStream rng(21);
  NetArch arch = NetArch::mlp(2, nn::PolicyHead::CategoricalLogits, 3, 4);
  Vec params = nn::init_params(arch, 77);
  Mat states(3, 2);
  for (int i = 0; i < states.size(); ++i) states.data()[i] = rng.normal();
  std::vector<int> actions = {0, 2, 1};

  nn::LossBuilder f = [&](nn::Tape& t, nn::Tape::Var flat) {
    nn::TapeForwardOut fwd = nn::forward_on_tape(t, flat, arch, states);
    return t.mean_all(nn::log_prob_on_tape(t, fwd, arch, actions, Mat()));
  };
  Vec g = nn::grad(f, params);
  Vec fd = oracle::finite_diff_grad(
      [&](const Vec& q) { return nn::eval_loss(f, q); }, params);
  for (int i = 0; i < g.size(); ++i) {
    double scale = std::max(std::abs(g(i)), std::abs(fd(i)));
    if (scale > 1e-6) CHECK(std::abs(g(i) - fd(i)) / scale < 1e-4);
  }
}

TEST_CASE("init_params is deterministic per seed") {
  NetArch arch = NetArch::mlp(3, nn::PolicyHead::GaussianMean, 1, 8);
  Vec a = nn::init_params(arch, 12);
  Vec b = nn::init_params(arch, 12);
  Vec c = nn::init_params(arch, 13);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("adam leaves parameters unchanged on zero gradient") {
  nn::AdamState s = nn::AdamState::make(3, 1e-3);
  Vec p(3);
  p << 1.0, -2.0, 0.5;
  auto [np, ns] = nn::adam_step(s, p, Vec::Zero(3), false);
  CHECK((np - p).cwiseAbs().maxCoeff() == 0.0);
  CHECK(ns.step == 1);
}

TEST_CASE("adam first step moves by about step_size in the gradient sign") {
  nn::AdamState s = nn::AdamState::make(2, 1e-3);
  Vec p = Vec::Zero(2);
  Vec g(2);
  g << 0.5, -3.0;
  auto [np, ns] = nn::adam_step(s, p, g, false);
  // bias-corrected first step: alpha * g / (|g| + eps)
  for (int i = 0; i < 2; ++i) {
    double expect = -1e-3 * g(i) / (std::abs(g(i)) + 1e-8);
    CHECK(np(i) == doctest::Approx(expect).epsilon(1e-9));
  }
  CHECK(ns.step == 1);
}

TEST_CASE("adam second step matches the hand-computed moment recursion") {
  const double lr = 2e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  nn::AdamState s = nn::AdamState::make(1, lr);
  Vec p = Vec::Zero(1);
  Vec g = Vec::Constant(1, 0.7);
  auto [p1, s1] = nn::adam_step(s, p, g, false);
  auto [p2, s2] = nn::adam_step(s1, p1, g, false);

  double m1 = (1 - b1) * 0.7, v1 = (1 - b2) * 0.49;
  double m2 = b1 * m1 + (1 - b1) * 0.7, v2 = b2 * v1 + (1 - b2) * 0.49;
  double mhat = m2 / (1 - b1 * b1), vhat = v2 / (1 - b2 * b2);
  double expected = p1(0) - lr * mhat / (std::sqrt(vhat) + eps);
  CHECK(p2(0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(s2.step == 2);
}

TEST_CASE("adam maximize negates the gradient") {
  nn::AdamState s = nn::AdamState::make(1, 1e-3);
  Vec p = Vec::Zero(1);
  Vec g = Vec::Constant(1, 1.0);
  auto [down, s1] = nn::adam_step(s, p, g, false);
  auto [up, s2] = nn::adam_step(s, p, g, true);
  CHECK(down(0) < 0.0);
  CHECK(up(0) > 0.0);
  CHECK(down(0) == doctest::Approx(-up(0)).epsilon(1e-12));
}

TEST_CASE("adam rejects non-finite gradients and length mismatch") {
  nn::AdamState s = nn::AdamState::make(2, 1e-3);
  Vec p = Vec::Zero(2);
  Vec bad(2);
  bad << 1.0, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(nn::adam_step(s, p, bad, false), NumericalError);
  CHECK_THROWS_AS(nn::adam_step(s, p, Vec::Zero(3), false), ConfigError);
}
