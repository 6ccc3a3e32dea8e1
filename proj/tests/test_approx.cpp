#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "basis/approx.hpp"

using namespace basis;

TEST_CASE("ParamVector blocks tile the flat array in order") {
  ParamVector p;
  int a = p.add_block("W0", 2, 3);
  int b = p.add_block("b0", 2);
  CHECK(a == 0);
  CHECK(b == 1);
  CHECK(p.size() == 8);
  CHECK(p.block(0).offset == 0);
  CHECK(p.block(1).offset == 6);
  CHECK(p.block_index("b0") == 1);
  CHECK(p.block_index("nope") == -1);

  p.mat("W0")(1, 2) = 5.0;
  CHECK(p.data()[1 + 2 * 2] == 5.0);  // column-major within the block
  p.vec("b0")[0] = -1.0;
  CHECK(p.data()[6] == -1.0);
}

TEST_CASE("affine Mlp computes Wx + b exactly") {
  ApproximatorSpec spec{2, {}, Activation::relu, 2};
  Mlp net(spec);
  auto W = net.params().mat("W0");
  W << 1.0, 2.0, 3.0, 4.0;
  net.params().vec("b0") << 0.5, -0.5;

  Eigen::MatrixXd x(2, 1);
  x << 1.0, -1.0;
  Eigen::MatrixXd y = net.forward(x);
  CHECK(y(0, 0) == doctest::Approx(1.0 - 2.0 + 0.5));
  CHECK(y(1, 0) == doctest::Approx(3.0 - 4.0 - 0.5));
}

TEST_CASE("one-hidden-layer forward matches a hand computation") {
  // 1 -> 2 -> 1 with relu: y = V relu(Wx + b) + c
  ApproximatorSpec spec{1, {2}, Activation::relu, 1};
  Mlp net(spec);
  net.params().mat("W0") << 1.0, -1.0;            // 2x1
  net.params().vec("b0") << 0.0, 0.5;             // 2
  net.params().mat("W1") << 2.0, 3.0;             // 1x2
  net.params().vec("b1") << 0.25;                 // 1

  Eigen::MatrixXd x(1, 2);
  x << 1.0, -2.0;  // two batch columns
  Eigen::MatrixXd y = net.forward(x);
  // x=1: h = relu([1, -0.5]) = [1, 0],   y = 2*1 + 3*0 + 0.25 = 2.25
  // x=-2: h = relu([-2, 2.5]) = [0, 2.5], y = 3*2.5 + 0.25 = 7.75
  CHECK(y(0, 0) == doctest::Approx(2.25));
  CHECK(y(0, 1) == doctest::Approx(7.75));
}

TEST_CASE("tanh hidden activation is applied") {
  ApproximatorSpec spec{1, {1}, Activation::tanh, 1};
  Mlp net(spec);
  net.params().mat("W0") << 2.0;
  net.params().vec("b0") << 0.0;
  net.params().mat("W1") << 1.0;
  net.params().vec("b1") << 0.0;
  Eigen::MatrixXd x(1, 1);
  x << 0.5;
  CHECK(net.forward(x)(0, 0) == doctest::Approx(std::tanh(1.0)));
}

TEST_CASE("backward gradients match central finite differences") {
  ApproximatorSpec spec{3, {4, 3}, Activation::tanh, 2};
  Mlp net(spec);
  Rng rng(99);
  net.init_uniform(rng);

  const int B = 5;
  Eigen::MatrixXd x(3, B), cot(2, B);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (int i = 0; i < cot.size(); ++i) cot.data()[i] = rng.normal();

  MlpTape tape;
  net.forward(x, tape);
  GradBuffer grads(net.params());
  Eigen::MatrixXd dinput;
  net.backward(tape, cot, grads, &dinput);

  // loss = sum_b cot(:,b) . y(:,b); probe every parameter
  auto loss = [&] { return (cot.array() * net.forward(x).array()).sum(); };
  const double h = 1e-6;
  for (size_t i = 0; i < net.params().size(); ++i) {
    double saved = net.params().data()[i];
    net.params().data()[i] = saved + h;
    double lp = loss();
    net.params().data()[i] = saved - h;
    double lm = loss();
    net.params().data()[i] = saved;
    double fd = (lp - lm) / (2 * h);
    CHECK(grads.data()[i] == doctest::Approx(fd).epsilon(1e-5));
  }

  // input gradients by the same probe
  for (int i = 0; i < x.size(); ++i) {
    double saved = x.data()[i];
    x.data()[i] = saved + h;
    double lp = loss();
    x.data()[i] = saved - h;
    double lm = loss();
    x.data()[i] = saved;
    CHECK(dinput.data()[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("backward accumulates rather than overwrites") {
  ApproximatorSpec spec{2, {}, Activation::relu, 1};
  Mlp net(spec);
  net.params().mat("W0") << 1.0, 1.0;
  net.params().vec("b0") << 0.0;
  Eigen::MatrixXd x(2, 1), cot(1, 1);
  x << 1.0, 2.0;
  cot << 1.0;
  MlpTape tape;
  net.forward(x, tape);
  GradBuffer grads(net.params());
  net.backward(tape, cot, grads);
  net.backward(tape, cot, grads);
  CHECK(grads.mat("W0")(0, 0) == doctest::Approx(2.0));  // 2 passes of x0=1
  CHECK(grads.mat("W0")(0, 1) == doctest::Approx(4.0));
}

TEST_CASE("init_uniform stays within the fan-in bound and is seed-deterministic") {
  ApproximatorSpec spec{9, {4}, Activation::relu, 2};
  Mlp a(spec), b(spec);
  Rng r1(5), r2(5);
  a.init_uniform(r1);
  b.init_uniform(r2);
  for (size_t i = 0; i < a.params().size(); ++i)
    CHECK(a.params().data()[i] == b.params().data()[i]);
  // first layer fan-in 9 -> bound 1/3
  auto W0 = a.params().mat("W0");
  for (int i = 0; i < W0.size(); ++i) CHECK(std::abs(W0.data()[i]) <= 1.0 / 3);
  bool any_nonzero = false;
  for (size_t i = 0; i < a.params().size(); ++i)
    any_nonzero |= a.params().data()[i] != 0.0;
  CHECK(any_nonzero);
}

TEST_CASE("first Adam step moves each coordinate by about lr") {
  // with zero state, the bias-corrected update is lr * g / (|g| + eps)
  ParamVector p;
  p.add_block("w", 3);
  p.vec("w") << 1.0, 2.0, 3.0;
  GradBuffer g(p);
  g.block_span("w")[0] = 0.5;
  g.block_span("w")[1] = -4.0;
  g.block_span("w")[2] = 0.0;
  AdamState state(p.size());
  optimizer_step(p, g, state, 0.01);
  CHECK(p.vec("w")[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-4));
  CHECK(p.vec("w")[1] == doctest::Approx(2.0 + 0.01).epsilon(1e-4));
  CHECK(p.vec("w")[2] == doctest::Approx(3.0));
  CHECK(state.t == 1);
}

TEST_CASE("Adam converges on a separable quadratic") {
  ParamVector p;
  p.add_block("w", 2);
  p.vec("w") << 5.0, -3.0;
  GradBuffer g(p);
  AdamState state(p.size());
  for (int i = 0; i < 4000; ++i) {
    g.block_span("w")[0] = 2.0 * (p.vec("w")[0] - 1.0);
    g.block_span("w")[1] = 2.0 * (p.vec("w")[1] + 2.0);
    optimizer_step(p, g, state, 0.01);
  }
  CHECK(p.vec("w")[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(p.vec("w")[1] == doctest::Approx(-2.0).epsilon(1e-3));
}

TEST_CASE("optimizer_step rejects non-finite gradients") {
  ParamVector p;
  p.add_block("w", 1);
  GradBuffer g(p);
  g.data()[0] = std::numeric_limits<double>::quiet_NaN();
  AdamState state(1);
  CHECK_THROWS_AS(optimizer_step(p, g, state, 0.1), NonConvergence);
}

TEST_CASE("gradcheck accepts a correct gradient and flags a corrupted one") {
  ParamVector p;
  p.add_block("w", 4);
  Rng rng(21);
  for (int i = 0; i < 4; ++i) p.vec("w")[i] = rng.normal();

  // loss = sum w_i^3, grad = 3 w_i^2
  auto loss = [&] {
    double s = 0.0;
    for (int i = 0; i < 4; ++i) s += std::pow(p.vec("w")[i], 3);
    return s;
  };
  std::vector<double> grad(4);
  for (int i = 0; i < 4; ++i) grad[i] = 3.0 * p.vec("w")[i] * p.vec("w")[i];
  Rng probe(1);
  CHECK(gradcheck(p, grad, loss, 8, probe) < 1e-6);

  grad[2] *= 1.5;
  Rng probe2(1);
  CHECK(gradcheck(p, grad, loss, 8, probe2) > 1e-2);
}
