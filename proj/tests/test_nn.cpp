#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "latte/nn.hpp"
#include "testutil.hpp"

using namespace latte;
using testutil::rel_err;

TEST_CASE("mlp_init shapes and zero biases") {
  SeededRng rng(1);
  MlpParams p = mlp_init("net", {4, 8, 2}, Act::tanh, Act::identity, rng);
  REQUIRE(p.layers.size() == 2);
  CHECK(p.layers[0].weight.value.shape == Shape{4, 8});
  CHECK(p.layers[1].weight.value.shape == Shape{8, 2});
  for (const auto& layer : p.layers)
    for (double b : layer.bias.value.data) CHECK(b == 0.0);
  CHECK(p.layers[0].weight.name == "net.l0.W");
  CHECK_THROWS_AS(mlp_init("bad", {4}, Act::tanh, Act::identity, rng), ContractError);
}

TEST_CASE("glorot weight variance is about 2/(fan_in+fan_out)") {
  SeededRng rng(2);
  MlpParams p = mlp_init("net", {100, 100}, Act::tanh, Act::identity, rng);
  const auto& w = p.layers[0].weight.value.data;  // 1e4 draws
  double mean = 0.0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(w.size());
  double var = 0.0;
  for (double v : w) var += (v - mean) * (v - mean);
  var /= static_cast<double>(w.size());
  const double target = 2.0 / 200.0;
  CHECK(var > 0.8 * target);
  CHECK(var < 1.2 * target);
}

TEST_CASE("mlp_forward closed forms") {
  SeededRng rng(3);
  SECTION("zero weights and biases give zero output") {
    MlpParams p = mlp_init("net", {3, 4, 2}, Act::tanh, Act::identity, rng);
    for (auto& layer : p.layers) {
      for (auto& v : layer.weight.value.data) v = 0.0;
      for (auto& v : layer.bias.value.data) v = 0.0;
    }
    Tape tp;
    Tensor y = mlp_forward(tp, p, tp.input(Tensor::matrix(2, 3, {1, -2, 3, 0.5, 0, 1})));
    for (double v : y.data) CHECK(v == 0.0);
  }
  SECTION("single identity layer is the identity map") {
    MlpParams p = mlp_init("net", {2, 2}, Act::tanh, Act::identity, rng);
    p.layers[0].weight.value = Tensor::matrix(2, 2, {1, 0, 0, 1});
    Tape tp;
    Tensor y = mlp_forward(tp, p, tp.input(Tensor::matrix(1, 2, {0.7, -1.3})));
    CHECK(y.data == std::vector<double>{0.7, -1.3});
  }
  SECTION("input width mismatch is a dimension error") {
    MlpParams p = mlp_init("net", {3, 2}, Act::tanh, Act::identity, rng);
    Tape tp;
    CHECK_THROWS_AS(mlp_forward(tp, p, tp.input(Tensor::matrix(1, 2, {1, 2}))), DimensionError);
  }
}

TEST_CASE("mlp gradient matches finite differences on a 3-layer net") {
  SeededRng rng(4);
  MlpParams p = mlp_init("net", {3, 5, 4, 2}, Act::tanh, Act::identity, rng);
  Tensor x = Tensor::matrix(2, 3, {0.3, -0.8, 1.1, 0.2, 0.9, -0.4});
  auto build = [&](Tape& tp) { return tp.reduce_sum(tp.square(mlp_forward(tp, p, tp.input(x)))); };
  auto loss = [&] {
    Tape tp;
    return build(tp).value();
  };
  Tape tp;
  GradientMap g = tp.backward(build(tp));
  for (auto& layer : p.layers)
    for (Parameter* prm : {&layer.weight, &layer.bias}) {
      auto fd = testutil::fd_gradient(loss, prm->value.data);
      const auto& an = g.at(prm->name).data;
      for (std::size_t i = 0; i < fd.size(); ++i) CHECK(rel_err(an[i], fd[i], 1e-6) < 1e-5);
    }
}

TEST_CASE("gru step closed forms") {
  SeededRng rng(5);
  RnnParams p = rnn_init("rnn", Cell::gru, 3, 4, 1, rng);
  SECTION("zero weights and zero state stay zero") {
    std::vector<Parameter*> params;
    rnn_collect(p, params);
    for (Parameter* prm : params)
      for (auto& v : prm->value.data) v = 0.0;
    Tape tp;
    HiddenState st = rnn_zero_state(tp, p, 2);
    HiddenState next = rnn_step(tp, p, tp.input(Tensor::zeros({2, 3})), st);
    for (double v : next.h[0].data) CHECK(v == 0.0);
  }
  SECTION("shape mismatches rejected") {
    Tape tp;
    HiddenState st = rnn_zero_state(tp, p, 2);
    CHECK_THROWS_AS(rnn_step(tp, p, tp.input(Tensor::zeros({2, 5})), st), DimensionError);
  }
}

TEST_CASE("contractive gru converges to a fixed point") {
  SeededRng rng(6);
  RnnParams p = rnn_init("rnn", Cell::gru, 2, 6, 1, rng);
  std::vector<Parameter*> params;
  rnn_collect(p, params);
  for (Parameter* prm : params)
    for (auto& v : prm->value.data) v *= 0.3;  // well inside the contractive regime
  Tensor x = Tensor::matrix(1, 2, {0.4, -0.7});
  Tape tp;
  HiddenState st = rnn_zero_state(tp, p, 1);
  double prev_delta = -1.0;
  double first_delta = 0.0, last_delta = 0.0;
  for (int step = 0; step < 60; ++step) {
    HiddenState next = rnn_step(tp, p, tp.input(x), st);
    double delta = 0.0;
    for (int j = 0; j < 6; ++j) {
      const double d = next.h[0].data[static_cast<std::size_t>(j)] - st.h[0].data[static_cast<std::size_t>(j)];
      delta += d * d;
    }
    delta = std::sqrt(delta);
    if (step == 0) first_delta = delta;
    last_delta = delta;
    if (prev_delta >= 0.0) CHECK(delta <= prev_delta * (1.0 + 1e-9) + 1e-300);
    prev_delta = delta;
    st = next;
  }
  CHECK(last_delta < 1e-6 * std::max(first_delta, 1e-30));
}

TEST_CASE("gru gradient through a 5-step unroll matches finite differences") {
  SeededRng rng(7);
  RnnParams p = rnn_init("rnn", Cell::gru, 2, 3, 1, rng);
  std::vector<Tensor> xs;
  for (int t = 0; t < 5; ++t) {
    Tensor x = Tensor::zeros({2, 2});
    for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
    xs.push_back(x);
  }
  auto build = [&](Tape& tp) {
    HiddenState st = rnn_zero_state(tp, p, 2);
    for (const auto& x : xs) st = rnn_step(tp, p, tp.input(x), st);
    return tp.reduce_sum(tp.square(st.h.back()));
  };
  auto loss = [&] {
    Tape tp;
    return build(tp).value();
  };
  Tape tp;
  GradientMap g = tp.backward(build(tp));
  std::vector<Parameter*> params;
  rnn_collect(p, params);
  for (Parameter* prm : params) {
    auto fd = testutil::fd_gradient(loss, prm->value.data);
    const auto& an = g.at(prm->name).data;
    for (std::size_t i = 0; i < fd.size(); ++i) CHECK(rel_err(an[i], fd[i], 1e-6) < 1e-4);
  }
}

TEST_CASE("lstm step works and its unroll gradient checks out") {
  SeededRng rng(8);
  RnnParams p = rnn_init("rnn", Cell::lstm, 2, 3, 2, rng);
  auto build = [&](Tape& tp) {
    HiddenState st = rnn_zero_state(tp, p, 1);
    for (int t = 0; t < 3; ++t)
      st = rnn_step(tp, p, tp.input(Tensor::matrix(1, 2, {0.3 * (t + 1), -0.2})), st);
    return tp.reduce_sum(tp.square(st.h.back()));
  };
  auto loss = [&] {
    Tape tp;
    return build(tp).value();
  };
  Tape tp;
  GradientMap g = tp.backward(build(tp));
  std::vector<Parameter*> params;
  rnn_collect(p, params);
  REQUIRE(params.size() == 24);  // 2 layers x 4 gates x (W, U, b)
  for (Parameter* prm : params) {
    auto fd = testutil::fd_gradient(loss, prm->value.data);
    const auto& an = g.at(prm->name).data;
    for (std::size_t i = 0; i < fd.size(); ++i) CHECK(rel_err(an[i], fd[i], 1e-6) < 1e-4);
  }
}

TEST_CASE("adam closed forms") {
  SECTION("zero gradients leave parameters unchanged") {
    Parameter w{"w", Tensor::row({1.0, -2.0})};
    GradientMap g;
    g.emplace("w", Tensor::zeros({2}));
    AdamState st;
    adam_step({&w}, g, st);
    CHECK(w.value.data == std::vector<double>{1.0, -2.0});
  }
  SECTION("first step has magnitude about lr") {
    Parameter w{"w", Tensor::row({0.0})};
    GradientMap g;
    g.emplace("w", Tensor::row({0.37}));
    AdamState st;
    st.cfg.lr = 0.01;
    adam_step({&w}, g, st);
    CHECK(std::abs(w.value.value() + 0.01) < 1e-6);  // update = -lr * g/(|g|+eps')
  }
  SECTION("missing gradient is a contract error") {
    Parameter w{"w", Tensor::row({0.0})};
    GradientMap g;
    AdamState st;
    CHECK_THROWS_AS(adam_step({&w}, g, st), ContractError);
  }
  SECTION("first-step direction is invariant to gradient scale") {
    auto first_update_signs = [](double c) {
      Parameter w{"w", Tensor::row({0.0, 0.0, 0.0})};
      GradientMap g;
      g.emplace("w", Tensor::row({0.2 * c, -1.3 * c, 0.001 * c}));
      AdamState st;
      adam_step({&w}, g, st);
      std::vector<int> signs;
      for (double v : w.value.data) signs.push_back(v > 0 ? 1 : v < 0 ? -1 : 0);
      return signs;
    };
    CHECK(first_update_signs(1.0) == first_update_signs(100.0));
    CHECK(first_update_signs(1.0) == first_update_signs(0.01));
  }
}

TEST_CASE("adam drives a quadratic to its minimum") {
  Parameter w{"w", Tensor::row({0.0})};
  AdamState st;
  st.cfg.lr = 0.1;
  for (int step = 0; step < 200; ++step) {
    GradientMap g;
    g.emplace("w", Tensor::row({2.0 * (w.value.value() - 3.0)}));
    adam_step({&w}, g, st);
  }
  CHECK(std::abs(w.value.value() - 3.0) < 0.05);
}

TEST_CASE("gradient clipping caps the global norm") {
  GradientMap g;
  g.emplace("a", Tensor::row({30.0, 40.0}));  // norm 50
  clip_gradients(g, 10.0);
  CHECK(gradient_global_norm(g) == Catch::Approx(10.0).epsilon(1e-12));
  clip_gradients(g, 100.0);  // under the cap: untouched
  CHECK(gradient_global_norm(g) == Catch::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("seeded rng is reproducible and forks cleanly") {
  SeededRng a(99), b(99);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  SeededRng c(99);
  SeededRng f1 = c.fork(3), f2 = c.fork(3), f3 = c.fork(4);
  CHECK(f1.next_u64() == f2.next_u64());
  CHECK(f1.next_u64() != f3.next_u64());

  SeededRng n(123);
  double mean = 0.0, var = 0.0;
  const int draws = 100000;
  std::vector<double> xs(draws);
  for (auto& x : xs) x = n.normal();
  for (double x : xs) mean += x;
  mean /= draws;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= draws;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(std::sqrt(var) - 1.0) < 0.02);

  SeededRng u(5);
  for (int i = 0; i < 1000; ++i) {
    const int v = u.uniform_int(7);
    CHECK(v >= 0);
    CHECK(v < 7);
  }
}
