#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../common/oracles.hpp"
#include "drd/nn/adam.hpp"
#include "drd/nn/graph.hpp"
#include "drd/nn/kernels.hpp"
#include "drd/nn/loss.hpp"

using namespace drd;
using namespace drd::nn;

namespace {

TensorD randn(std::vector<int> shape, std::uint64_t seed) {
  TensorD t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  for (auto& v : t.values()) v = n(rng);
  return t;
}

std::vector<double> vec(const TensorD& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

struct ConvCase {
  int n, c, h, w, o, k, stride, pad;
};

class ConvForward : public ::testing::TestWithParam<ConvCase> {};

TEST_P(ConvForward, MatchesDirectLoop) {
  const auto p = GetParam();
  const auto x = randn({p.n, p.c, p.h, p.w}, 1);
  const auto wt = randn({p.o, p.c, p.k, p.k}, 2);
  const auto b = randn({p.o}, 3);
  int ho = 0, wo = 0;
  const auto ref = oracle::conv2d(vec(x), p.n, p.c, p.h, p.w, vec(wt), vec(b), p.o, p.k, p.stride, p.pad, ho, wo);
  const auto y = conv2d_forward(x, wt, b, {p.stride, p.pad});
  ASSERT_EQ(y.shape(), (std::vector<int>{p.n, p.o, ho, wo}));
  for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(y[i], ref[i], 1e-10);
}

INSTANTIATE_TEST_SUITE_P(Geometries, ConvForward,
                         ::testing::Values(ConvCase{2, 3, 5, 5, 4, 3, 1, 1}, ConvCase{1, 2, 7, 6, 3, 3, 2, 0},
                                           ConvCase{2, 4, 4, 4, 2, 1, 1, 0}, ConvCase{1, 1, 9, 9, 2, 3, 2, 1},
                                           ConvCase{3, 2, 3, 3, 5, 3, 1, 0}));

TEST(Conv, BackwardMatchesAdjointIdentity) {
  // <dy, conv(x)> is linear in x and w: dx and dw are the adjoints.
  const auto x = randn({2, 3, 6, 5}, 4);
  const auto wt = randn({4, 3, 3, 3}, 5);
  const TensorD b({4}, 0.0);
  const auto dy = randn({2, 4, 6, 5}, 6);
  TensorD dx, dw({4, 3, 3, 3}), db({4});
  conv2d_backward(x, wt, dy, {1, 1}, &dx, dw, db);
  const auto y = conv2d_forward(x, wt, b, {1, 1});
  double lhs = 0, rx = 0, rw = 0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += y[i] * dy[i];
  for (std::size_t i = 0; i < x.size(); ++i) rx += x[i] * dx[i];
  for (std::size_t i = 0; i < wt.size(); ++i) rw += wt[i] * dw[i];
  EXPECT_NEAR(lhs, rx, 1e-9 * std::abs(lhs) + 1e-9);
  EXPECT_NEAR(lhs, rw, 1e-9 * std::abs(lhs) + 1e-9);
  double sum_dy0 = 0;
  for (int n = 0; n < 2; ++n)
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 5; ++j) sum_dy0 += dy.at(n, 0, i, j);
  EXPECT_NEAR(db[0], sum_dy0, 1e-10);
}

TEST(Conv, KernelMustFit) {
  EXPECT_THROW(conv_out_size(2, 3, 1, 0), InvalidArgument);
  EXPECT_EQ(conv_out_size(7, 3, 2, 0), 3);
  EXPECT_EQ(conv_out_size(64, 3, 1, 1), 64);
}

TEST(MaxPool, OddExtentsAndArgmax) {
  TensorD x({1, 1, 3, 3}, std::vector<double>{1, 5, 2, 7, 3, 9, 4, 8, 6});
  std::vector<std::int64_t> am;
  const auto y = maxpool2x2_forward(x, am);
  ASSERT_EQ(y.shape(), (std::vector<int>{1, 1, 2, 2}));
  EXPECT_EQ(vec(y), (std::vector<double>{7, 9, 8, 6}));
  EXPECT_EQ(am, (std::vector<std::int64_t>{3, 5, 7, 8}));
  const auto dx = maxpool2x2_backward(TensorD({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4}), am, x.shape());
  EXPECT_EQ(vec(dx), (std::vector<double>{0, 0, 0, 1, 0, 2, 0, 3, 4}));
}

TEST(MaxPool, TieGoesToFirstRowMajor) {
  TensorD x({1, 1, 2, 2}, 3.0);
  std::vector<std::int64_t> am;
  (void)maxpool2x2_forward(x, am);
  EXPECT_EQ(am[0], 0);
}

TEST(Upsample, NearestAndAdjoint) {
  TensorD x({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  const auto y = upsample2x_forward(x);
  EXPECT_EQ(vec(y), (std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4}));
  const auto dx = upsample2x_backward(TensorD({1, 1, 4, 4}, 1.0));
  EXPECT_EQ(vec(dx), (std::vector<double>{4, 4, 4, 4}));
}

TEST(Relu, ForwardBackward) {
  TensorD x({1, 4, 1, 1}, std::vector<double>{-1, 0, 2, 3});
  const auto y = relu_forward(x);
  EXPECT_EQ(vec(y), (std::vector<double>{0, 0, 2, 3}));
  const auto dx = relu_backward(y, TensorD({1, 4, 1, 1}, 1.0));
  EXPECT_EQ(vec(dx), (std::vector<double>{0, 0, 1, 1}));
}

TEST(Linear, MatchesHandProduct) {
  TensorD x({2, 3, 1, 1}, std::vector<double>{1, 2, 3, -1, 0, 1});
  TensorD w({2, 3}, std::vector<double>{1, 0, -1, 2, 1, 0});
  TensorD b({2}, std::vector<double>{0.5, -0.5});
  const auto y = linear_forward(x, w, b);
  EXPECT_EQ(vec(y), (std::vector<double>{-1.5, 3.5, -1.5, -2.5}));
}

TEST(GlobalMaxPool, PerChannelMax) {
  TensorD x({1, 2, 2, 2}, std::vector<double>{1, 4, 2, 3, -5, -1, -2, -3});
  std::vector<std::int64_t> am;
  const auto y = global_maxpool_forward(x, am);
  EXPECT_EQ(vec(y), (std::vector<double>{4, -1}));
  const auto dx = global_maxpool_backward(TensorD({1, 2, 1, 1}, std::vector<double>{2, 3}), am, x.shape());
  EXPECT_EQ(vec(dx), (std::vector<double>{0, 2, 0, 0, 0, 3, 0, 0}));
}

TEST(Concat, SplitIsInverse) {
  const auto a = randn({2, 3, 2, 2}, 1), b = randn({2, 1, 2, 2}, 2);
  const auto c = concat_channels<double>({&a, &b});
  EXPECT_EQ(c.shape(), (std::vector<int>{2, 4, 2, 2}));
  EXPECT_EQ(c.at(1, 3, 1, 0), b.at(1, 0, 1, 0));
  const auto parts = split_channels(c, {3, 1});
  EXPECT_EQ(vec(parts[0]), vec(a));
  EXPECT_EQ(vec(parts[1]), vec(b));
  const auto bad = randn({2, 1, 3, 2}, 3);
  EXPECT_THROW(concat_channels<double>({&a, &bad}), InvalidArgument);
}

TEST(Dropout, DeterministicMaskKeepRateAndScale) {
  const TensorD x({1, 20000, 1, 1}, 1.0);
  std::vector<std::uint8_t> m1, m2, m3;
  const auto y1 = dropout_forward(x, 0.2, 11, 0, m1);
  (void)dropout_forward(x, 0.2, 11, 0, m2);
  (void)dropout_forward(x, 0.2, 12, 0, m3);
  EXPECT_EQ(m1, m2);
  EXPECT_NE(m1, m3);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < y1.size(); ++i) {
    if (m1[i]) {
      ++kept;
      EXPECT_DOUBLE_EQ(y1[i], 1.25);
    } else {
      EXPECT_EQ(y1[i], 0.0);
    }
  }
  EXPECT_NEAR(static_cast<double>(kept) / 20000.0, 0.8, 0.015);
}

TEST(Loss, CrossEntropyByHand) {
  // logits (0, ln 3): p = (1/4, 3/4); target 1 -> -ln(3/4).
  TensorD logits({1, 2}, std::vector<double>{0.0, std::log(3.0)});
  const std::vector<int> t{1};
  const auto r = softmax_cross_entropy(logits, t);
  EXPECT_NEAR(r.loss, -std::log(0.75), 1e-12);
  EXPECT_NEAR(r.grad[0], 0.25, 1e-12);
  EXPECT_NEAR(r.grad[1], -0.25, 1e-12);
}

TEST(Loss, CrossEntropyStableForHugeLogits) {
  TensorD logits({1, 3}, std::vector<double>{1000.0, 0.0, -1000.0});
  const std::vector<int> t{0};
  const auto r = softmax_cross_entropy(logits, t);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NEAR(r.loss, 0.0, 1e-12);
}

TEST(Loss, ClassBalanceWeightsByHand) {
  const std::vector<int> t{0, 0, 0, 1};
  const auto w = class_balance_weights(t, 3);
  // w_c = T / (C T_c): 4 / (3*3), 4 / (3*1), class 2 absent -> 0
  EXPECT_NEAR(w[0], 4.0 / 9.0, 1e-12);
  EXPECT_NEAR(w[1], 4.0 / 3.0, 1e-12);
  EXPECT_EQ(w[2], 0.0);
}

TEST(Loss, ClassBalancedEqualisesClasses) {
  // All-zero logits: per-cell loss ln 2 regardless of class, so the
  // normalised weighted mean is ln 2 too.
  TensorD logits({1, 2, 2, 2}, 0.0);
  const std::vector<int> t{0, 0, 0, 1};
  const auto r = class_balanced_cross_entropy(logits, t);
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-12);
  const auto p = softmax_channels(randn({2, 3, 2, 2}, 9));
  for (int n = 0; n < 2; ++n)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) EXPECT_NEAR(p.at(n, 0, i, j) + p.at(n, 1, i, j) + p.at(n, 2, i, j), 1.0, 1e-12);
}

TEST(Adam, OneStepByHand) {
  std::vector<Param<float>> params{{"w", TensorF({2}, std::vector<float>{1.0f, -2.0f}), TensorF({2}, std::vector<float>{0.5f, 0.1f})}};
  AdamState st;
  st.config.weight_decay = 0.01;
  adam_step(params, st, 0.1);
  // g' = g + wd w; m = 0.1 g'; v = 0.001 g'^2; mhat = g', vhat = g'^2.
  for (int i = 0; i < 2; ++i) {
    const double w0 = i == 0 ? 1.0 : -2.0, g = (i == 0 ? 0.5 : 0.1) + 0.01 * w0;
    const double expected = w0 - 0.1 * g / (std::abs(g) + 1e-8);
    EXPECT_NEAR(params[0].value[static_cast<std::size_t>(i)], expected, 1e-6);
  }
  EXPECT_EQ(st.step, 1u);
  EXPECT_EQ(st.m.size(), 1u);
}

TEST(Adam, ConvergesOnQuadratic) {
  std::vector<Param<double>> params{{"x", TensorD({1}, 5.0), TensorD({1}, 0.0)}};
  AdamState st;
  st.config.weight_decay = 0.0;
  for (int i = 0; i < 2000; ++i) {
    params[0].grad[0] = 2.0 * (params[0].value[0] - 1.5);
    adam_step(params, st, 0.05);
  }
  EXPECT_NEAR(params[0].value[0], 1.5, 1e-3);
}

TEST(Graph, ShapesAndNamedOutputs) {
  NetGraph<double> g;
  const int x = g.input("x", 3, 8, 8);
  const int c = g.conv2d("c", x, 4, 3, 1, 1);
  const int p = g.maxpool2("p", g.relu("r", c));
  const int u = g.upsample2("u", p);
  g.concat("cat", {u, c});
  EXPECT_EQ(g.shape("p"), (NodeShape{4, 4, 4}));
  EXPECT_EQ(g.shape("cat"), (NodeShape{8, 8, 8}));
  EXPECT_THROW(g.conv2d("c", x, 4, 3, 1, 1), InvalidArgument);       // duplicate name
  EXPECT_THROW(g.concat("bad", {x, p}), InvalidArgument);           // spatial mismatch
  EXPECT_THROW((void)g.node("missing"), InvalidArgument);
  g.init_weights(1);
  NetGraph<double>::TensorMap in{{"x", randn({2, 3, 8, 8}, 1)}};
  g.forward(in);
  const auto ev = g.evaluate(in, {"cat"});
  EXPECT_EQ(vec(ev.at("cat")), vec(g.output("cat")));
  EXPECT_THROW(g.forward({{"x", randn({2, 2, 8, 8}, 1)}}), InvalidArgument);
  EXPECT_THROW(g.forward({}), InvalidArgument);
}

TEST(Graph, HeInitStatistics) {
  NetGraph<double> g;
  g.linear("fc", g.input("x", 400, 1, 1), 300);
  g.init_weights(3);
  const auto& w = g.param("fc.weight").value;
  double s = 0, s2 = 0;
  for (double v : w.values()) s += v, s2 += v * v;
  const double n = static_cast<double>(w.size());
  EXPECT_NEAR(s / n, 0.0, 0.005);
  EXPECT_NEAR(std::sqrt(s2 / n), std::sqrt(2.0 / 400.0), 0.003);
  for (double v : g.param("fc.bias").value.values()) EXPECT_EQ(v, 0.0);
}

TEST(Graph, FloatAndDoubleAgree) {
  NetGraph<double> g;
  const int x = g.input("x", 2, 6, 6);
  g.global_maxpool("gp", g.relu("r", g.conv2d("c", x, 3, 3, 1, 1)));
  g.init_weights(5);
  const auto gf = g.cast<float>();
  const auto in = randn({1, 2, 6, 6}, 2);
  const auto yd = g.evaluate({{"x", in}}, {"gp"}).at("gp");
  const auto yf = gf.evaluate({{"x", in.cast<float>()}}, {"gp"}).at("gp");
  for (std::size_t i = 0; i < yd.size(); ++i) EXPECT_NEAR(yf[i], yd[i], 1e-5);
}

TEST(Graph, DropoutOnlyInTrainMode) {
  NetGraph<double> g;
  g.dropout("d", g.input("x", 50, 1, 1), 0.5);
  const NetGraph<double>::TensorMap in{{"x", TensorD({1, 50, 1, 1}, 1.0)}};
  g.forward(in, Mode::kEval);
  for (double v : g.output("d").values()) EXPECT_EQ(v, 1.0);
  g.forward(in, Mode::kTrain, 3);
  std::size_t zeros = 0;
  for (double v : g.output("d").values()) zeros += v == 0.0;
  EXPECT_GT(zeros, 0u);
}
