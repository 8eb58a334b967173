#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "capnet/adam.hpp"
#include "capnet/lstm.hpp"
#include "capnet/ops.hpp"
#include "gradcheck.hpp"

namespace capnet::num {
namespace {

using capnet::testing::check_gradients;
using capnet::testing::GradInput;
using capnet::testing::random_values;

constexpr double kGradTol = 1e-3;
constexpr int kSeeds = 20;

// Values bounded away from zero so kinks (abs, elu) stay outside the stencil.
std::vector<float> away_from_zero(std::size_t n, std::mt19937_64& rng) {
  auto v = random_values(n, rng, 0.1f, 1.5f);
  std::bernoulli_distribution flip(0.5);
  for (float& x : v)
    if (flip(rng)) x = -x;
  return v;
}

TEST(Conv2d, EncoderSpatialChain) {
  Tape t;
  Var x = t.constant({64, 64, 1}, std::vector<float>(64 * 64, 0.5f));
  Var k1 = t.constant({9, 9, 1, 64}, std::vector<float>(9 * 9 * 64, 0.01f));
  Var z = conv2d(x, k1, 2);
  EXPECT_EQ(z.shape(), (Shape{28, 28, 64}));
  Var k2 = t.constant({9, 9, 64, 32}, std::vector<float>(9 * 9 * 64 * 32, 0.01f));
  Var y = conv2d(z, k2, 2);
  EXPECT_EQ(y.shape(), (Shape{10, 10, 32}));
  Var k3 = t.constant({2, 2, 32, 16}, std::vector<float>(2 * 2 * 32 * 16, 0.01f));
  EXPECT_EQ(conv2d(y, k3, 2).shape(), (Shape{5, 5, 16}));
}

TEST(Conv2d, IdentityKernelReturnsInput) {
  std::mt19937_64 rng(3);
  Tape t;
  auto vals = random_values(6 * 5 * 3, rng);
  Var x = t.constant({6, 5, 3}, vals);
  std::vector<float> eye(3 * 3, 0.0f);
  for (int c = 0; c < 3; ++c) eye[c * 3 + c] = 1.0f;
  Var y = conv2d(x, t.constant({1, 1, 3, 3}, eye), 1);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < vals.size(); ++i) EXPECT_EQ(y.value()[i], vals[i]);
}

TEST(Conv2d, MatchesDirectSum) {
  std::mt19937_64 rng(11);
  Tape t;
  auto in = random_values(7 * 8 * 2, rng);
  auto ker = random_values(3 * 3 * 2 * 4, rng);
  Var y = conv2d(t.constant({7, 8, 2}, in), t.constant({3, 3, 2, 4}, ker), 2);
  ASSERT_EQ(y.shape(), (Shape{3, 3, 4}));
  for (std::size_t oy = 0; oy < 3; ++oy)
    for (std::size_t ox = 0; ox < 3; ++ox)
      for (std::size_t o = 0; o < 4; ++o) {
        double acc = 0.0;
        for (std::size_t ky = 0; ky < 3; ++ky)
          for (std::size_t kx = 0; kx < 3; ++kx)
            for (std::size_t c = 0; c < 2; ++c)
              acc += in[((oy * 2 + ky) * 8 + ox * 2 + kx) * 2 + c] * ker[((ky * 3 + kx) * 2 + c) * 4 + o];
        EXPECT_NEAR(y.value()[(oy * 3 + ox) * 4 + o], acc, 1e-5);
      }
}

TEST(Conv2d, RejectsChannelMismatch) {
  Tape t;
  Var x = t.constant({8, 8, 3}, std::vector<float>(8 * 8 * 3));
  Var k = t.constant({3, 3, 2, 4}, std::vector<float>(3 * 3 * 2 * 4));
  EXPECT_THROW(conv2d(x, k, 1), ShapeError);
  Var small = t.constant({2, 2, 2}, std::vector<float>(8));
  EXPECT_THROW(conv2d(small, k, 1), ShapeError);
}

TEST(Elu, ClosedFormValues) {
  Tape t;
  Var y = elu(t.constant({3}, {0.0f, 1.0f, -1.0f}));
  EXPECT_EQ(y.value()[0], 0.0f);
  EXPECT_EQ(y.value()[1], 1.0f);
  EXPECT_NEAR(y.value()[2], std::exp(-1.0) - 1.0, 1e-7);
  EXPECT_NEAR(y.value()[2], -0.63212, 1e-5);
}

TEST(Squash, ReferenceCases) {
  Tape t;
  Var zero = squash(t.constant({1, 3}, {0.0f, 0.0f, 0.0f}));
  for (float v : zero.value()) EXPECT_EQ(v, 0.0f);

  Var unit = squash(t.constant({2}, {0.6f, 0.8f}));
  EXPECT_NEAR(unit.value()[0], 0.3, 1e-6);
  EXPECT_NEAR(unit.value()[1], 0.4, 1e-6);

  Var three = squash(t.constant({3}, {3.0f, 0.0f, 0.0f}));
  EXPECT_NEAR(three.value()[0], 0.9, 1e-6);
}

TEST(Squash, NormBelowOneMonotoneAndDirectionPreserving) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> mag(0.0, 50.0);
  for (int trial = 0; trial < 200; ++trial) {
    auto dir = random_values(8, rng);
    double dn = 0.0;
    for (float d : dir) dn += d * d;
    dn = std::sqrt(dn);
    const double a = mag(rng), b = a + mag(rng) * 0.1;
    std::vector<float> va(8), vb(8);
    for (int i = 0; i < 8; ++i) {
      va[i] = static_cast<float>(dir[i] / dn * a);
      vb[i] = static_cast<float>(dir[i] / dn * b);
    }
    Tape t;
    auto sa = squash(t.constant({8}, va)).value();
    auto sb = squash(t.constant({8}, vb)).value();
    double na = 0, nb = 0, dot = 0, nva = 0;
    for (int i = 0; i < 8; ++i) {
      na += sa[i] * sa[i];
      nb += sb[i] * sb[i];
      dot += static_cast<double>(sa[i]) * va[i];
      nva += static_cast<double>(va[i]) * va[i];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    EXPECT_LT(na, 1.0);
    EXPECT_LT(nb, 1.0);
    EXPECT_LE(na, nb + 1e-7);
    if (a > 1e-3) {
      EXPECT_NEAR(dot / (na * std::sqrt(nva)), 1.0, 1e-6);
    }
  }
}

TEST(Softmax, ReferenceCases) {
  Tape t;
  auto even = softmax(t.constant({2}, {0.0f, 0.0f}), 0).value();
  EXPECT_FLOAT_EQ(even[0], 0.5f);
  EXPECT_FLOAT_EQ(even[1], 0.5f);
  auto big = softmax(t.constant({2}, {1000.0f, 0.0f}), 0).value();
  EXPECT_TRUE(std::isfinite(big[0]) && std::isfinite(big[1]));
  EXPECT_NEAR(big[0], 1.0, 1e-12);
  EXPECT_NEAR(big[1], 0.0, 1e-12);
  EXPECT_EQ(softmax(t.constant({1}, {-4.0f}), 0).value()[0], 1.0f);
}

TEST(Softmax, SumsToOneAlongAxis) {
  std::mt19937_64 rng(5);
  Tape t;
  Var y = softmax(t.constant({3, 4, 2}, random_values(24, rng, -5, 5)), 1);
  for (int o = 0; o < 3; ++o)
    for (int k = 0; k < 2; ++k) {
      double s = 0;
      for (int j = 0; j < 4; ++j) {
        const float v = y.value()[(o * 4 + j) * 2 + k];
        EXPECT_GT(v, 0.0f);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
}

TEST(Affine, ReferenceCases) {
  Tape t;
  Var y = affine(t.constant({2}, {1, 2}), t.constant({2, 2}, {1, 0, 0, 1}), t.constant({2}, {3, 3}));
  EXPECT_EQ(y.value()[0], 4.0f);
  EXPECT_EQ(y.value()[1], 5.0f);

  std::mt19937_64 rng(1);
  Var wide = affine(t.constant({5}, random_values(5, rng)), t.constant({5, 128}, random_values(640, rng)),
                    t.constant({128}, random_values(128, rng)));
  EXPECT_EQ(wide.shape(), Shape{128});
  EXPECT_THROW(affine(t.constant({3}, {1, 2, 3}), t.constant({2, 2}, {1, 0, 0, 1}), t.constant({2}, {0, 0})),
               ShapeError);
}

TEST(Lstm, ZeroWeightsGiveZeroState) {
  LstmParams p(256, 128);
  Tape t;
  auto w = bind(t, p);
  std::mt19937_64 rng(2);
  auto s = lstm_cell(t.constant({256}, random_values(256, rng)), t.constant({128}, std::vector<float>(128)),
                     t.constant({128}, std::vector<float>(128)), w);
  EXPECT_EQ(s.h.shape(), Shape{128});
  EXPECT_EQ(s.c.shape(), Shape{128});
  for (float v : s.h.value()) EXPECT_EQ(v, 0.0f);
  for (float v : s.c.value()) EXPECT_EQ(v, 0.0f);
}

TEST(Lstm, ChainedStepsMatchIndependentRecomputation) {
  std::mt19937_64 rng(9);
  LstmParams p(6, 4);
  p.w_input.value = random_values(p.w_input.size(), rng);
  p.w_hidden.value = random_values(p.w_hidden.size(), rng);
  p.bias.value = random_values(p.bias.size(), rng);
  std::vector<std::vector<float>> xs;
  for (int i = 0; i < 5; ++i) xs.push_back(random_values(6, rng));

  Tape chained;
  auto w = bind(chained, p);
  LstmState s{chained.constant({4}, std::vector<float>(4)), chained.constant({4}, std::vector<float>(4))};
  for (const auto& x : xs) s = lstm_cell(chained.constant({6}, x), s.h, s.c, w);

  std::vector<float> h(4, 0.0f), c(4, 0.0f);
  for (const auto& x : xs) {
    Tape step;
    auto ws = bind(step, p);
    auto out = lstm_cell(step.constant({6}, x), step.constant({4}, h), step.constant({4}, c), ws);
    h.assign(out.h.value().begin(), out.h.value().end());
    c.assign(out.c.value().begin(), out.c.value().end());
  }
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(s.h.value()[i], h[i]);
    EXPECT_EQ(s.c.value()[i], c[i]);
  }
}

TEST(Backward, ReferenceGradients) {
  Tape t;
  Var x = t.variable({3}, {1.0f, -2.0f, 0.5f});
  t.backward(sum(x));
  for (float g : x.grad()) EXPECT_EQ(g, 1.0f);

  Tape t2;
  Var y = t2.variable({3}, {1.0f, -2.0f, 0.5f});
  t2.backward(sum(square(y)));
  EXPECT_EQ(y.grad()[0], 2.0f);
  EXPECT_EQ(y.grad()[1], -4.0f);
  EXPECT_EQ(y.grad()[2], 1.0f);
}

TEST(Backward, RejectsNonScalar) {
  Tape t;
  Var x = t.variable({2}, {1.0f, 2.0f});
  EXPECT_THROW(t.backward(square(x)), ShapeError);
}

TEST(Backward, ParameterGradientsAccumulate) {
  Parameter p("w", {2});
  p.value = {1.0f, 3.0f};
  for (int i = 0; i < 2; ++i) {
    Tape t;
    t.backward(sum(square(t.param(p))));
  }
  EXPECT_EQ(p.grad[0], 4.0f);
  EXPECT_EQ(p.grad[1], 12.0f);
}

TEST(Backward, DeterministicBitwise) {
  std::mt19937_64 rng(21);
  auto in = random_values(12 * 12 * 2, rng);
  Parameter k("k", {3, 3, 2, 5});
  k.value = random_values(k.size(), rng);
  auto run = [&] {
    k.zero_grad();
    Tape t;
    Var y = squash(reshape(elu(conv2d(t.variable({12, 12, 2}, in), t.param(k), 2)), {25, 5}));
    t.backward(mean(square(y)));
    return k.grad;
  };
  EXPECT_EQ(run(), run());
}

// --- finite-difference oracle -------------------------------------------

struct OpCase {
  const char* name;
  std::function<std::vector<GradInput>(std::mt19937_64&)> inputs;
  capnet::testing::GraphFn graph;
};

std::vector<OpCase> op_cases() {
  return {
      {"add", [](auto& r) { return std::vector<GradInput>{{{6}, random_values(6, r)}, {{6}, random_values(6, r)}}; },
       [](Tape&, const std::vector<Var>& v) { return add(v[0], v[1]); }},
      {"sub", [](auto& r) { return std::vector<GradInput>{{{6}, random_values(6, r)}, {{6}, random_values(6, r)}}; },
       [](Tape&, const std::vector<Var>& v) { return sub(v[0], v[1]); }},
      {"mul", [](auto& r) { return std::vector<GradInput>{{{6}, random_values(6, r)}, {{6}, random_values(6, r)}}; },
       [](Tape&, const std::vector<Var>& v) { return mul(v[0], v[1]); }},
      {"abs", [](auto& r) { return std::vector<GradInput>{{{8}, away_from_zero(8, r)}}; },
       [](Tape&, const std::vector<Var>& v) { return abs(v[0]); }},
      {"square", [](auto& r) { return std::vector<GradInput>{{{8}, random_values(8, r)}}; },
       [](Tape&, const std::vector<Var>& v) { return square(v[0]); }},
      {"mean", [](auto& r) { return std::vector<GradInput>{{{8}, random_values(8, r)}}; },
       [](Tape&, const std::vector<Var>& v) { return mean(v[0]); }},
      {"elu", [](auto& r) { return std::vector<GradInput>{{{10}, away_from_zero(10, r)}}; },
       [](Tape&, const std::vector<Var>& v) { return elu(v[0]); }},
      {"sigmoid", [](auto& r) { return std::vector<GradInput>{{{8}, random_values(8, r, -3, 3)}}; },
       [](Tape&, const std::vector<Var>& v) { return sigmoid(v[0]); }},
      {"tanh", [](auto& r) { return std::vector<GradInput>{{{8}, random_values(8, r, -2, 2)}}; },
       [](Tape&, const std::vector<Var>& v) { return tanh(v[0]); }},
      {"squash", [](auto& r) { return std::vector<GradInput>{{{5, 4}, random_values(20, r, -2, 2)}}; },
       [](Tape&, const std::vector<Var>& v) { return squash(v[0]); }},
      {"softmax", [](auto& r) { return std::vector<GradInput>{{{3, 4}, random_values(12, r, -2, 2)}}; },
       [](Tape&, const std::vector<Var>& v) { return softmax(v[0], 1); }},
      {"affine",
       [](auto& r) {
         return std::vector<GradInput>{{{5}, random_values(5, r)}, {{5, 7}, random_values(35, r)}, {{7}, random_values(7, r)}};
       },
       [](Tape&, const std::vector<Var>& v) { return affine(v[0], v[1], v[2]); }},
      {"conv2d",
       [](auto& r) {
         return std::vector<GradInput>{{{9, 8, 3}, random_values(216, r)}, {{3, 3, 3, 4}, random_values(108, r)}};
       },
       [](Tape&, const std::vector<Var>& v) { return conv2d(v[0], v[1], 2); }},
      {"bias_add",
       [](auto& r) { return std::vector<GradInput>{{{3, 3, 4}, random_values(36, r)}, {{4}, random_values(4, r)}}; },
       [](Tape&, const std::vector<Var>& v) { return bias_add(v[0], v[1]); }},
      {"concat_slice",
       [](auto& r) { return std::vector<GradInput>{{{2, 3}, random_values(6, r)}, {{2, 2}, random_values(4, r)}}; },
       [](Tape&, const std::vector<Var>& v) { return slice(concat({v[0], v[1]}, 1), 1, 1, 3); }},
      {"capsule_stack",
       [](auto& r) { return std::vector<GradInput>{{{2, 2, 3}, random_values(12, r)}, {{2, 2, 3}, random_values(12, r)}}; },
       [](Tape&, const std::vector<Var>& v) { return capsule_stack({v[0], v[1]}); }},
      {"capsule_predict",
       [](auto& r) { return std::vector<GradInput>{{{6, 4}, random_values(24, r)}, {{6, 4, 5}, random_values(120, r)}}; },
       [](Tape&, const std::vector<Var>& v) { return capsule_predict(v[0], v[1]); }},
      {"routing_sum",
       [](auto& r) { return std::vector<GradInput>{{{5, 2, 3}, random_values(30, r)}}; },
       [](Tape&, const std::vector<Var>& v) {
         return routing_sum(v[0], {0.2f, 0.8f, 0.5f, 0.5f, 0.9f, 0.1f, 0.3f, 0.7f, 0.6f, 0.4f});
       }},
      {"lstm_cell",
       [](auto& r) {
         return std::vector<GradInput>{{{6}, random_values(6, r)},       {{4}, random_values(4, r)},
                                       {{4}, random_values(4, r)},       {{6, 16}, random_values(96, r)},
                                       {{4, 16}, random_values(64, r)}, {{16}, random_values(16, r)}};
       },
       [](Tape&, const std::vector<Var>& v) {
         auto s = lstm_cell(v[0], v[1], v[2], LstmWeights{v[3], v[4], v[5]});
         return concat({s.h, s.c}, 0);
       }},
  };
}

TEST(GradientOracle, EveryOpMatchesCentralDifferences) {
  for (const auto& op : op_cases()) {
    for (int seed = 0; seed < kSeeds; ++seed) {
      std::mt19937_64 rng(1000 + seed);
      auto res = check_gradients(op.graph, op.inputs(rng), seed);
      EXPECT_LT(res.relative_error, kGradTol) << op.name << " seed " << seed;
      EXPECT_LT(res.directional_error, kGradTol) << op.name << " seed " << seed;
    }
  }
}

// --- Adam -----------------------------------------------------------------

TEST(Adam, ZeroGradientLeavesParameter) {
  Parameter p("p", {3});
  p.value = {1.0f, -2.0f, 3.0f};
  AdamState s;
  std::vector<Parameter*> ps{&p};
  adam_step(ps, s, 1e-3);
  EXPECT_EQ(s.step_count, 1u);
  EXPECT_EQ(p.value, (std::vector<float>{1.0f, -2.0f, 3.0f}));
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradient) {
  Parameter p("p", {3});
  p.value = {0.0f, 0.0f, 0.0f};
  p.grad = {4.0f, -0.01f, 250.0f};
  AdamState s;
  std::vector<Parameter*> ps{&p};
  adam_step(ps, s, 0.01);
  EXPECT_NEAR(p.value[0], -0.01, 1e-6);
  EXPECT_NEAR(p.value[1], 0.01, 1e-5);
  EXPECT_NEAR(p.value[2], -0.01, 1e-6);
}

TEST(Adam, MinimizesParabolaLikeScalarReference) {
  // Scalar textbook recurrences in double, independent of adam_step.
  double ref = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 100; ++t) {
    const double g = 2.0 * ref;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    ref -= 0.1 * (m / (1.0 - std::pow(0.9, t))) / (std::sqrt(v / (1.0 - std::pow(0.999, t))) + 1e-8);
  }
  Parameter p("x", {1});
  p.value = {1.0f};
  AdamState s;
  std::vector<Parameter*> ps{&p};
  for (int t = 0; t < 100; ++t) {
    p.grad[0] = 2.0f * p.value[0];
    adam_step(ps, s, 0.1);
  }
  EXPECT_LT(std::fabs(p.value[0]), 0.1f);
  EXPECT_NEAR(p.value[0], ref, 1e-4);
  EXPECT_EQ(s.step_count, 100u);
}

}  // namespace
}  // namespace capnet::num
