#include <gtest/gtest.h>

#include <cmath>

#include "bdtrack/errors.hpp"
#include "bdtrack/grad_check.hpp"
#include "bdtrack/ops.hpp"
#include "test_util.hpp"

using namespace bdtrack;
using bdtrack::testing::expect_values;
using bdtrack::testing::random_tensor;

TEST(Backward, SumGivesOnes) {
  Tensor w = Tensor::from({3}, {0.3, -1.0, 2.0}, true);
  sum(w).backward();
  EXPECT_EQ(w.grad(), (std::vector<double>{1, 1, 1}));
}

TEST(Backward, SumOfSquares) {
  Tensor w = Tensor::from({3}, {1, 2, 3}, true);
  sum(square(w)).backward();
  EXPECT_EQ(w.grad(), (std::vector<double>{2, 4, 6}));
}

TEST(Backward, NonScalarThrows) {
  Tensor w = Tensor::from({2}, {1, 2}, true);
  EXPECT_THROW(square(w).backward(), DimensionError);
}

TEST(Backward, LeafGradsAccumulateUntilZeroed) {
  Tensor w = Tensor::from({2}, {1, 2}, true);
  Tensor loss = sum(mul(w, w));
  loss.backward();
  loss.backward();
  EXPECT_EQ(w.grad(), (std::vector<double>{4, 8}));
  w.zero_grad();
  EXPECT_EQ(w.grad(), (std::vector<double>{0, 0}));
}

TEST(Backward, GradientOfSumIsSumOfGradients) {
  std::mt19937_64 rng(3);
  Tensor w = random_tensor({4, 3}, rng);
  w.set_requires_grad(true);
  auto la = [&] { return sum(square(w)); };
  auto lb = [&] { return sum(sigmoid(scale(w, 1.7))); };
  add(la(), lb()).backward();
  const auto joint = w.grad();
  w.zero_grad();
  la().backward();
  lb().backward();
  const auto separate = w.grad();
  for (std::size_t i = 0; i < joint.size(); ++i) EXPECT_NEAR(joint[i], separate[i], 1e-14);
}

TEST(Backward, RandomMlpMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::vector<Tensor> weights;
  for (int i = 0; i < 4; ++i) weights.push_back(random_tensor({5, 5}, rng, -0.6, 0.6));
  const Tensor x = random_tensor({3, 5}, rng);
  for (int target = 0; target < 4; ++target) {
    auto f = [&](const Tensor& w) {
      Tensor h = x;
      for (int i = 0; i < 4; ++i) {
        h = matmul(h, i == target ? w : weights[i]);
        if (i < 3) h = gelu(h);
      }
      return sum(square(h));
    };
    auto r = grad_check(f, weights[target]);
    EXPECT_TRUE(r.passed) << "layer " << target << " rel " << r.max_rel_error;
  }
}

TEST(NoGrad, RecordsNothing) {
  Tensor w = Tensor::from({2}, {1, 2}, true);
  NoGradGuard guard;
  Tensor y = sum(square(w));
  EXPECT_FALSE(y.requires_grad());
  EXPECT_FALSE(grad_enabled());
}

TEST(NoGrad, RestoresOnExit) {
  {
    NoGradGuard guard;
  }
  EXPECT_TRUE(grad_enabled());
}

TEST(Matmul, IdentityAndProjector) {
  const Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  const Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  expect_values(matmul(eye, a), {1, 2, 3, 4});
  const Tensor p = Tensor::from({2, 2}, {1, 0, 0, 0});
  expect_values(matmul(p, Tensor::from({2, 2}, {5, 6, 7, 8})), {5, 6, 0, 0});
}

TEST(Matmul, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
  EXPECT_THROW(matmul(Tensor::zeros({6}), Tensor::zeros({6, 1})), DimensionError);
}

TEST(Matmul, MatchesTripleLoop) {
  std::mt19937_64 rng(5);
  const Tensor a = random_tensor({7, 5}, rng), b = random_tensor({5, 9}, rng);
  const Tensor c = matmul(a, b);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < 9; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 5; ++k) s += a.at({i, k}) * b.at({k, j});
      EXPECT_NEAR(c.at({i, j}), s, 1e-13);
    }
  }
}

TEST(Matmul, GradientOfSumIsRowSumsOfB) {
  std::mt19937_64 rng(6);
  const Tensor b = random_tensor({3, 4}, rng);
  auto r = grad_check([&](const Tensor& a) { return sum(matmul(a, b)); }, random_tensor({2, 3}, rng),
                      {.tolerance = 1e-6});
  EXPECT_TRUE(r.passed) << r.max_rel_error;
  Tensor a = random_tensor({2, 3}, rng);
  a.set_requires_grad(true);
  sum(matmul(a, b)).backward();
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      double row = 0;
      for (std::size_t j = 0; j < 4; ++j) row += b.at({k, j});
      EXPECT_NEAR(a.grad()[i * 3 + k], row, 1e-14);
    }
  }
}

TEST(Matmul, CountsMultiplyAccumulates) {
  MacCounter::reset();
  matmul(Tensor::zeros({3, 4}), Tensor::zeros({4, 5}));
  EXPECT_EQ(MacCounter::value(), 60u);
}

TEST(Elementwise, Broadcasting) {
  const Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  expect_values(add(a, Tensor::from({3}, {10, 20, 30})), {11, 22, 33, 14, 25, 36});
  expect_values(mul(a, Tensor::scalar(2)), {2, 4, 6, 8, 10, 12});
  EXPECT_THROW(add(a, Tensor::zeros({2})), DimensionError);
}

TEST(Elementwise, BroadcastGradientReduces) {
  Tensor b = Tensor::from({3}, {1, 1, 1}, true);
  sum(add(Tensor::zeros({4, 3}), b)).backward();
  EXPECT_EQ(b.grad(), (std::vector<double>{4, 4, 4}));
}

TEST(Elementwise, SigmoidIdentities) {
  EXPECT_DOUBLE_EQ(sigmoid(Tensor::scalar(0)).item(), 0.5);
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor({50}, rng, -8, 8);
  const Tensor s = add(sigmoid(x), sigmoid(neg(x)));
  for (double v : s.data()) EXPECT_NEAR(v, 1.0, 1e-15);
}

TEST(Elementwise, SigmoidDerivativeAtTwo) {
  Tensor x = Tensor::scalar(2.0, true);
  sigmoid(x).backward();
  EXPECT_NEAR(x.grad()[0], 0.104994, 1e-6);
  auto r = grad_check([](const Tensor& t) { return sigmoid(t); }, Tensor::scalar(2.0));
  EXPECT_TRUE(r.passed);
}

TEST(Elementwise, SqrtNegativeIsNumericError) {
  EXPECT_THROW(sqrt(Tensor::scalar(-1)), NumericError);
  EXPECT_THROW(log(Tensor::scalar(0)), NumericError);
}

TEST(Softmax, UniformAndNormalized) {
  expect_values(softmax(Tensor::zeros({3}), 0), {1.0 / 3, 1.0 / 3, 1.0 / 3}, 1e-15);
  std::mt19937_64 rng(4);
  const Tensor p = softmax(random_tensor({6, 7}, rng, -30, 30), 1);
  for (std::size_t i = 0; i < 6; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 7; ++j) {
      EXPECT_GE(p.at({i, j}), 0.0);
      s += p.at({i, j});
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
  EXPECT_THROW(softmax(Tensor::zeros({2, 2}), 2), DimensionError);
}

TEST(LayerNorm, ConstantRowGivesBias) {
  const Tensor gain = Tensor::from({4}, {1, 2, 3, 4});
  const Tensor bias = Tensor::from({4}, {0.5, -1, 2, 0});
  expect_values(layernorm(Tensor::full({1, 4}, 3.0), gain, bias), {0.5, -1, 2, 0}, 1e-12);
}

TEST(LayerNorm, ZeroMeanUnitVariance) {
  std::mt19937_64 rng(8);
  const Tensor y = layernorm(random_tensor({5, 16}, rng, -3, 3), Tensor(), Tensor(), 1e-9);
  for (std::size_t i = 0; i < 5; ++i) {
    double m = 0, v = 0;
    for (std::size_t j = 0; j < 16; ++j) m += y.at({i, j}) / 16;
    for (std::size_t j = 0; j < 16; ++j) v += (y.at({i, j}) - m) * (y.at({i, j}) - m) / 16;
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v, 1.0, 1e-6);
  }
}

TEST(Conv2d, ScalarKernelDoubles) {
  const Tensor img = Tensor::from({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  expect_values(conv2d(img, Tensor::from({1, 1, 1, 1}, {2}), Tensor()), {2, 4, 6, 8, 10, 12, 14, 16, 18});
}

TEST(Conv2d, MatchesDirectLoops) {
  std::mt19937_64 rng(9);
  for (auto [stride, pad] : {std::pair<std::size_t, std::size_t>{1, 1}, {2, 0}, {1, 0}, {2, 2}}) {
    const Tensor x = random_tensor({3, 7, 6}, rng), k = random_tensor({4, 3, 3, 3}, rng),
                 b = random_tensor({4}, rng);
    const Tensor y = conv2d(x, k, b, {stride, pad});
    const std::size_t oh = (7 + 2 * pad - 3) / stride + 1, ow = (6 + 2 * pad - 3) / stride + 1;
    ASSERT_EQ(y.shape(), (Shape{4, oh, ow}));
    for (std::size_t o = 0; o < 4; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double s = b.data()[o];
          for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t u = 0; u < 3; ++u)
              for (std::size_t v = 0; v < 3; ++v) {
                const long yy = static_cast<long>(i * stride + u) - static_cast<long>(pad);
                const long xx = static_cast<long>(j * stride + v) - static_cast<long>(pad);
                if (yy < 0 || xx < 0 || yy >= 7 || xx >= 6) continue;
                s += x.at({c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)}) * k.at({o, c, u, v});
              }
          EXPECT_NEAR(y.at({o, i, j}), s, 1e-12);
        }
  }
}

TEST(ShapeOps, SliceConcatRoundTrip) {
  std::mt19937_64 rng(10);
  const Tensor t = random_tensor({5, 3}, rng);
  const Tensor r = concat({slice(t, 0, 0, 2), slice(t, 0, 2, 5)}, 0);
  EXPECT_EQ(std::vector<double>(r.data().begin(), r.data().end()),
            std::vector<double>(t.data().begin(), t.data().end()));
  const Tensor c = concat({slice(t, 1, 0, 1), slice(t, 1, 1, 3)}, 1);
  EXPECT_EQ(std::vector<double>(c.data().begin(), c.data().end()),
            std::vector<double>(t.data().begin(), t.data().end()));
  EXPECT_THROW(slice(t, 0, 3, 6), DimensionError);
}

TEST(ShapeOps, TransposeAndReshape) {
  const Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  expect_values(transpose(t), {1, 4, 2, 5, 3, 6});
  EXPECT_EQ(reshape(t, {3, 2}).shape(), (Shape{3, 2}));
  EXPECT_THROW(reshape(t, {4, 2}), DimensionError);
}

TEST(GradCheck, SumOfSquaresPasses) {
  std::mt19937_64 rng(12);
  auto r = grad_check([](const Tensor& x) { return sum(square(x)); }, random_tensor({10}, rng));
  EXPECT_TRUE(r.passed);
}

TEST(GradCheck, ConstantHasZeroError) {
  auto r = grad_check([](const Tensor&) { return Tensor::scalar(4.0); }, Tensor::from({3}, {1, 2, 3}));
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.max_rel_error, 0.0);
}

TEST(GradCheck, WrongBackwardFails) {
  auto broken_square = [](const Tensor& x) {
    Buffer v(x.data().begin(), x.data().end());
    for (auto& e : v) e *= e;
    // Deliberately returns g * x instead of 2 g x.
    return Tensor::make_result(x.shape(), v, {x}, [x](detail::Node& n) {
      auto& p = *x.node();
      p.ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] * p.data[i];
    });
  };
  auto r = grad_check([&](const Tensor& x) { return sum(broken_square(x)); }, Tensor::from({3}, {1, 2, 3}));
  EXPECT_FALSE(r.passed);
}

TEST(GradCheck, NonFiniteThrows) {
  EXPECT_THROW(grad_check([](const Tensor& x) { return sum(div(Tensor::scalar(1.0), sub(x, x))); },
                          Tensor::from({2}, {1, 2})),
               NumericError);
}
