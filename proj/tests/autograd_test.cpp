#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "ssg/autograd.hpp"
#include "ssg/gradcheck.hpp"

namespace ssg {
namespace {

Tensor random_tensor(std::mt19937_64& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Tape tape;
  auto a = tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  auto eye = tape.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  EXPECT_EQ(matmul(a, eye).value().data(), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Matmul, AnnihilatingProductIsZero) {
  Tape tape;
  auto a = tape.constant(Tensor::matrix(2, 2, {1, 0, 0, 0}));
  auto b = tape.constant(Tensor::matrix(2, 2, {0, 0, 0, 1}));
  EXPECT_EQ(matmul(a, b).value().data(), (std::vector<double>(4, 0.0)));
}

TEST(Matmul, MatchesTripleLoopOracle) {
  std::mt19937_64 rng(11);
  const auto A = random_tensor(rng, {3, 4});
  const auto B = random_tensor(rng, {4, 2});
  std::vector<double> oracle(6, 0.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 4; ++k) oracle[i * 2 + j] += A[i * 4 + k] * B[k * 2 + j];
  Tape tape;
  const auto C = matmul(tape.constant(A), tape.constant(B)).value();
  ASSERT_EQ(C.shape(), (Shape{3, 2}));
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(C[i], oracle[i], 1e-12);
}

TEST(Matmul, DimensionMismatchNamesBothShapes) {
  Tape tape;
  auto a = tape.constant(Tensor({2, 3}));
  auto b = tape.constant(Tensor({2, 3}));
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3] x [2x3]"), std::string::npos) << e.what();
  }
}

TEST(Elementwise, Definitions) {
  Tape tape;
  EXPECT_EQ(sigmoid(tape.constant(Tensor::scalar(0.0))).value().item(), 0.5);
  EXPECT_EQ(relu(tape.constant(Tensor::scalar(-3.0))).value().item(), 0.0);
  EXPECT_EQ(relu(tape.constant(Tensor::scalar(3.0))).value().item(), 3.0);
  auto c = concat({tape.constant(Tensor({2}, {1, 2})), tape.constant(Tensor({1}, {3}))}, 0);
  EXPECT_EQ(c.value().data(), (std::vector<double>{1, 2, 3}));
}

TEST(Elementwise, ShapeMismatchThrows) {
  Tape tape;
  auto a = tape.constant(Tensor({2, 2}));
  auto b = tape.constant(Tensor({2, 3}));
  EXPECT_THROW(add(a, b), ShapeError);
  EXPECT_THROW(mul(a, b), ShapeError);
  EXPECT_THROW(concat({a, tape.constant(Tensor({3, 3}))}, 1), ShapeError);
}

TEST(Softmax, Examples) {
  Tape tape;
  EXPECT_EQ(softmax(tape.constant(Tensor({2}, {0, 0})), 0).value().data(), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(softmax(tape.constant(Tensor({1}, {42.0})), 0).value().item(), 1.0);
  const auto big = softmax(tape.constant(Tensor({2}, {1000, 1000})), 0).value();
  EXPECT_EQ(big.data(), (std::vector<double>{0.5, 0.5}));
}

TEST(Softmax, NormalizesAlongEitherAxis) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tape tape;
    auto x = tape.constant(random_tensor(rng, {4, 5}, -20, 20));
    for (std::size_t axis : {0u, 1u}) {
      const auto y = softmax(x, axis).value();
      const std::size_t groups = axis == 1 ? 4 : 5, len = axis == 1 ? 5 : 4;
      for (std::size_t g = 0; g < groups; ++g) {
        double s = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
          const double v = axis == 1 ? y.at(g, k) : y.at(k, g);
          EXPECT_GE(v, 0.0);
          s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-9);
      }
    }
  }
}

TEST(Conv1dMaxpool, ConstantInputGivesSingleResponse) {
  std::mt19937_64 rng(5);
  Tape tape;
  Tensor seq({6, 2});
  for (std::size_t t = 0; t < 6; ++t) {
    seq.at(t, 0) = 0.7;
    seq.at(t, 1) = -0.3;
  }
  const auto kernel = random_tensor(rng, {4, 3});
  const auto bias = random_tensor(rng, {1, 3});
  std::vector<Var> k{tape.constant(kernel)}, b{tape.constant(bias)};
  const auto out = conv1d_maxpool(tape.constant(seq), k, b).value();
  for (std::size_t f = 0; f < 3; ++f) {
    double r = bias[f];
    for (std::size_t row = 0; row < 4; ++row) r += (row % 2 == 0 ? 0.7 : -0.3) * kernel.at(row, f);
    EXPECT_NEAR(out[f], std::max(r, 0.0), 1e-15);
  }
}

TEST(Conv1dMaxpool, WidthOneIdentityPicksMaximum) {
  Tape tape;
  std::vector<Var> k{tape.constant(Tensor::matrix(1, 1, {1.0}))}, b{tape.constant(Tensor::matrix(1, 1, {0.0}))};
  EXPECT_EQ(conv1d_maxpool(tape.constant(Tensor::matrix(3, 1, {1, 5, 2})), k, b).value().item(), 5.0);
}

TEST(Conv1dMaxpool, MatchesSlidingWindowOracle) {
  std::mt19937_64 rng(17);
  const auto seq = random_tensor(rng, {6, 3});
  std::vector<Tensor> kernels{random_tensor(rng, {6, 2}), random_tensor(rng, {9, 2})};
  std::vector<Tensor> biases{random_tensor(rng, {1, 2}), random_tensor(rng, {1, 2})};
  std::vector<double> oracle;
  for (std::size_t b = 0; b < 2; ++b) {
    const std::size_t w = b == 0 ? 2 : 3;
    for (std::size_t f = 0; f < 2; ++f) {
      double best = 0.0;  // ReLU floor
      for (std::size_t s = 0; s + w <= 6; ++s) {
        double acc = biases[b][f];
        for (std::size_t dt = 0; dt < w; ++dt)
          for (std::size_t c = 0; c < 3; ++c) acc += seq.at(s + dt, c) * kernels[b].at(dt * 3 + c, f);
        best = std::max(best, std::max(acc, 0.0));
      }
      oracle.push_back(best);
    }
  }
  Tape tape;
  std::vector<Var> k{tape.constant(kernels[0]), tape.constant(kernels[1])};
  std::vector<Var> bb{tape.constant(biases[0]), tape.constant(biases[1])};
  const auto out = conv1d_maxpool(tape.constant(seq), k, bb).value();
  ASSERT_EQ(out.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out[i], oracle[i], 1e-12);
}

TEST(Conv1dMaxpool, ShortInputNamesWidth) {
  Tape tape;
  std::vector<Var> k{tape.constant(Tensor({6, 1}))}, b{tape.constant(Tensor({1, 1}))};
  try {
    conv1d_maxpool(tape.constant(Tensor({2, 2})), k, b);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("width 3"), std::string::npos) << e.what();
  }
}

TEST(Conv1dMaxpool, OutputLengthIndependentOfSequenceLength) {
  std::mt19937_64 rng(2);
  for (std::size_t T = 3; T < 12; ++T) {
    Tape tape;
    std::vector<Var> k{tape.constant(random_tensor(rng, {4, 5})), tape.constant(random_tensor(rng, {6, 3}))};
    std::vector<Var> b{tape.constant(random_tensor(rng, {1, 5})), tape.constant(random_tensor(rng, {1, 3}))};
    EXPECT_EQ(conv1d_maxpool(tape.constant(random_tensor(rng, {T, 2})), k, b).shape(), (Shape{1, 8}));
  }
}

TEST(Backward, SquareHasGradientTwoX) {
  Tensor x = Tensor::scalar(3.0);
  x.set_requires_grad(true);
  Tape tape;
  auto v = tape.parameter(x);
  tape.backward(mul(v, v));
  EXPECT_EQ(x.grad()[0], 6.0);
}

TEST(Backward, SumOfSigmoidAtZero) {
  Tensor x({4}, 0.0);
  x.set_requires_grad(true);
  Tape tape;
  tape.backward(sum(sigmoid(tape.parameter(x))));
  for (double g : x.grad()) EXPECT_EQ(g, 0.25);
}

TEST(Backward, NonScalarLossIsContractError) {
  Tensor x({3}, 1.0);
  x.set_requires_grad(true);
  Tape tape;
  auto y = tanh(tape.parameter(x));
  EXPECT_THROW(tape.backward(y), ContractError);
}

TEST(Backward, TapeIsConsumed) {
  Tensor x = Tensor::scalar(1.0);
  x.set_requires_grad(true);
  Tape tape;
  auto y = mul(tape.parameter(x), tape.parameter(x));
  tape.backward(y);
  EXPECT_TRUE(tape.consumed());
  EXPECT_THROW(tape.backward(y), ContractError);
}

TEST(Backward, GradientAccumulationIsLinear) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor w = random_tensor(rng, {3, 3});
    w.set_requires_grad(true);
    const Tensor x = random_tensor(rng, {2, 3});
    auto loss_a = [&](Tape& t) { return sum(tanh(matmul(t.constant(x), t.parameter(w)))); };
    auto loss_b = [&](Tape& t) { return sum(mul(sigmoid(t.parameter(w)), t.parameter(w))); };

    w.zero_grad();
    {
      Tape t;
      t.backward(add(loss_a(t), loss_b(t)));
    }
    const std::vector<double> joint(w.grad().begin(), w.grad().end());
    w.zero_grad();
    {
      Tape t;
      t.backward(loss_a(t));
    }
    {
      Tape t;
      t.backward(loss_b(t));
    }
    for (std::size_t i = 0; i < joint.size(); ++i) EXPECT_NEAR(joint[i], w.grad()[i], 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Finite-difference checker

TEST(FiniteDiffCheck, ExactForLinearFunctions) {
  std::mt19937_64 rng(1);
  Tensor p = random_tensor(rng, {5});
  const Tensor c = random_tensor(rng, {5});
  p.set_requires_grad(true);
  auto f = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < 5; ++i) s += c[i] * p[i];
    return s;
  };
  p.zero_grad();
  for (std::size_t i = 0; i < 5; ++i) p.grad()[i] = c[i];
  std::vector<NamedTensor> params{{"p", &p}};
  EXPECT_LT(finite_diff_check(f, params).max_element_error(), 1e-10);
}

TEST(FiniteDiffCheck, TanhSumPasses) {
  std::mt19937_64 rng(4);
  Tensor p = random_tensor(rng, {6});
  p.set_requires_grad(true);
  auto f = [&] {
    Tape t;
    return sum(tanh(t.constant(p))).value().item();
  };
  {
    Tape t;
    t.backward(sum(tanh(t.parameter(p))));
  }
  std::vector<NamedTensor> params{{"p", &p}};
  EXPECT_LT(finite_diff_check(f, params, 1e-5).max_element_error(), 1e-7);
}

TEST(FiniteDiffCheck, FlagsMisScaledGradient) {
  std::mt19937_64 rng(9);
  Tensor p = random_tensor(rng, {4});
  p.set_requires_grad(true);
  auto f = [&] {
    Tape t;
    return sum(tanh(t.constant(p))).value().item();
  };
  {
    Tape t;
    t.backward(sum(tanh(t.parameter(p))));
  }
  for (auto& g : p.grad()) g *= 2.0;
  std::vector<NamedTensor> params{{"p", &p}};
  const auto report = finite_diff_check(f, params);
  EXPECT_NEAR(report.max_rel_error(), 0.5, 1e-6);
  EXPECT_NEAR(report.max_element_error(), 0.5, 1e-6);
  EXPECT_EQ(report.failures(1e-3).size(), 1u);
}

TEST(FiniteDiffCheck, DetectsNonDeterminism) {
  Tensor p = Tensor::scalar(1.0);
  int calls = 0;
  auto f = [&] { return static_cast<double>(++calls); };
  std::vector<NamedTensor> params{{"p", &p}};
  EXPECT_THROW(finite_diff_check(f, params), DeterminismError);
}

// Every op's analytic gradient against central differences over 100 seeds.
struct OpCase {
  const char* name;
  std::vector<Shape> inputs;
  std::function<Var(Tape&, std::vector<Var>&)> build;
};

std::vector<OpCase> op_cases() {
  return {
      {"matmul", {{3, 4}, {4, 2}}, [](Tape&, std::vector<Var>& v) { return matmul(v[0], v[1]); }},
      {"transpose", {{3, 2}}, [](Tape&, std::vector<Var>& v) { return transpose(v[0]); }},
      {"add", {{2, 3}, {2, 3}}, [](Tape&, std::vector<Var>& v) { return add(v[0], v[1]); }},
      {"sub", {{2, 3}, {2, 3}}, [](Tape&, std::vector<Var>& v) { return sub(v[0], v[1]); }},
      {"mul", {{2, 3}, {2, 3}}, [](Tape&, std::vector<Var>& v) { return mul(v[0], v[1]); }},
      {"scale", {{2, 3}}, [](Tape&, std::vector<Var>& v) { return scale(v[0], -1.7); }},
      {"one_minus", {{2, 3}}, [](Tape&, std::vector<Var>& v) { return one_minus(v[0]); }},
      {"add_bias", {{3, 4}, {1, 4}}, [](Tape&, std::vector<Var>& v) { return add_bias(v[0], v[1]); }},
      {"repeat_rows", {{1, 4}}, [](Tape&, std::vector<Var>& v) { return repeat_rows(v[0], 3); }},
      {"sigmoid", {{2, 4}}, [](Tape&, std::vector<Var>& v) { return sigmoid(v[0]); }},
      {"tanh", {{2, 4}}, [](Tape&, std::vector<Var>& v) { return tanh(v[0]); }},
      {"relu", {{2, 4}}, [](Tape&, std::vector<Var>& v) { return relu(v[0]); }},
      {"exp", {{2, 4}}, [](Tape&, std::vector<Var>& v) { return exp(v[0]); }},
      {"log", {{2, 4}}, [](Tape&, std::vector<Var>& v) { return log(exp(v[0])); }},
      {"concat_rows", {{2, 3}, {1, 3}}, [](Tape&, std::vector<Var>& v) { return concat({v[0], v[1]}, 0); }},
      {"concat_cols", {{2, 3}, {2, 1}}, [](Tape&, std::vector<Var>& v) { return concat({v[0], v[1]}, 1); }},
      {"slice_rows", {{4, 3}}, [](Tape&, std::vector<Var>& v) { return slice_rows(v[0], 1, 2); }},
      {"slice_cols", {{3, 4}}, [](Tape&, std::vector<Var>& v) { return slice_cols(v[0], 1, 2); }},
      {"mean_rows", {{4, 3}}, [](Tape&, std::vector<Var>& v) { return mean_rows(v[0]); }},
      {"softmax_rows", {{3, 4}}, [](Tape&, std::vector<Var>& v) { return softmax(v[0], 1); }},
      {"softmax_cols", {{3, 4}}, [](Tape&, std::vector<Var>& v) { return softmax(v[0], 0); }},
      {"layer_norm", {{3, 5}, {1, 5}, {1, 5}}, [](Tape&, std::vector<Var>& v) { return layer_norm(v[0], v[1], v[2]); }},
      {"gather_rows", {{5, 3}}, [](Tape&, std::vector<Var>& v) {
         const std::vector<int> ids{4, 0, 4, 2};
         return gather_rows(v[0], ids);
       }},
      {"causal_mask", {{3, 3}}, [](Tape&, std::vector<Var>& v) { return softmax(causal_mask(v[0]), 1); }},
      {"clamp", {{2, 4}}, [](Tape&, std::vector<Var>& v) { return clamp(v[0], -0.5, 0.5); }},
      {"conv1d_maxpool", {{6, 2}, {4, 3}, {1, 3}, {6, 2}, {1, 2}}, [](Tape&, std::vector<Var>& v) {
         std::vector<Var> k{v[1], v[3]}, b{v[2], v[4]};
         return conv1d_maxpool(v[0], k, b);
       }},
  };
}

TEST(GradientProperty, EveryOpMatchesFiniteDifferences) {
  for (const auto& op : op_cases()) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      std::mt19937_64 rng(seed * 7919 + 1);
      std::vector<Tensor> inputs;
      for (const auto& s : op.inputs) inputs.push_back(random_tensor(rng, s));
      for (auto& t : inputs) t.set_requires_grad(true);
      auto run = [&](bool track) {
        Tape tape;
        std::vector<Var> vars;
        for (auto& t : inputs) vars.push_back(tape.parameter(t, track));
        auto y = op.build(tape, vars);
        // Weighted sum turns any output into a scalar with non-trivial gradient.
        std::mt19937_64 wrng(seed);
        Tensor w(y.value().shape());
        for (auto& v : w.data()) v = std::uniform_real_distribution<double>(-1, 1)(wrng);
        auto loss = sum(mul(y, tape.constant(w)));
        const double value = loss.value().item();
        if (track) tape.backward(loss);
        return value;
      };
      for (auto& t : inputs) t.zero_grad();
      run(true);
      std::vector<NamedTensor> named;
      for (std::size_t i = 0; i < inputs.size(); ++i) named.push_back({std::to_string(i), &inputs[i]});
      const auto report = finite_diff_check([&] { return run(false); }, named, 1e-5);
      EXPECT_LT(report.max_element_error(), 1e-4) << op.name << " seed " << seed;
    }
  }
}

}  // namespace
}  // namespace ssg
