#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "hett/gradcheck.hpp"
#include "hett/tensor.hpp"
#include "op_cases.hpp"

using namespace hett;
using nn::Tensor;

using opcheck::op_cases;
using opcheck::probe;
using opcheck::rand_tensor;

class OpGradient : public ::testing::TestWithParam<std::size_t> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const auto c = op_cases()[GetParam()];
  Rng rng(100 + GetParam());
  const auto xs = c.inputs(rng);
  std::vector<nn::Parameter> params;
  for (std::size_t i = 0; i < xs.size(); ++i) params.push_back({"x" + std::to_string(i), xs[i]});
  const auto rep = nn::finite_difference_check([&] { return probe(c.op(xs), 7); }, params, {});
  EXPECT_TRUE(rep.passed) << c.name << " worst " << rep.worst_param << "[" << rep.worst_index
                          << "] rel=" << rep.max_relative_error;
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::Range<std::size_t>(0, op_cases().size()),
                         [](const auto& info) { return std::string(op_cases()[info.param].name); });

TEST(Matmul, IdentityAndZeros) {
  Rng rng(1);
  const Tensor a = rand_tensor({3, 3}, rng);
  const Tensor eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor c = nn::matmul(a, eye);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(c.at(i), a.at(i));
  const Tensor z = nn::matmul(Tensor::zeros({2, 3}), a);
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(Matmul, NaiveLoopOracle) {
  Rng rng(2);
  const Tensor a = rand_tensor({3, 4}, rng), b = rand_tensor({4, 2}, rng);
  const Tensor c = nn::matmul(a, b);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 2; ++j) {
      double s = 0;
      for (int k = 0; k < 4; ++k) s += a.at(i * 4 + k) * b.at(k * 2 + j);
      EXPECT_NEAR(c.at(i * 2 + j), s, 1e-12);
    }
  }
}

TEST(Matmul, ShapeMismatchThrows) {
  EXPECT_THROW(nn::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), Error);
}

TEST(Softmax, UniformAndShiftInvariant) {
  const Tensor u = nn::softmax(Tensor::zeros({1, 4}), 1);
  for (double v : u.data()) EXPECT_DOUBLE_EQ(v, 0.25);
  Rng rng(3);
  const Tensor x = rand_tensor({2, 6}, rng, -5, 5);
  const Tensor a = nn::softmax(x, 1), b = nn::softmax(nn::add_scalar(x, 123.0), 1);
  for (int r = 0; r < 2; ++r) {
    double s = 0;
    for (int c = 0; c < 6; ++c) {
      EXPECT_NEAR(a.at(r * 6 + c), b.at(r * 6 + c), 1e-12);
      EXPECT_GE(a.at(r * 6 + c), 0.0);
      s += a.at(r * 6 + c);
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Softmax, GradientTight) {
  Rng rng(4);
  const Tensor x = rand_tensor({2, 5}, rng);
  const auto rep = nn::finite_difference_check([&] { return probe(nn::softmax(x, 1), 9); }, {{"x", x}}, {});
  EXPECT_LT(rep.max_relative_error, 1e-6);
}

TEST(GradCheck, LinearMapExact) {
  Rng rng(5);
  const Tensor x = rand_tensor({7}, rng);
  nn::GradCheckOptions o;
  const auto rep = nn::finite_difference_check([&] { return probe(nn::scale(x, 3.0), 2); }, {{"x", x}}, o);
  EXPECT_LT(rep.max_relative_error, 1e-10);
}

TEST(GradCheck, SoftmaxCrossEntropyComposite) {
  Rng rng(6);
  const Tensor logits = rand_tensor({1, 6}, rng);
  const Tensor onehot = Tensor::from({1, 6}, {0, 0, 1, 0, 0, 0});
  auto f = [&] { return nn::scale(nn::sum(nn::mul(onehot, nn::log(nn::softmax(logits, 1)))), -1.0); };
  EXPECT_LT(nn::finite_difference_check(f, {{"logits", logits}}, {}).max_relative_error, 1e-6);
}

TEST(LayerNorm, NormalizesTokens) {
  Rng rng(7);
  const Tensor x = rand_tensor({4, 16}, rng, -3, 5);
  const Tensor y = nn::layer_norm(x, Tensor::from({16}, std::vector<double>(16, 1.0)), Tensor::zeros({16}));
  for (int t = 0; t < 4; ++t) {
    double m = 0, v = 0;
    for (int k = 0; k < 16; ++k) m += y.at(t * 16 + k);
    m /= 16;
    for (int k = 0; k < 16; ++k) v += (y.at(t * 16 + k) - m) * (y.at(t * 16 + k) - m);
    v /= 16;
    EXPECT_LT(std::abs(m), 1e-7);
    EXPECT_NEAR(v, 1.0, 1e-4);
  }
}

TEST(Attention, SingleKeyReturnsValue) {
  Rng rng(8);
  const Tensor q = rand_tensor({3, 4}, rng), k = rand_tensor({1, 4}, rng), v = rand_tensor({1, 4}, rng);
  const Tensor o = nn::multi_head_sdpa(q, k, v, 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(o.at(i * 4 + j), v.at(j), 1e-12);
}

TEST(Attention, KeyPermutationInvariant) {
  Rng rng(9);
  const Tensor q = rand_tensor({2, 4}, rng), k = rand_tensor({3, 4}, rng), v = rand_tensor({3, 4}, rng);
  const std::vector<int> perm = {2, 0, 1};
  const Tensor a = nn::multi_head_sdpa(q, k, v, 2);
  const Tensor b = nn::multi_head_sdpa(q, nn::gather_rows(k, perm), nn::gather_rows(v, perm), 2);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.at(i), b.at(i), 1e-12);
}

TEST(Tape, GradientsAreDeterministic) {
  auto run = [] {
    Rng rng(10);
    const Tensor a = rand_tensor({3, 4}, rng), b = rand_tensor({4, 4}, rng);
    nn::Tape tape;
    nn::TapeScope s(tape);
    const Tensor loss = probe(nn::softmax(nn::matmul(a, b), 1), 3);
    tape.backward(loss);
    std::vector<double> g(a.grad().begin(), a.grad().end());
    g.insert(g.end(), b.grad().begin(), b.grad().end());
    return g;
  };
  EXPECT_EQ(run(), run());
}

TEST(Tape, NoRecordingOutsideScope) {
  const Tensor x = Tensor::from({2}, {1, 2}, true);
  nn::Tape tape;
  {
    nn::TapeScope s(tape);
    (void)nn::square(x);
  }
  EXPECT_EQ(tape.size(), 1u);
  (void)nn::square(x);
  EXPECT_EQ(tape.size(), 1u);
}
