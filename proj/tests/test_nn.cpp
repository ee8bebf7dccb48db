#include <gtest/gtest.h>

#include <cmath>

#include "hett/gradcheck.hpp"
#include "hett/nn.hpp"

using namespace hett;
using nn::Tensor;

namespace {

Tensor rand_tensor(nn::Shape shape, Rng& rng) {
  std::vector<double> v(nn::numel(shape));
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor probe(const Tensor& y) {
  Rng rng(42);
  std::vector<double> r(y.size());
  for (double& x : r) x = rng.uniform(-1.0, 1.0);
  return nn::sum(nn::mul(y, Tensor::from(y.shape(), std::move(r))));
}

void zero(Tensor& t) {
  for (double& v : t.mutable_data()) v = 0.0;
}

}  // namespace

TEST(ParamStore, RejectsDuplicateNames) {
  nn::ParamStore ps;
  ps.constant("a", {2}, 0.0);
  EXPECT_THROW(ps.constant("a", {2}, 0.0), Error);
}

TEST(Attention, ProjectionGradients) {
  nn::ParamStore ps;
  Rng rng(1);
  nn::MultiHeadAttention attn(ps, "attn", 8, 2, rng);
  const Tensor q = rand_tensor({2, 8}, rng), kv = rand_tensor({4, 8}, rng);
  auto params = ps.params();
  params.push_back({"q", q});
  params.push_back({"kv", kv});
  const auto rep = nn::finite_difference_check([&] { return probe(attn(q, kv)); }, params, {});
  EXPECT_TRUE(rep.passed) << rep.worst_param << " " << rep.max_relative_error;
}

TEST(Transformer, IdentityWithZeroOutputProjections) {
  nn::ParamStore ps;
  Rng rng(2);
  nn::TransformerLayer layer(ps, "l", 8, 2, 2, rng);
  zero(layer.attention().output().weight());
  zero(layer.attention().output().bias());
  zero(layer.feed_forward().layers().back().weight());
  zero(layer.feed_forward().layers().back().bias());
  for (int t : {1, 3, 7}) {
    const Tensor x = rand_tensor({t, 8}, rng);
    const Tensor y = layer(x);
    ASSERT_EQ(y.shape(), x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.at(i), x.at(i));
  }
}

TEST(Transformer, FullLayerGradient) {
  nn::ParamStore ps;
  Rng rng(3);
  nn::TransformerEncoder enc(ps, "enc", 8, 2, 2, 2, rng);
  const Tensor x = rand_tensor({3, 8}, rng);
  auto params = ps.params();
  params.push_back({"x", x});
  const auto rep = nn::finite_difference_check([&] { return probe(enc(x)); }, params, {});
  EXPECT_TRUE(rep.passed) << rep.worst_param << " " << rep.max_relative_error;
}

TEST(ConvMlp, Gradients) {
  nn::ParamStore ps;
  Rng rng(4);
  nn::Conv2d conv(ps, "conv", 2, 3, 3, 2, 1, rng);
  nn::Mlp mlp(ps, "mlp", {3, 5, 2}, rng);
  const Tensor x = rand_tensor({2, 6, 6}, rng);
  const auto rep = nn::finite_difference_check(
      [&] { return probe(mlp(nn::global_avg_pool(nn::gelu(conv(x))))); }, ps.params(), {});
  EXPECT_TRUE(rep.passed) << rep.worst_param << " " << rep.max_relative_error;
}

TEST(AdamW, ZeroGradientNoDecayIsNoop) {
  nn::ParamStore ps;
  Rng rng(5);
  ps.normal("w", {4}, 1.0, rng);
  const std::vector<double> before(ps.params()[0].tensor.data().begin(), ps.params()[0].tensor.data().end());
  nn::AdamWConfig cfg;
  cfg.weight_decay = 0.0;
  nn::AdamW opt(cfg);
  ps.zero_grad();
  opt.step(ps.params());
  const auto after = ps.params()[0].tensor.data();
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(after[i], before[i]);
}

TEST(AdamW, DescendsOnSquare) {
  nn::ParamStore ps;
  Tensor w = ps.create("w", {1}, {1.0});
  nn::AdamW opt;
  ps.zero_grad();
  {
    nn::Tape tape;
    nn::TapeScope s(tape);
    tape.backward(nn::sum(nn::square(w)));
  }
  opt.step(ps.params());
  EXPECT_LT(std::abs(w.at(0)), 1.0);
}

TEST(AdamW, QuadraticConverges) {
  nn::ParamStore ps;
  Tensor w = ps.create("w", {5}, {1.0, -2.0, 0.5, 3.0, -1.0});
  const Tensor scales = Tensor::from({5}, {1, 2, 3, 4, 5});
  nn::AdamWConfig cfg;
  cfg.lr = 0.05;
  cfg.weight_decay = 0.0;
  nn::AdamW opt(cfg);
  double loss = 0;
  for (int i = 0; i < 1000; ++i) {
    ps.zero_grad();
    nn::Tape tape;
    nn::TapeScope s(tape);
    const Tensor l = nn::sum(nn::mul(scales, nn::square(w)));
    loss = l.item();
    tape.backward(l);
    opt.step(ps.params());
    opt.config().lr *= 0.995;
  }
  ps.zero_grad();
  EXPECT_LT(nn::sum(nn::mul(scales, nn::square(w))).item(), 1e-4) << loss;
}
