#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "hett/dagger.hpp"
#include "hett/gradcheck.hpp"
#include "hett/model.hpp"
#include "hett/rollout.hpp"

using namespace hett;
using nn::Tensor;

namespace {

Tensor rand_tensor(nn::Shape shape, Rng& rng) {
  std::vector<double> v(nn::numel(shape));
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor probe(const Tensor& y, std::uint64_t seed = 3) {
  Rng rng(seed);
  std::vector<double> r(y.size());
  for (double& x : r) x = rng.uniform(-1.0, 1.0);
  return nn::sum(nn::mul(y, Tensor::from(y.shape(), std::move(r))));
}

std::vector<nn::Parameter> params_with(const agent::HettModel& m, const std::string& prefix) {
  std::vector<nn::Parameter> out;
  for (const auto& p : m.params().params())
    if (p.name.rfind(prefix, 0) == 0) out.push_back(p);
  return out;
}

}  // namespace

TEST(Landmarks, EmptyMapZeroBiasesGivesZero) {
  agent::HettModel m(fixture::small_model(), agent::Vocabulary());
  for (auto& p : m.params().params())
    if (p.name.find("bias") != std::string::npos)
      for (double& v : p.tensor.mutable_data()) v = 0.0;
  geom::LandmarkMap map{16, std::vector<double>(256, 0.0)};
  const Tensor l = m.encode_landmarks(map);
  EXPECT_EQ(l.size(), 8u);
  for (double v : l.data()) EXPECT_EQ(v, 0.0);
}

TEST(Landmarks, ShapeAndMismatch) {
  agent::HettModel m(fixture::small_model(), agent::Vocabulary());
  geom::LandmarkMap map{16, std::vector<double>(256, 0.0)};
  map.at(3, 4) = 1.0;
  EXPECT_EQ(m.encode_landmarks(map).shape(), (nn::Shape{1, 8}));
  EXPECT_THROW(m.encode_landmarks(geom::LandmarkMap{8, std::vector<double>(64, 0.0)}), Error);
}

TEST(Landmarks, GradientThroughConvStack) {
  agent::HettModel m(fixture::small_model(), agent::Vocabulary());
  const auto c = fixture::small_corpus();
  const auto& ep = c.episodes.front();
  const auto map = world::episode_landmark_map(c.world_of(ep), ep, 16);
  const auto rep =
      nn::finite_difference_check([&] { return probe(m.encode_landmarks(map)); }, params_with(m, "landmark."), {});
  EXPECT_TRUE(rep.passed) << rep.worst_param << " " << rep.max_relative_error;
}

TEST(Visual, DeterministicShapeAndGradient) {
  agent::HettModel m(fixture::small_model(), agent::Vocabulary());
  const auto c = fixture::small_corpus();
  const auto& ep = c.episodes.front();
  const auto& w = c.world_of(ep);
  const auto obs = sim::render_observation(w, ep, ep.start_pose, 100, 16, 16);
  const Tensor e = m.embed_instruction(ep.instruction);
  const Tensor a = m.encode_visual(e, obs), b = m.encode_visual(e, obs);
  EXPECT_EQ(a.shape(), (nn::Shape{1, 8}));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.at(i), b.at(i));
  auto params = params_with(m, "visual.");
  const auto rep = nn::finite_difference_check(
      [&] { return probe(m.encode_visual(m.embed_instruction(ep.instruction), obs)); }, params, {});
  EXPECT_TRUE(rep.passed) << rep.worst_param << " " << rep.max_relative_error;
}

TEST(Coarse, HistoryTokenPermutationInvariant) {
  agent::HettModel m(fixture::small_model(), agent::Vocabulary());
  Rng rng(1);
  const Tensor e = rand_tensor({5, 8}, rng), l = rand_tensor({1, 8}, rng), f = rand_tensor({9, 8}, rng);
  const Tensor fp = nn::gather_rows(f, {4, 2, 8, 0, 1, 7, 3, 6, 5});
  const auto a = m.coarse_forward(e, l, f), b = m.coarse_forward(e, l, fp);
  for (int k = 0; k < 2; ++k) EXPECT_NEAR(a.target.at(k), b.target.at(k), 1e-12);
}

TEST(Fine, ActionAngleExample) {
  const Tensor a = agent::HettModel::action_angle(nn::tanh(Tensor::from({1, 2}, {0.0, 1.0})));
  EXPECT_EQ(a.item(), 0.0);
}

TEST(Fine, AtanTanhGradientAwayFromOrigin) {
  Rng rng(2);
  for (int i = 0; i < 10; ++i) {
    Tensor uv = rand_tensor({1, 2}, rng);
    if (std::hypot(uv.at(0), uv.at(1)) < 0.2) continue;
    const auto rep = nn::finite_difference_check(
        [&] { return nn::sum(agent::HettModel::action_angle(nn::tanh(uv))); }, {{"uv", uv}}, {});
    EXPECT_TRUE(rep.passed) << rep.max_relative_error;
  }
}

TEST(Model, CodomainsOnRandomWeights) {
  const auto c = fixture::small_corpus();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto cfg = fixture::small_model();
    cfg.init_seed = seed;
    agent::HettModel m(cfg, agent::Vocabulary());
    for (auto& p : m.params().params())
      for (double& v : p.tensor.mutable_data()) v *= 3.0;
    const auto& ep = c.episodes[seed % c.episodes.size()];
    const auto& w = c.world_of(ep);
    const auto ctx = agent::episode_context(m, w, ep);
    auto hist = m.make_history(w.bounds);
    Rng rng(seed);
    for (int t = 0; t < 5; ++t) {
      const world::Pose pose{{rng.uniform(0, 400), rng.uniform(0, 400)}, rng.uniform(-3.14, 3.14)};
      const auto obs = sim::render_observation(w, ep, pose, 100, 16, 16);
      const auto out = m.step(ctx.instruction, ctx.landmark, &hist, obs, pose, w.bounds, t);
      ASSERT_TRUE(out.coarse.has_value());
      for (int k = 0; k < 2; ++k) {
        EXPECT_GE(out.coarse->target.at(k), 0.0);
        EXPECT_LE(out.coarse->target.at(k), 1.0);
      }
      EXPECT_GE(out.progress(), 0.0);
      EXPECT_LE(out.progress(), 1.0);
      EXPECT_GT(out.action(), -std::numbers::pi - 1e-15);
      EXPECT_LE(out.action(), std::numbers::pi);
    }
  }
}

TEST(Model, NoHistoryStillValid) {
  agent::HettModel m(fixture::small_model(8, 0), agent::Vocabulary());
  const auto c = fixture::small_corpus();
  const auto& ep = c.episodes.front();
  const auto tr = agent::rollout(m, c.world_of(ep), ep, fixture::small_sim());
  EXPECT_FALSE(tr.steps.empty());
  for (const auto& s : tr.steps) {
    EXPECT_TRUE(std::isfinite(s.target.x) && std::isfinite(s.progress) && std::isfinite(s.heading));
  }
}

TEST(Model, SoftmaxTargetHeadSumsToOne) {
  auto cfg = fixture::small_model();
  cfg.target_head = agent::TargetHead::Softmax;
  agent::HettModel m(cfg, agent::Vocabulary());
  Rng rng(4);
  const auto out = m.coarse_forward(rand_tensor({3, 8}, rng), rand_tensor({1, 8}, rng), std::nullopt);
  EXPECT_NEAR(out.target.at(0) + out.target.at(1), 1.0, 1e-12);
}

TEST(Model, ForwardIsBitIdentical) {
  const auto c = fixture::small_corpus();
  const auto& ep = c.episodes[1];
  agent::HettModel a(fixture::small_model(), agent::Vocabulary()), b(fixture::small_model(), agent::Vocabulary());
  const auto ta = agent::rollout(a, c.world_of(ep), ep, fixture::small_sim());
  const auto tb = agent::rollout(b, c.world_of(ep), ep, fixture::small_sim());
  ASSERT_EQ(ta.steps.size(), tb.steps.size());
  for (std::size_t i = 0; i < ta.steps.size(); ++i) {
    EXPECT_EQ(ta.steps[i].target, tb.steps[i].target);
    EXPECT_EQ(ta.steps[i].heading, tb.steps[i].heading);
    EXPECT_EQ(ta.steps[i].progress, tb.steps[i].progress);
  }
}

TEST(Model, FullLossGradientAtD8) {
  agent::HettModel m(fixture::small_model(8, 3), agent::Vocabulary());
  const auto c = fixture::small_corpus();
  const auto& ep = c.episodes[2];
  const auto& w = c.world_of(ep);
  const auto sim_cfg = fixture::small_sim();
  auto tr = agent::rollout(m, w, ep, sim_cfg);
  tr.steps.resize(std::min<std::size_t>(tr.steps.size(), 3));
  tr.steps.back().stage = agent::Stage::Fine;
  auto f = [&] { return train::total_loss(train::trajectory_losses(m, w, ep, tr, sim_cfg), {}); };
  nn::GradCheckOptions opt;
  opt.coords_per_param = 8;
  const auto rep = nn::finite_difference_check(f, m.params().params(), opt);
  EXPECT_TRUE(rep.passed) << rep.worst_param << "[" << rep.worst_index << "] rel=" << rep.max_relative_error
                          << " analytic=" << rep.worst_analytic << " numeric=" << rep.worst_numeric;
}
