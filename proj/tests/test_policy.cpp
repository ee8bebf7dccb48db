#include <gtest/gtest.h>

#include <regex>

#include "fixtures.hpp"
#include "hett/policy.hpp"
#include "hett/rollout.hpp"

using namespace hett;

namespace {
const geom::Rect kBounds{{0, 0}, {400, 400}};

agent::HettConfig config() {
  agent::HettConfig c;
  c.switch_distance = 30;
  c.stop_threshold = 0.9;
  return c;
}
}  // namespace

TEST(PolicyStep, FineStopsAboveThreshold) {
  agent::StageState s;
  s.stage = agent::Stage::Fine;
  const auto [a, n] = agent::policy_step(s, {{0.5, 0.5}, 0.95, 0.3}, {{10, 10}, 0}, kBounds, config());
  EXPECT_TRUE(a.is_stop());
  EXPECT_EQ(n.stage, agent::Stage::Fine);
}

TEST(PolicyStep, FineMovesBelowThreshold) {
  agent::StageState s;
  s.stage = agent::Stage::Fine;
  const auto [a, n] = agent::policy_step(s, {{0.5, 0.5}, 0.5, 0.3}, {{10, 10}, 0}, kBounds, config());
  EXPECT_FALSE(a.is_stop());
  EXPECT_DOUBLE_EQ(a.heading, 0.3);
}

TEST(PolicyStep, CoarseHeadsTowardTarget) {
  const auto [a, n] = agent::policy_step({}, {{100.0 / 400, 0.0}, 0.99, 2.0}, {{0, 0}, 1.0}, kBounds, config());
  EXPECT_FALSE(a.is_stop());
  EXPECT_DOUBLE_EQ(a.heading, 0.0);
  EXPECT_EQ(n.stage, agent::Stage::Coarse);
}

TEST(PolicyStep, CoarseSwitchesWithinDistance) {
  const auto [a, n] = agent::policy_step({}, {{25.0 / 400, 0.0}, 0.1, 2.0}, {{0, 0}, 1.0}, kBounds, config());
  EXPECT_EQ(n.stage, agent::Stage::Fine);
  EXPECT_DOUBLE_EQ(a.heading, 2.0);
}

TEST(PolicyStep, SingleStageStartsFine) {
  auto c = config();
  c.two_stage = false;
  EXPECT_EQ(agent::initial_stage(c).stage, agent::Stage::Fine);
}

TEST(Rollout, StageSequenceIsMonotone) {
  const auto corpus = fixture::small_corpus(0, 12);
  const std::regex pattern("C*F*");
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    auto cfg = fixture::small_model();
    cfg.init_seed = seed;
    cfg.switch_distance = 60 + 20 * static_cast<double>(seed);
    agent::HettModel m(cfg, agent::Vocabulary());
    for (const auto& ep : corpus.episodes) {
      const auto tr = agent::rollout(m, corpus.world_of(ep), ep, fixture::small_sim());
      std::string seq;
      for (const auto& s : tr.steps) seq += s.stage == agent::Stage::Coarse ? 'C' : 'F';
      EXPECT_TRUE(std::regex_match(seq, pattern)) << seq;
      EXPECT_LE(tr.steps.size(), 20u);
      EXPECT_EQ(tr.positions.size(), tr.steps.size() + (tr.stopped ? 0 : 1));
    }
  }
}

TEST(Rollout, ExpertMixingFollowsExpert) {
  const auto corpus = fixture::small_corpus();
  agent::HettModel m(fixture::small_model(), agent::Vocabulary());
  const auto& ep = corpus.episodes.front();
  Rng rng(1);
  const auto tr = agent::rollout(m, corpus.world_of(ep), ep, fixture::small_sim(), 1.0, &rng);
  EXPECT_TRUE(tr.stopped);
  for (const auto& s : tr.steps) EXPECT_TRUE(s.expert_acted);
  EXPECT_LE(geom::distance(tr.positions.back(), ep.goal), 20.0);
}
