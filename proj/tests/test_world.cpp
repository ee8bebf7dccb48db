#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "hett/corpus.hpp"
#include "hett/world.hpp"

using namespace hett;

TEST(GenerateWorld, Deterministic) {
  const world::WorldConfig cfg;
  EXPECT_EQ(world::generate_world(7, cfg), world::generate_world(7, cfg));
}

TEST(GenerateWorld, EmptyLandmarkRange) {
  world::WorldConfig cfg;
  cfg.landmark_count_min = cfg.landmark_count_max = 0;
  EXPECT_TRUE(world::generate_world(7, cfg).landmarks.empty());
}

TEST(GenerateWorld, SeedsDiffer) {
  const world::WorldConfig cfg;
  const auto a = world::generate_world(7, cfg), b = world::generate_world(8, cfg);
  bool differ = a.landmarks.size() != b.landmarks.size();
  for (std::size_t i = 0; !differ && i < a.landmarks.size(); ++i)
    differ = a.landmarks[i].shape.vertices != b.landmarks[i].shape.vertices;
  EXPECT_TRUE(differ);
}

TEST(GenerateWorld, InvariantsHold) {
  const world::WorldConfig cfg;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto w = world::generate_world(seed, cfg);
    for (const auto& lm : w.landmarks) {
      ASSERT_TRUE(geom::is_valid(lm.shape));
      ASSERT_FALSE(lm.name.empty());
      for (const auto& v : lm.shape.vertices) ASSERT_TRUE(w.bounds.contains(v));
    }
    for (std::size_t i = 0; i < w.landmarks.size(); ++i) {
      for (std::size_t j = i + 1; j < w.landmarks.size(); ++j) {
        ASSERT_NE(w.landmarks[i].id, w.landmarks[j].id);
        for (const auto& v : w.landmarks[i].shape.vertices)
          ASSERT_FALSE(geom::point_in_polygon(v, w.landmarks[j].shape));
      }
    }
    for (const auto& o : w.objects) ASSERT_TRUE(w.bounds.contains(o.position));
  }
}

TEST(GenerateWorld, GoalsInsideBoundsOverManySeeds) {
  const world::WorldConfig cfg;
  const world::InstructionGrammar g;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto w = world::generate_world(seed, cfg);
    const auto ep = world::generate_episode(w, seed, g);
    ASSERT_TRUE(w.bounds.contains(ep.goal));
    ASSERT_TRUE(w.bounds.contains(ep.start_pose.position));
  }
}

TEST(GenerateWorld, UnpackableConfigRejected) {
  world::WorldConfig cfg;
  cfg.width = cfg.height = 60;
  cfg.landmark_count_min = cfg.landmark_count_max = 7;
  EXPECT_THROW(world::generate_world(1, cfg), Error);
}

TEST(GenerateEpisode, SingleLandmarkTemplate) {
  world::World w;
  w.id = "w";
  w.bounds = {{0, 0}, {100, 100}};
  w.landmarks.push_back({"L0", {"plaza"}, geom::Polygon{{{10, 10}, {30, 10}, {30, 30}, {10, 30}}}});
  w.objects.push_back({{"red", "car"}, {50, 50}});
  const auto ep = world::generate_episode(w, 3, {});
  for (const char* tok : {"red", "car", "plaza"})
    EXPECT_NE(std::find(ep.instruction.begin(), ep.instruction.end(), tok), ep.instruction.end()) << tok;
  EXPECT_EQ(ep.goal, (geom::Point2{50, 50}));
  EXPECT_EQ(ep, world::generate_episode(w, 3, {}));
}

TEST(GenerateEpisode, ReferencesResolveAndPathEndsAtGoal) {
  const auto w = world::generate_world(4, {});
  const world::InstructionGrammar g;
  for (int i = 0; i < 100; ++i) {
    const auto ep = world::generate_episode(w, static_cast<std::uint64_t>(i), g);
    ASSERT_FALSE(ep.referenced_landmarks.empty());
    for (const auto& id : ep.referenced_landmarks) EXPECT_NE(w.find_landmark(id), nullptr);
    EXPECT_LE(ep.instruction.size(), g.max_tokens);
    EXPECT_EQ(ep.expert_path.front(), ep.start_pose.position);
    EXPECT_LE(geom::distance(ep.expert_path.back(), ep.goal), 20.0);
    const auto vocab = g.vocabulary();
    for (const auto& t : ep.instruction) EXPECT_TRUE(std::binary_search(vocab.begin() + 2, vocab.end(), t)) << t;
  }
}

TEST(GenerateEpisode, NeedsLandmarkAndObject) {
  world::World w;
  w.bounds = {{0, 0}, {100, 100}};
  EXPECT_THROW(world::generate_episode(w, 0, {}), Error);
}

TEST(Corpus, SplitsAreDisjointAndSized) {
  data::CorpusConfig cfg;
  cfg.train_episodes = 30;
  cfg.val_seen_episodes = 10;
  cfg.val_unseen_episodes = 10;
  const auto c = data::generate_corpus(cfg);
  EXPECT_EQ(c.split("train").size(), 30u);
  EXPECT_EQ(c.split("val_seen").size(), 10u);
  EXPECT_EQ(c.split("val_unseen").size(), 10u);
  std::set<std::string> seen_worlds, ids;
  for (const char* s : {"train", "val_seen"})
    for (const auto* e : c.split(s)) seen_worlds.insert(e->world_id);
  for (const auto* e : c.split("val_unseen")) EXPECT_EQ(seen_worlds.count(e->world_id), 0u);
  for (const auto& e : c.episodes) EXPECT_TRUE(ids.insert(e.id).second);
  EXPECT_THROW(c.split("test"), Error);
}
