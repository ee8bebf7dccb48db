#pragma once

#include "hett/corpus.hpp"
#include "hett/model.hpp"
#include "hett/world.hpp"

namespace fixture {

// A small model that still exercises every block.
inline hett::agent::HettConfig small_model(int dim = 8, int grid = 3) {
  hett::agent::HettConfig c;
  c.dim = dim;
  c.layers = 1;
  c.heads = 2;
  c.ff_mult = 2;
  c.landmark_map_size = 16;
  c.grid_size = grid;
  c.obs_size = 16;
  c.patch = 8;
  c.cnn_channels = {4, 4, 4};
  return c;
}

inline hett::data::Corpus small_corpus(std::uint64_t seed = 0, int train = 12) {
  hett::data::CorpusConfig cfg;
  cfg.seed = seed;
  cfg.worlds = 3;
  cfg.unseen_worlds = 1;
  cfg.train_episodes = train;
  cfg.val_seen_episodes = 4;
  cfg.val_unseen_episodes = 4;
  return hett::data::generate_corpus(cfg);
}

inline hett::sim::SimConfig small_sim() {
  hett::sim::SimConfig s;
  s.obs_size = 16;
  return s;
}

}  // namespace fixture
