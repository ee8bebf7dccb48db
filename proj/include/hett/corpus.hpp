#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hett/error.hpp"
#include "hett/world.hpp"

namespace hett::data {

using world::Episode;
using world::World;

inline const std::vector<std::string>& split_names() {
  static const std::vector<std::string> names = {"train", "val_seen", "val_unseen"};
  return names;
}

// Worlds, episodes and a split manifest (split name -> episode ids).
struct Corpus {
  std::vector<World> worlds;
  std::vector<Episode> episodes;
  std::map<std::string, std::vector<std::string>> splits;

  const World& world_of(const Episode& ep) const {
    for (const auto& w : worlds) {
      if (w.id == ep.world_id) return w;
    }
    throw data_error("episode " + ep.id + " references unknown world " + ep.world_id);
  }

  const Episode& episode(const std::string& id) const {
    for (const auto& e : episodes) {
      if (e.id == id) return e;
    }
    throw data_error("unknown episode id: " + id);
  }

  std::vector<const Episode*> split(const std::string& name) const {
    auto it = splits.find(name);
    if (it == splits.end()) throw usage_error("unknown split: " + name);
    std::vector<const Episode*> out;
    std::map<std::string, const Episode*> by_id;
    for (const auto& e : episodes) by_id[e.id] = &e;
    for (const auto& id : it->second) {
      auto e = by_id.find(id);
      if (e == by_id.end()) throw data_error("split " + name + " lists unknown episode " + id);
      out.push_back(e->second);
    }
    return out;
  }
};

struct CorpusConfig {
  std::uint64_t seed = 0;
  int worlds = 8;
  int unseen_worlds = 2;
  int train_episodes = 500;
  int val_seen_episodes = 100;
  int val_unseen_episodes = 100;
  world::WorldConfig world;
  world::InstructionGrammar grammar;
};

// Seen worlds supply train and val_seen; unseen worlds supply val_unseen.
// Episodes are dealt round-robin across the eligible worlds.
inline Corpus generate_corpus(const CorpusConfig& cfg) {
  if (cfg.worlds < 1 || cfg.unseen_worlds < 0 || cfg.unseen_worlds >= cfg.worlds + (cfg.val_unseen_episodes == 0))
    throw usage_error("generate_corpus: need at least one seen world");
  if (cfg.val_unseen_episodes > 0 && cfg.unseen_worlds == 0)
    throw usage_error("generate_corpus: val_unseen episodes need at least one unseen world");
  Corpus c;
  for (int i = 0; i < cfg.worlds; ++i)
    c.worlds.push_back(world::generate_world(cfg.seed * 1000 + static_cast<std::uint64_t>(i), cfg.world, "w" + std::to_string(i)));
  const int seen = cfg.worlds - cfg.unseen_worlds;
  std::vector<int> counter(static_cast<std::size_t>(cfg.worlds), 0);

  auto deal = [&](const std::string& split, int count, int first_world, int n_worlds) {
    auto& ids = c.splits[split];
    for (int k = 0; k < count; ++k) {
      const int wi = first_world + k % n_worlds;
      const World& w = c.worlds[static_cast<std::size_t>(wi)];
      const int j = counter[static_cast<std::size_t>(wi)]++;
      c.episodes.push_back(world::generate_episode(w, static_cast<std::uint64_t>(j), cfg.grammar,
                                                   w.id + "-e" + std::to_string(j)));
      ids.push_back(c.episodes.back().id);
    }
  };
  deal("train", cfg.train_episodes, 0, seen);
  deal("val_seen", cfg.val_seen_episodes, 0, seen);
  c.splits["val_unseen"];
  if (cfg.val_unseen_episodes > 0) deal("val_unseen", cfg.val_unseen_episodes, seen, cfg.unseen_worlds);
  return c;
}

}  // namespace hett::data
