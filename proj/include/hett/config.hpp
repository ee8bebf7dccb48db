#pragma once

// Flat key-value run configuration. File syntax: one `key = value` per line,
// `#` starts a comment. Unknown keys are rejected.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hett/corpus.hpp"
#include "hett/dagger.hpp"
#include "hett/error.hpp"
#include "hett/model.hpp"
#include "hett/simulator.hpp"

namespace hett::cli {

struct ConfigKey {
  std::string key;
  std::string default_value;
  std::string doc;
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"seed", "0", "corpus generation, model init and DAgger seed"},
      {"workers", "1", "rollout worker threads"},
      {"data", "data/corpus", "corpus file prefix (.wjsonl, .ejsonl, .splits.jsonl)"},
      {"checkpoint", "run/model.ckpt", "checkpoint path (a .manifest is written next to it)"},
      {"log", "run/train.log", "training log path"},
      {"metrics_out", "run/metrics.csv", "eval report path"},
      {"worlds", "8", "number of generated worlds"},
      {"unseen_worlds", "2", "worlds reserved for val_unseen"},
      {"train_episodes", "500", "train split size"},
      {"val_seen_episodes", "100", "val_seen split size"},
      {"val_unseen_episodes", "100", "val_unseen split size"},
      {"world_width", "400", "world width, meters"},
      {"world_height", "400", "world height, meters"},
      {"landmarks_min", "4", "landmarks per world, lower bound"},
      {"landmarks_max", "7", "landmarks per world, upper bound"},
      {"objects_min", "24", "objects per world, lower bound"},
      {"objects_max", "40", "objects per world, upper bound"},
      {"step_length", "20", "meters per Move"},
      {"success_radius", "20", "success radius, meters"},
      {"max_steps", "20", "episode step limit"},
      {"obs_window", "100", "observation window side, meters"},
      {"obs_size", "32", "observation raster side, cells"},
      {"object_radius", "4", "object footprint radius in observations, meters"},
      {"dim", "64", "model width D"},
      {"layers", "2", "transformer layers per stage"},
      {"heads", "4", "attention heads"},
      {"ff_mult", "4", "feed-forward width multiplier"},
      {"landmark_map_size", "32", "landmark map side S^L"},
      {"grid_size", "5", "history grid side S^H (0 disables history tokens)"},
      {"patch", "8", "observation patch side"},
      {"target_head", "sigmoid", "coarse target head: sigmoid | softmax"},
      {"share_transformers", "false", "share weights between coarse and fine transformers"},
      {"two_stage", "true", "coarse stage on (false = fine policy from the first step)"},
      {"stop_threshold", "0.9", "progress threshold for Stop"},
      {"switch_distance", "30", "coarse-to-fine switch distance, meters"},
      {"epochs", "20", "DAgger epochs"},
      {"batch_size", "2", "trajectories per optimizer step"},
      {"lr", "1e-4", "AdamW learning rate"},
      {"weight_decay", "0.01", "AdamW decoupled weight decay"},
      {"clip_norm", "0", "global gradient-norm clip (0 = off)"},
      {"beta_decay", "0.75", "expert mixing beta_k = beta_decay^(k-1)"},
      {"max_samples_per_epoch", "0", "trajectories drawn from the aggregate per epoch (0 = all)"},
      {"loss_target_weight", "2.0", "weight of the target loss"},
      {"loss_action_weight", "1.5", "weight of the action loss"},
      {"loss_progress_weight", "0.1", "weight of the progress loss"},
      {"val_split", "val_seen", "split used for checkpoint selection"},
  };
  return keys;
}

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : config_keys()) values_[k.key] = k.default_value;
  }

  static RunConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw usage_error("cannot read config file " + path);
    RunConfig c;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      if (trim(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw usage_error(path + ":" + std::to_string(n) + ": expected key = value");
      try {
        c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
      } catch (const Error& e) {
        throw usage_error(path + ":" + std::to_string(n) + ": " + e.what());
      }
    }
    return c;
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw usage_error("unknown config key: " + key);
    values_[key] = value;
  }

  // "key=value"
  void set_assignment(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw usage_error("expected key=value, got " + kv);
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw usage_error("unknown config key: " + key);
    return it->second;
  }

  template <typename T>
  T number(const std::string& key) const {
    const std::string& s = str(key);
    T v{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw usage_error("config key " + key + ": not a number: " + s);
    return v;
  }
  int integer(const std::string& key) const { return number<int>(key); }
  double real(const std::string& key) const { return number<double>(key); }
  std::uint64_t u64(const std::string& key) const { return number<std::uint64_t>(key); }

  bool flag(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw usage_error("config key " + key + ": expected true or false, got " + s);
  }

  // Canonical dump, one `key = value` per line in key-table order.
  std::string dump() const {
    std::string out;
    for (const auto& k : config_keys()) out += k.key + " = " + values_.at(k.key) + "\n";
    return out;
  }

  static std::string help() {
    std::ostringstream o;
    o << "config keys (default):\n";
    for (const auto& k : config_keys()) o << "  " << k.key << " = " << k.default_value << "    # " << k.doc << "\n";
    return o.str();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

inline data::CorpusConfig corpus_config(const RunConfig& c) {
  data::CorpusConfig cc;
  cc.seed = c.u64("seed");
  cc.worlds = c.integer("worlds");
  cc.unseen_worlds = c.integer("unseen_worlds");
  cc.train_episodes = c.integer("train_episodes");
  cc.val_seen_episodes = c.integer("val_seen_episodes");
  cc.val_unseen_episodes = c.integer("val_unseen_episodes");
  cc.world.width = c.real("world_width");
  cc.world.height = c.real("world_height");
  cc.world.landmark_count_min = c.integer("landmarks_min");
  cc.world.landmark_count_max = c.integer("landmarks_max");
  cc.world.object_count_min = c.integer("objects_min");
  cc.world.object_count_max = c.integer("objects_max");
  return cc;
}

inline sim::SimConfig sim_config(const RunConfig& c) {
  sim::SimConfig s;
  s.step_length = c.real("step_length");
  s.success_radius = c.real("success_radius");
  s.max_steps = c.integer("max_steps");
  s.window = c.real("obs_window");
  s.obs_size = c.integer("obs_size");
  s.object_radius = c.real("object_radius");
  if (!(s.step_length > 0 && s.success_radius > 0 && s.max_steps > 0 && s.window > 0 && s.obs_size > 0))
    throw usage_error("simulator settings must be positive");
  return s;
}

inline agent::HettConfig model_config(const RunConfig& c) {
  agent::HettConfig m;
  m.dim = c.integer("dim");
  m.layers = c.integer("layers");
  m.heads = c.integer("heads");
  m.ff_mult = c.integer("ff_mult");
  m.landmark_map_size = c.integer("landmark_map_size");
  m.grid_size = c.integer("grid_size");
  m.obs_size = c.integer("obs_size");
  m.patch = c.integer("patch");
  const std::string& head = c.str("target_head");
  if (head != "sigmoid" && head != "softmax") throw usage_error("target_head must be sigmoid or softmax");
  m.target_head = head == "sigmoid" ? agent::TargetHead::Sigmoid : agent::TargetHead::Softmax;
  m.share_transformers = c.flag("share_transformers");
  m.two_stage = c.flag("two_stage");
  m.stop_threshold = c.real("stop_threshold");
  m.switch_distance = c.real("switch_distance");
  m.step_length = c.real("step_length");
  m.max_steps = c.integer("max_steps");
  m.init_seed = c.u64("seed");
  m.validate();
  return m;
}

inline train::DaggerConfig dagger_config(const RunConfig& c) {
  train::DaggerConfig d;
  d.epochs = c.integer("epochs");
  d.batch_size = c.integer("batch_size");
  d.beta_decay = c.real("beta_decay");
  d.max_samples_per_epoch = c.integer("max_samples_per_epoch");
  d.optimizer.lr = c.real("lr");
  d.optimizer.weight_decay = c.real("weight_decay");
  d.optimizer.clip_norm = c.real("clip_norm");
  d.weights = {c.real("loss_target_weight"), c.real("loss_action_weight"), c.real("loss_progress_weight")};
  if (d.weights.target < 0 || d.weights.action < 0 || d.weights.progress < 0)
    throw usage_error("loss weights must be nonnegative");
  d.seed = c.u64("seed");
  d.workers = c.integer("workers");
  if (d.workers < 1) throw usage_error("workers must be >= 1");
  if (d.epochs < 0) throw usage_error("epochs must be >= 0");
  return d;
}

}  // namespace hett::cli
