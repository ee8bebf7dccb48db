#pragma once

// Seeded desk-scale benchmark: component ablation and grid-size sweep.
// Each (variant, seed) run generates its corpus, trains with DAgger, picks
// the stop threshold on training episodes and evaluates both val splits.

#include <chrono>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "hett/corpus.hpp"
#include "hett/dagger.hpp"
#include "hett/model.hpp"
#include "hett/parallel.hpp"

namespace hett::bench {

struct Variant {
  std::string name;
  bool two_stage = true;
  int grid_size = 5;
};

inline std::vector<Variant> ablation_variants() {
  return {{"full", true, 5}, {"history-only", false, 5}, {"two-stage-only", true, 0}, {"neither", false, 0}};
}

inline std::vector<Variant> grid_variants() {
  return {{"grid-0", true, 0}, {"grid-3", true, 3}, {"grid-5", true, 5}, {"grid-7", true, 7}};
}

struct BenchConfig {
  data::CorpusConfig corpus;
  agent::HettConfig model;
  train::DaggerConfig dagger;
  sim::SimConfig sim;
  std::vector<double> stop_thresholds = {0.5, 0.6, 0.7, 0.8, 0.9};
  int threshold_episodes = 100;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  int workers = 1;  // concurrent runs

  BenchConfig() {
    model.dim = 32;
    model.layers = 1;
    model.heads = 4;
    model.cnn_channels = {8, 16, 16};
    dagger.epochs = 12;
    dagger.optimizer.lr = 1e-3;
    dagger.max_samples_per_epoch = 250;
  }
};

struct RunResult {
  std::string variant;
  std::uint64_t seed = 0;
  double stop_threshold = 0.0;
  int best_epoch = 0;
  eval::MetricsReport val_seen;
  eval::MetricsReport val_unseen;
  double seconds = 0.0;
};

inline std::vector<agent::EpisodeRef> episode_refs(const data::Corpus& c, const std::string& split) {
  std::vector<agent::EpisodeRef> out;
  for (const auto* e : c.split(split)) out.push_back({&c.world_of(*e), e});
  return out;
}

inline RunResult run(const Variant& v, std::uint64_t seed, const BenchConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  data::CorpusConfig cc = cfg.corpus;
  cc.seed = seed;
  const data::Corpus corpus = data::generate_corpus(cc);
  const auto train_refs = episode_refs(corpus, "train");
  const auto seen = episode_refs(corpus, "val_seen");
  const auto unseen = episode_refs(corpus, "val_unseen");

  agent::HettConfig mc = cfg.model;
  mc.two_stage = v.two_stage;
  mc.grid_size = v.grid_size;
  mc.init_seed = seed + 1;
  agent::HettModel model(mc, agent::Vocabulary());
  train::DaggerConfig dc = cfg.dagger;
  dc.seed = seed;
  dc.workers = 1;
  nn::AdamW opt(dc.optimizer);
  train::TrainState state;
  train::dagger_train(model, opt, state, train_refs, seen, cfg.sim, dc);
  if (!state.best_params.empty()) train::restore(model.params(), state.best_params);

  RunResult r;
  r.variant = v.name;
  r.seed = seed;
  r.best_epoch = state.best_epoch;
  const std::vector<agent::EpisodeRef> pick(
      train_refs.begin(), train_refs.begin() + std::min<std::ptrdiff_t>(cfg.threshold_episodes, train_refs.size()));
  double best = -1.0;
  for (double t : cfg.stop_thresholds) {
    model.set_stop_threshold(t);
    const double sr = train::evaluate(model, pick, cfg.sim).sr;
    if (sr > best) {
      best = sr;
      r.stop_threshold = t;
    }
  }
  model.set_stop_threshold(r.stop_threshold);
  r.val_seen = train::evaluate(model, seen, cfg.sim);
  r.val_unseen = train::evaluate(model, unseen, cfg.sim);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// Every (variant, seed) pair, runs spread over cfg.workers threads.
inline std::vector<RunResult> run_all(const std::vector<Variant>& variants, const BenchConfig& cfg) {
  std::vector<std::pair<const Variant*, std::uint64_t>> jobs;
  for (const auto& v : variants)
    for (auto s : cfg.seeds) jobs.emplace_back(&v, s);
  std::vector<RunResult> out(jobs.size());
  parallel_for(jobs.size(), cfg.workers, [&](std::size_t i) { out[i] = run(*jobs[i].first, jobs[i].second, cfg); });
  return out;
}

struct Summary {
  std::string variant;
  double sr_seen = 0.0;
  double sr_unseen = 0.0;
  double spl_seen = 0.0;
  double ne_seen = 0.0;
  int runs = 0;
};

inline Summary summarize(const std::vector<RunResult>& results, const std::string& variant) {
  Summary s;
  s.variant = variant;
  for (const auto& r : results) {
    if (r.variant != variant) continue;
    s.sr_seen += r.val_seen.sr;
    s.sr_unseen += r.val_unseen.sr;
    s.spl_seen += r.val_seen.spl;
    s.ne_seen += r.val_seen.ne;
    ++s.runs;
  }
  if (s.runs > 0) {
    s.sr_seen /= s.runs;
    s.sr_unseen /= s.runs;
    s.spl_seen /= s.runs;
    s.ne_seen /= s.runs;
  }
  return s;
}

inline std::string table(const std::vector<RunResult>& results, const std::vector<Variant>& variants) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(2);
  o << std::left << std::setw(16) << "variant" << std::right << std::setw(6) << "seed" << std::setw(8) << "theta"
    << std::setw(8) << "epoch" << std::setw(10) << "seen NE" << std::setw(9) << "seen SR" << std::setw(10) << "seen OSR"
    << std::setw(11) << "unseen SR" << std::setw(10) << "seconds" << '\n';
  for (const auto& r : results)
    o << std::left << std::setw(16) << r.variant << std::right << std::setw(6) << r.seed << std::setw(8)
      << r.stop_threshold << std::setw(8) << r.best_epoch << std::setw(10) << r.val_seen.ne << std::setw(9)
      << r.val_seen.sr << std::setw(10) << r.val_seen.osr << std::setw(11) << r.val_unseen.sr << std::setw(10)
      << r.seconds << '\n';
  o << "mean over seeds\n";
  for (const auto& v : variants) {
    const Summary s = summarize(results, v.name);
    o << std::left << std::setw(16) << v.name << std::right << "  seen SR " << std::setw(6) << s.sr_seen
      << "  unseen SR " << std::setw(6) << s.sr_unseen << "  seen SPL " << std::setw(6) << s.spl_seen << "  seen NE "
      << std::setw(7) << s.ne_seen << '\n';
  }
  return o.str();
}

}  // namespace hett::bench
