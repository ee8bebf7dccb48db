#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hett/error.hpp"
#include "hett/losses.hpp"
#include "hett/metrics.hpp"
#include "hett/model.hpp"
#include "hett/nn.hpp"
#include "hett/parallel.hpp"
#include "hett/rollout.hpp"
#include "hett/simulator.hpp"
#include "hett/trajectory.hpp"

namespace hett::train {

using agent::EpisodeRef;
using agent::HettModel;
using agent::TrajectoryRecord;

struct DaggerConfig {
  int epochs = 20;
  int batch_size = 2;
  double beta_decay = 0.75;  // beta_k = beta_decay^(k-1)
  int max_samples_per_epoch = 0;  // 0 trains on the whole aggregate each epoch
  nn::AdamWConfig optimizer;
  LossWeights weights;
  std::uint64_t seed = 0;
  int workers = 1;
};

inline double dagger_beta(const DaggerConfig& cfg, int epoch) {
  return std::pow(cfg.beta_decay, static_cast<double>(epoch - 1));
}

// Loss components of one stored trajectory, re-run with gradients. History
// features are recomputed so the aggregation is trained end to end.
inline LossComponents trajectory_losses(const HettModel& model, const world::World& w, const world::Episode& ep,
                                        const TrajectoryRecord& tr, const sim::SimConfig& sim_cfg) {
  const agent::HettConfig& cfg = model.config();
  const agent::EpisodeContext ctx = agent::episode_context(model, w, ep);
  grid::HistoryGridMap history = model.make_history(w.bounds);
  std::vector<nn::Tensor> g, a, r;
  std::vector<geom::Point2> g_gt;
  std::vector<double> a_gt, r_gt;
  for (const auto& s : tr.steps) {
    const sim::ObservationRaster obs = sim::render_observation(w, ep, s.pose, sim_cfg.window, sim_cfg.obs_size,
                                                               sim_cfg.obs_size, sim_cfg.object_radius);
    const agent::StepOutputs out =
        model.step(ctx.instruction, ctx.landmark, &history, obs, s.pose, w.bounds, s.step, cfg.two_stage);
    if (out.coarse) {
      g.push_back(out.coarse->target);
      g_gt.push_back(s.target_gt);
    }
    if (!cfg.two_stage || s.stage == agent::Stage::Fine) {
      a.push_back(out.fine.action);
      a_gt.push_back(s.heading_gt);
    }
    r.push_back(out.fine.progress);
    r_gt.push_back(s.progress_gt);
  }
  return {loss_target(g, g_gt), loss_action(a, a_gt), loss_progress(r, r_gt)};
}

struct LossTotals {
  double total = 0.0;
  double target = 0.0;
  double action = 0.0;
  double progress = 0.0;
};

struct EpochLog {
  int epoch = 0;
  double beta = 0.0;
  std::size_t dataset_size = 0;
  std::size_t samples = 0;
  LossTotals loss;  // means per trajectory
  eval::MetricsReport val;
  bool loss_increase_flag = false;

  std::string line() const {
    std::ostringstream o;
    o.precision(6);
    o << "epoch=" << epoch << " beta=" << beta << " dataset=" << dataset_size << " samples=" << samples
      << " loss=" << loss.total << " loss_target=" << loss.target << " loss_action=" << loss.action
      << " loss_progress=" << loss.progress << " val_ne=" << val.ne << " val_sr=" << val.sr << " val_osr=" << val.osr
      << " val_spl=" << val.spl;
    if (loss_increase_flag) o << " flag=loss_increase";
    return o.str();
  }
};

// Everything needed to continue a run exactly where it stopped.
struct TrainState {
  int epoch = 0;  // completed epochs
  std::vector<TrajectoryRecord> dataset;
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_sr = -1.0;
  double best_ne = 0.0;
  std::vector<std::vector<double>> best_params;
};

inline std::vector<std::vector<double>> snapshot(const nn::ParamStore& ps) {
  std::vector<std::vector<double>> out;
  for (const auto& p : ps.params()) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

inline void restore(nn::ParamStore& ps, const std::vector<std::vector<double>>& values) {
  if (values.size() != ps.params().size()) throw invariant_error("restore: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = ps.params()[i].tensor.mutable_data();
    if (dst.size() != values[i].size()) throw invariant_error("restore: size mismatch for " + ps.params()[i].name);
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

// Greedy rollouts (no expert), in episode order regardless of worker count.
inline std::vector<TrajectoryRecord> rollout_all(const HettModel& model, const std::vector<EpisodeRef>& episodes,
                                                 const sim::SimConfig& sim_cfg, int workers) {
  std::vector<TrajectoryRecord> out(episodes.size());
  parallel_for(episodes.size(), workers, [&](std::size_t i) {
    out[i] = agent::rollout(model, *episodes[i].world, *episodes[i].episode, sim_cfg);
  });
  return out;
}

inline eval::EpisodeOutcome outcome_of(const TrajectoryRecord& tr) {
  return {tr.episode_id, tr.positions, tr.stopped, tr.goal};
}

inline eval::MetricsReport evaluate(const HettModel& model, const std::vector<EpisodeRef>& episodes,
                                    const sim::SimConfig& sim_cfg, int workers = 1,
                                    std::vector<TrajectoryRecord>* trajectories = nullptr) {
  if (episodes.empty()) throw usage_error("evaluate: empty episode set");
  std::vector<TrajectoryRecord> trs = rollout_all(model, episodes, sim_cfg, workers);
  std::vector<eval::EpisodeOutcome> outcomes;
  for (const auto& tr : trs) outcomes.push_back(outcome_of(tr));
  eval::MetricsReport report = eval::compute_metrics(outcomes, sim_cfg.success_radius);
  if (trajectories) *trajectories = std::move(trs);
  return report;
}

// Better validation result: higher SR, then lower NE.
inline bool improves(const eval::MetricsReport& r, const TrainState& s) {
  if (s.best_sr < 0.0) return true;
  if (r.sr != s.best_sr) return r.sr > s.best_sr;
  return r.ne < s.best_ne;
}

inline const world::Episode& find_episode(const std::vector<EpisodeRef>& refs, const std::string& id,
                                          const world::World** w) {
  for (const auto& r : refs) {
    if (r.episode->id == id) {
      *w = r.world;
      return *r.episode;
    }
  }
  throw data_error("aggregate dataset references unknown episode " + id);
}

// DAgger over `train`, selecting the best epoch on `val`. Resumes from
// `state` (epoch > 0) with the optimizer state supplied by the caller.
// `on_epoch` runs after each epoch, e.g. to write the log and a checkpoint.
inline void dagger_train(HettModel& model, nn::AdamW& optimizer, TrainState& state,
                         const std::vector<EpisodeRef>& train, const std::vector<EpisodeRef>& val,
                         const sim::SimConfig& sim_cfg, const DaggerConfig& cfg,
                         const std::function<void(const EpochLog&, const TrainState&)>& on_epoch = {}) {
  if (train.empty()) throw usage_error("dagger_train: empty training set");
  if (cfg.batch_size < 1) throw usage_error("dagger_train: batch_size must be >= 1");
  if (!(cfg.beta_decay >= 0.0 && cfg.beta_decay <= 1.0)) throw usage_error("dagger_train: beta_decay must be in [0,1]");
  auto& params = model.params().params();

  for (int k = state.epoch + 1; k <= cfg.epochs; ++k) {
    EpochLog log;
    log.epoch = k;
    log.beta = dagger_beta(cfg, k);

    std::vector<TrajectoryRecord> fresh(train.size());
    parallel_for(train.size(), cfg.workers, [&](std::size_t i) {
      Rng rng = Rng::stream(cfg.seed, (static_cast<std::uint64_t>(k) << 32) | i);
      fresh[i] = agent::rollout(model, *train[i].world, *train[i].episode, sim_cfg, log.beta, &rng);
    });
    for (auto& tr : fresh) state.dataset.push_back(std::move(tr));
    log.dataset_size = state.dataset.size();

    std::vector<std::size_t> order(state.dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = Rng::stream(cfg.seed, 0xDA66E500000000ULL + static_cast<std::uint64_t>(k));
    shuffle_rng.shuffle(order);
    if (cfg.max_samples_per_epoch > 0 && order.size() > static_cast<std::size_t>(cfg.max_samples_per_epoch))
      order.resize(static_cast<std::size_t>(cfg.max_samples_per_epoch));
    log.samples = order.size();

    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      model.params().zero_grad();
      for (std::size_t j = b; j < e; ++j) {
        const TrajectoryRecord& tr = state.dataset[order[j]];
        const world::World* w = nullptr;
        const world::Episode& ep = find_episode(train, tr.episode_id, &w);
        nn::Tape tape;
        nn::TapeScope scope(tape);
        const LossComponents c = trajectory_losses(model, *w, ep, tr, sim_cfg);
        const nn::Tensor total = nn::scale(total_loss(c, cfg.weights), 1.0 / static_cast<double>(e - b));
        const double value = total.item() * static_cast<double>(e - b);
        if (!std::isfinite(value))
          throw invariant_error("non-finite loss at epoch " + std::to_string(k) + ", episode " + tr.episode_id);
        log.loss.total += value;
        log.loss.target += c.target.item();
        log.loss.action += c.action.item();
        log.loss.progress += c.progress.item();
        tape.backward(total);
      }
      optimizer.step(params);
    }
    if (log.samples > 0) {
      const double n = static_cast<double>(log.samples);
      log.loss.total /= n;
      log.loss.target /= n;
      log.loss.action /= n;
      log.loss.progress /= n;
    }
    if (k <= 5 && !state.log.empty() && log.loss.total > state.log.back().loss.total) log.loss_increase_flag = true;

    if (!val.empty()) log.val = evaluate(model, val, sim_cfg, cfg.workers);
    if (val.empty() || improves(log.val, state)) {
      state.best_epoch = k;
      state.best_sr = log.val.sr;
      state.best_ne = log.val.ne;
      state.best_params = snapshot(model.params());
    }
    log.val.rows.clear();
    state.epoch = k;
    state.log.push_back(log);
    if (on_epoch) on_epoch(log, state);
  }
}

}  // namespace hett::train
