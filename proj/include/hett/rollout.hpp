#pragma once

#include <cstdint>
#include <vector>

#include "hett/model.hpp"
#include "hett/policy.hpp"
#include "hett/rng.hpp"
#include "hett/simulator.hpp"
#include "hett/trajectory.hpp"
#include "hett/world.hpp"

namespace hett::agent {

// A world/episode pair, both owned elsewhere.
struct EpisodeRef {
  const world::World* world = nullptr;
  const world::Episode* episode = nullptr;
};

// Per-episode constants of a forward pass: E and L.
struct EpisodeContext {
  Tensor instruction;
  Tensor landmark;
};

inline EpisodeContext episode_context(const HettModel& model, const world::World& w, const world::Episode& ep) {
  return {model.embed_instruction(ep.instruction),
          model.encode_landmarks(world::episode_landmark_map(w, ep, model.config().landmark_map_size))};
}

// Runs one episode to termination. With probability `expert_prob` per step
// (coin drawn from `rng`) the expert's action replaces the policy's; the
// stage machine still advances on the model's own head values. Every visited
// state is labelled with the expert targets.
inline TrajectoryRecord rollout(const HettModel& model, const world::World& w, const world::Episode& ep,
                                const sim::SimConfig& sim_cfg, double expert_prob = 0.0, Rng* rng = nullptr) {
  const HettConfig& cfg = model.config();
  const sim::Simulator simulator(w, sim_cfg);
  sim::EpisodeState state = simulator.reset(ep);
  const EpisodeContext ctx = episode_context(model, w, ep);
  grid::HistoryGridMap history = model.make_history(w.bounds);
  StageState stage = initial_stage(cfg);

  TrajectoryRecord tr;
  tr.episode_id = ep.id;
  tr.world_id = w.id;
  tr.goal = ep.goal;
  tr.positions.push_back(state.pose.position);
  while (!state.done) {
    const sim::ObservationRaster obs = simulator.observe(state);
    const StepOutputs out =
        model.step(ctx.instruction, ctx.landmark, &history, obs, state.pose, w.bounds, state.step_index);
    const HeadValues heads = head_values(out);
    auto [action, next] = policy_step(stage, heads, state.pose, w.bounds, cfg);

    StepRecord rec;
    rec.step = state.step_index;
    rec.pose = state.pose;
    rec.stage = next.stage;
    rec.target = heads.target;
    rec.progress = heads.progress;
    rec.heading = heads.action;
    if (expert_prob > 0.0 && rng && rng->bernoulli(expert_prob)) {
      action = sim::expert_action(state, ep.goal, sim_cfg);
      rec.expert_acted = true;
    }
    rec.action = action;
    const sim::ExpertTargets gt = sim::expert_targets(state, ep, w.bounds, sim_cfg);
    rec.target_gt = gt.target;
    rec.heading_gt = gt.heading;
    rec.progress_gt = gt.progress;
    tr.steps.push_back(rec);

    stage = next;
    state = simulator.step(state, action);
    if (!action.is_stop()) tr.positions.push_back(state.pose.position);
  }
  tr.stopped = state.stopped;
  tr.path_length = state.path_length_so_far;
  return tr;
}

}  // namespace hett::agent
