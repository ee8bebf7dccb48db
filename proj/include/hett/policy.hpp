#pragma once

#include <cmath>

#include "hett/geom.hpp"
#include "hett/model.hpp"
#include "hett/simulator.hpp"

namespace hett::agent {

enum class Stage { Coarse, Fine };

inline const char* stage_name(Stage s) { return s == Stage::Coarse ? "coarse" : "fine"; }

struct StageState {
  Stage stage = Stage::Coarse;
  geom::Point2 last_target{0.5, 0.5};  // normalized
  double last_progress = 0.0;
  double last_action = 0.0;
};

// Head values consumed by the controller.
struct HeadValues {
  geom::Point2 target{0.5, 0.5};  // g_t, normalized
  double progress = 0.0;          // r_t
  double action = 0.0;            // a_t
};

inline HeadValues head_values(const StepOutputs& s) { return {s.target(), s.progress(), s.action()}; }

// Coarse: head for world(g_t) until within the switch distance, then switch
// to Fine for good. Fine: Move(a_t), or Stop once r_t reaches the threshold.
// Single-stage configurations start (and stay) in Fine.
inline std::pair<sim::Action, StageState> policy_step(const StageState& state, const HeadValues& heads,
                                                       const world::Pose& pose, const geom::Rect& bounds,
                                                       const HettConfig& config) {
  StageState next = state;
  next.last_target = heads.target;
  next.last_progress = heads.progress;
  next.last_action = heads.action;
  if (!config.two_stage) next.stage = Stage::Fine;

  if (next.stage == Stage::Coarse) {
    const geom::Point2 goal = bounds.denormalize(heads.target);
    const geom::Point2 d = goal - pose.position;
    if (geom::norm(d) > config.switch_distance) return {sim::Action::move(std::atan2(d.y, d.x)), next};
    next.stage = Stage::Fine;
  }
  if (heads.progress >= config.stop_threshold) return {sim::Action::stop(), next};
  return {sim::Action::move(heads.action), next};
}

inline StageState initial_stage(const HettConfig& config) {
  StageState s;
  s.stage = config.two_stage ? Stage::Coarse : Stage::Fine;
  return s;
}

}  // namespace hett::agent
