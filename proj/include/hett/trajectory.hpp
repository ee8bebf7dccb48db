#pragma once

#include <string>
#include <vector>

#include "hett/geom.hpp"
#include "hett/policy.hpp"
#include "hett/simulator.hpp"

namespace hett::agent {

// One decision: the pose it was taken from, what was executed, the model's
// head values and the expert labels for that state.
struct StepRecord {
  int step = 0;
  world::Pose pose;
  sim::Action action;
  Stage stage = Stage::Coarse;
  geom::Point2 target{0.5, 0.5};
  double progress = 0.0;
  double heading = 0.0;
  bool expert_acted = false;
  geom::Point2 target_gt;
  double heading_gt = 0.0;
  double progress_gt = 0.0;
};

struct TrajectoryRecord {
  std::string episode_id;
  std::string world_id;
  geom::Point2 goal;
  std::vector<StepRecord> steps;
  std::vector<geom::Point2> positions;  // p_0 .. p_T
  bool stopped = false;
  double path_length = 0.0;
};

}  // namespace hett::agent
