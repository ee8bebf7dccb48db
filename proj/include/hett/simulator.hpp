#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "hett/error.hpp"
#include "hett/geom.hpp"
#include "hett/world.hpp"

namespace hett::sim {

using geom::Point2;
using world::Episode;
using world::Pose;
using world::World;

struct SimConfig {
  double step_length = 20.0;     // meters per Move
  double success_radius = 20.0;  // meters
  int max_steps = 20;
  double window = 100.0;  // observation window side, meters
  int obs_size = 32;      // H = W
  double object_radius = 4.0;
};

inline constexpr int kObservationChannels = 4;

struct Action {
  enum class Kind { Move, Stop };
  Kind kind = Kind::Stop;
  double heading = 0.0;

  static Action move(double heading) { return {Kind::Move, geom::wrap_angle(heading)}; }
  static Action stop() { return {Kind::Stop, 0.0}; }
  bool is_stop() const { return kind == Kind::Stop; }
  friend bool operator==(const Action&, const Action&) = default;
};

// Channels: 0 referenced-landmark mask, 1 all-landmark mask,
// 2 object density, 3 height proxy. Values in [0, 1].
struct ObservationRaster {
  int channels = kObservationChannels;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  double at(int c, int r, int col) const {
    return values[(static_cast<std::size_t>(c) * height + r) * width + col];
  }
  double& at(int c, int r, int col) { return values[(static_cast<std::size_t>(c) * height + r) * width + col]; }
  friend bool operator==(const ObservationRaster&, const ObservationRaster&) = default;
};

struct EpisodeState {
  const Episode* episode = nullptr;
  Pose pose;
  int step_index = 0;
  bool done = false;
  bool stopped = false;  // done because Stop was issued
  double path_length_so_far = 0.0;
};

// Egocentric axis-aligned window centered on the pose; yaw does not rotate it.
inline ObservationRaster render_observation(const World& w, const Episode& ep, const Pose& pose, double window,
                                            int height, int width, double object_radius = 4.0) {
  if (!(window > 0.0)) throw usage_error("render_observation: window must be positive");
  ObservationRaster obs{kObservationChannels, height, width,
                        std::vector<double>(static_cast<std::size_t>(kObservationChannels) * height * width, 0.0)};

  std::vector<char> referenced(w.landmarks.size(), 0);
  for (std::size_t i = 0; i < w.landmarks.size(); ++i) {
    for (const auto& id : ep.referenced_landmarks) referenced[i] |= (w.landmarks[i].id == id);
  }

  const Point2 origin = pose.position;
  const double half = 0.5 * window;
  const geom::Rect view{{origin.x - half, origin.y - half}, {origin.x + half, origin.y + half}};

  struct LocalPoly {
    std::size_t index;
    geom::Polygon local;
    geom::Rect box;
  };
  std::vector<LocalPoly> polys;
  for (std::size_t i = 0; i < w.landmarks.size(); ++i) {
    const geom::Rect box = geom::bounding_box(w.landmarks[i].shape);
    if (box.max.x < view.min.x || box.min.x > view.max.x || box.max.y < view.min.y || box.min.y > view.max.y) continue;
    LocalPoly lp{i, {}, {}};
    for (const auto& v : w.landmarks[i].shape.vertices) lp.local.vertices.push_back(v - origin);
    lp.box = geom::bounding_box(lp.local);
    polys.push_back(std::move(lp));
  }
  struct LocalObj {
    Point2 p;
    double h;
  };
  std::vector<LocalObj> objs;
  for (const auto& o : w.objects) {
    const Point2 rel = o.position - origin;
    if (std::abs(rel.x) <= half + object_radius && std::abs(rel.y) <= half + object_radius)
      objs.push_back({rel, world::object_height(o)});
  }

  const double cw = window / width, ch = window / height;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const Point2 local{-half + (c + 0.5) * cw, -half + (r + 0.5) * ch};
      if (!w.bounds.contains(origin + local)) continue;
      double height_proxy = 0.0;
      for (const auto& lp : polys) {
        if (!lp.box.contains(local) || !geom::point_in_polygon(local, lp.local)) continue;
        obs.at(1, r, c) = 1.0;
        if (referenced[lp.index]) obs.at(0, r, c) = 1.0;
        height_proxy = std::max(height_proxy, 0.5);
      }
      int count = 0;
      for (const auto& o : objs) {
        if (geom::distance(local, o.p) <= object_radius) {
          ++count;
          height_proxy = std::max(height_proxy, o.h);
        }
      }
      obs.at(2, r, c) = std::min(1.0, 0.5 * count);
      obs.at(3, r, c) = height_proxy;
    }
  }
  return obs;
}

class Simulator {
 public:
  Simulator(const World& w, SimConfig config = {}) : world_(&w), config_(config) {}

  const SimConfig& config() const { return config_; }
  const World& world() const { return *world_; }

  ObservationRaster observe(const EpisodeState& s) const {
    return render_observation(*world_, *s.episode, s.pose, config_.window, config_.obs_size, config_.obs_size,
                              config_.object_radius);
  }

  EpisodeState reset(const Episode& ep) const {
    if (ep.world_id != world_->id) throw data_error("episode " + ep.id + " does not belong to world " + world_->id);
    EpisodeState s;
    s.episode = &ep;
    s.pose = {world_->bounds.clamp(ep.start_pose.position), geom::wrap_angle(ep.start_pose.yaw)};
    return s;
  }

  EpisodeState step(const EpisodeState& s, const Action& a) const {
    if (s.done) throw invariant_error("step called on a finished episode");
    EpisodeState n = s;
    n.step_index += 1;
    if (a.is_stop()) {
      n.done = true;
      n.stopped = true;
      return n;
    }
    const double heading = geom::wrap_angle(a.heading);
    const Point2 target{s.pose.position.x + config_.step_length * std::cos(heading),
                        s.pose.position.y + config_.step_length * std::sin(heading)};
    n.pose.position = world_->bounds.clamp(target);
    n.pose.yaw = heading;
    n.path_length_so_far += geom::distance(s.pose.position, n.pose.position);
    if (n.step_index >= config_.max_steps) n.done = true;
    return n;
  }

 private:
  const World* world_;
  SimConfig config_;
};

inline Action expert_action(const EpisodeState& s, Point2 goal, const SimConfig& config) {
  const Point2 d = goal - s.pose.position;
  if (geom::norm(d) <= config.success_radius) return Action::stop();
  return Action::move(std::atan2(d.y, d.x));
}

struct ExpertTargets {
  Point2 target;  // goal normalized by world bounds
  double heading = 0.0;
  double progress = 0.0;
};

inline ExpertTargets expert_targets(const EpisodeState& s, const Episode& ep, const geom::Rect& bounds,
                                    const SimConfig& config) {
  ExpertTargets t;
  t.target = bounds.normalize(ep.goal);
  const Point2 d = ep.goal - s.pose.position;
  t.heading = (d.x == 0.0 && d.y == 0.0) ? 0.0 : geom::wrap_angle(std::atan2(d.y, d.x));
  const double d0 = geom::distance(ep.start_pose.position, ep.goal);
  const double dt = geom::norm(d);
  const double rho = config.success_radius;
  if (d0 <= rho) {
    t.progress = 1.0;
  } else {
    t.progress = std::clamp((d0 - dt) / (d0 - rho), 0.0, 1.0);
  }
  return t;
}

}  // namespace hett::sim
