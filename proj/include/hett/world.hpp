#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hett/error.hpp"
#include "hett/geom.hpp"
#include "hett/rng.hpp"

namespace hett::world {

using geom::LandmarkMap;
using geom::Point2;
using geom::Polygon;
using geom::Rect;

struct Landmark {
  std::string id;
  std::vector<std::string> name;  // word sequence
  Polygon shape;

  std::string display_name() const {
    std::string s;
    for (const auto& w : name) s += (s.empty() ? "" : " ") + w;
    return s;
  }
  friend bool operator==(const Landmark&, const Landmark&) = default;
};

struct WorldObject {
  std::vector<std::string> attributes;  // {color, type}
  Point2 position;
  friend bool operator==(const WorldObject&, const WorldObject&) = default;
};

struct World {
  std::string id;
  Rect bounds;
  std::vector<Landmark> landmarks;
  std::vector<WorldObject> objects;
  std::uint64_t seed = 0;

  const Landmark* find_landmark(const std::string& landmark_id) const {
    for (const auto& l : landmarks) {
      if (l.id == landmark_id) return &l;
    }
    return nullptr;
  }
  friend bool operator==(const World&, const World&) = default;
};

inline const std::vector<std::string>& default_landmark_names() {
  static const std::vector<std::string> names = {
      "one stop",      "river bridge", "city hall",     "central plaza",  "market square", "old church",
      "grand hotel",   "train station", "north park",   "stadium",        "museum",        "public library",
      "harbor",        "clock tower",  "shopping mall", "fire station",   "police station", "high school",
      "hospital",      "bus depot",    "water tower",   "town garden",    "bowling alley", "cinema"};
  return names;
}

inline const std::vector<std::string>& default_colors() {
  static const std::vector<std::string> c = {"red", "white", "black", "blue", "green", "yellow", "gray", "silver"};
  return c;
}

// Object types and their rendered height proxy in [0, 1].
inline const std::vector<std::pair<std::string, double>>& default_object_types() {
  static const std::vector<std::pair<std::string, double>> t = {
      {"car", 0.25}, {"van", 0.4}, {"truck", 0.55}, {"bus", 0.7}, {"tree", 0.85}, {"tent", 1.0}};
  return t;
}

inline double object_height(const WorldObject& obj) {
  for (const auto& [type, h] : default_object_types()) {
    if (obj.attributes.size() > 1 && obj.attributes[1] == type) return h;
  }
  return 0.5;
}

struct WorldConfig {
  double width = 400.0;
  double height = 400.0;
  int landmark_count_min = 4;
  int landmark_count_max = 7;
  int object_count_min = 24;
  int object_count_max = 40;
  double landmark_radius_min = 18.0;
  double landmark_radius_max = 40.0;
  double landmark_gap = 15.0;     // clearance between landmark bounding circles
  double object_offset_min = 8.0;  // object distance beyond landmark bounding circle
  double object_offset_max = 45.0;
  int max_retries = 100;
  std::vector<std::string> name_vocabulary = default_landmark_names();
};

namespace detail {

inline std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

// Convex polygon inscribed in a circle of the given radius.
inline Polygon random_convex_polygon(Rng& rng, Point2 center, double radius) {
  const int n = static_cast<int>(rng.integer(4, 7));
  std::vector<double> angles;
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (int i = 0; i < n; ++i) {
    const double slot = 2.0 * std::numbers::pi / n;
    angles.push_back(phase + slot * (i + rng.uniform(0.15, 0.85)));
  }
  Polygon poly;
  for (double a : angles) {
    const double r = radius * rng.uniform(0.7, 1.0);
    poly.vertices.push_back({center.x + r * std::cos(a), center.y + r * std::sin(a)});
  }
  return poly;
}

}  // namespace detail

// Deterministic in (seed, config). Landmarks are convex polygons inside
// non-overlapping bounding circles; objects cluster around landmarks.
inline World generate_world(std::uint64_t seed, const WorldConfig& config, std::string id = "") {
  if (config.width <= 0 || config.height <= 0) throw usage_error("generate_world: bounds must be positive");
  if (config.landmark_count_min < 0 || config.landmark_count_max < config.landmark_count_min)
    throw usage_error("generate_world: invalid landmark count range");
  if (config.object_count_min < 0 || config.object_count_max < config.object_count_min)
    throw usage_error("generate_world: invalid object count range");
  if (static_cast<std::size_t>(config.landmark_count_max) > config.name_vocabulary.size())
    throw usage_error("generate_world: name vocabulary smaller than landmark count");

  Rng rng = Rng::stream(seed, 0x77);
  World w;
  w.id = id.empty() ? "w" + std::to_string(seed) : std::move(id);
  w.seed = seed;
  w.bounds = {{0.0, 0.0}, {config.width, config.height}};

  const int n_landmarks = static_cast<int>(rng.integer(config.landmark_count_min, config.landmark_count_max));
  std::vector<std::string> names = config.name_vocabulary;
  rng.shuffle(names);

  struct Circle {
    Point2 c;
    double r;
  };
  std::vector<Circle> placed;
  for (int i = 0; i < n_landmarks; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt <= config.max_retries && !ok; ++attempt) {
      const double r = rng.uniform(config.landmark_radius_min, config.landmark_radius_max);
      const double margin = r + 5.0;
      if (2 * margin >= config.width || 2 * margin >= config.height) continue;
      const Point2 c{rng.uniform(margin, config.width - margin), rng.uniform(margin, config.height - margin)};
      ok = std::all_of(placed.begin(), placed.end(), [&](const Circle& o) {
        return geom::distance(o.c, c) >= o.r + r + config.landmark_gap;
      });
      if (ok) {
        placed.push_back({c, r});
        Landmark lm;
        lm.id = "L" + std::to_string(i);
        lm.name = detail::split_words(names[static_cast<std::size_t>(i)]);
        lm.shape = detail::random_convex_polygon(rng, c, r);
        w.landmarks.push_back(std::move(lm));
      }
    }
    if (!ok) {
      throw usage_error("generate_world: could not place landmark " + std::to_string(i) + " without overlap after " +
                        std::to_string(config.max_retries) + " retries");
    }
  }

  const int n_objects = static_cast<int>(rng.integer(config.object_count_min, config.object_count_max));
  const auto& colors = default_colors();
  const auto& types = default_object_types();
  for (int i = 0; i < n_objects; ++i) {
    WorldObject obj;
    obj.attributes = {colors[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(colors.size()) - 1))],
                      types[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(types.size()) - 1))].first};
    Point2 p;
    if (placed.empty()) {
      p = {rng.uniform(0.0, config.width), rng.uniform(0.0, config.height)};
    } else {
      const auto& anchor = placed[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(placed.size()) - 1))];
      const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double d = anchor.r + rng.uniform(config.object_offset_min, config.object_offset_max);
      p = w.bounds.clamp({anchor.c.x + d * std::cos(a), anchor.c.y + d * std::sin(a)});
    }
    obj.position = p;
    w.objects.push_back(std::move(obj));
  }
  return w;
}

// ---------------------------------------------------------------------------
// Instructions and episodes

struct Pose {
  Point2 position;
  double yaw = 0.0;
  friend bool operator==(const Pose&, const Pose&) = default;
};

struct Episode {
  std::string id;
  std::string world_id;
  std::vector<std::string> instruction;
  std::vector<std::string> referenced_landmarks;
  Pose start_pose;
  Point2 goal;
  std::vector<Point2> expert_path;

  std::string instruction_text() const {
    std::string s;
    for (const auto& w : instruction) s += (s.empty() ? "" : " ") + w;
    return s;
  }
  friend bool operator==(const Episode&, const Episode&) = default;
};

// Spatial relation of a point to a landmark, as instruction words.
inline std::vector<std::string> relation_words(Point2 p, const Landmark& lm) {
  if (geom::point_in_polygon(p, lm.shape)) return {"inside", "the"};
  const Point2 d = p - geom::centroid(lm.shape);
  if (std::abs(d.x) >= std::abs(d.y)) return {d.x >= 0 ? "east" : "west", "of", "the"};
  return {d.y >= 0 ? "north" : "south", "of", "the"};
}

// Fixed template set over a closed vocabulary. Templates expand
// <prefix> <color> <type> <relation> <landmark> [and <relation> <landmark>].
struct InstructionGrammar {
  std::vector<std::vector<std::string>> prefixes = {
      {"the"}, {"find", "the"}, {"fly", "to", "the"}, {"go", "to", "the"}, {"look", "for", "the"}};
  double second_landmark_prob = 0.35;
  double second_landmark_max_distance = 120.0;
  double start_distance_min = 100.0;
  double start_distance_max = 300.0;
  std::size_t max_tokens = 24;

  // Every token the generator can emit, sorted, with "<pad>" and "<unk>" first.
  std::vector<std::string> vocabulary(const std::vector<std::string>& landmark_names = default_landmark_names()) const {
    std::set<std::string> words;
    for (const auto& p : prefixes) words.insert(p.begin(), p.end());
    for (const auto& c : default_colors()) words.insert(c);
    for (const auto& t : default_object_types()) words.insert(t.first);
    for (const char* w : {"inside", "the", "of", "east", "west", "north", "south", "and"}) words.insert(w);
    for (const auto& n : landmark_names) {
      for (const auto& w : detail::split_words(n)) words.insert(w);
    }
    std::vector<std::string> out = {"<pad>", "<unk>"};
    out.insert(out.end(), words.begin(), words.end());
    return out;
  }
};

inline Landmark const& nearest_landmark(const World& w, Point2 p, const Landmark* exclude = nullptr) {
  const Landmark* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& lm : w.landmarks) {
    if (&lm == exclude) continue;
    const double d = geom::distance_to_polygon(p, lm.shape);
    if (d < best_d) {
      best_d = d;
      best = &lm;
    }
  }
  return *best;
}

// Deterministic in (world, seed, grammar).
inline Episode generate_episode(const World& world, std::uint64_t seed, const InstructionGrammar& grammar,
                                std::string id = "") {
  if (world.landmarks.empty() || world.objects.empty())
    throw usage_error("generate_episode: world needs at least one landmark and one object");
  Rng rng = Rng::stream(world.seed * 1000003ULL + seed, 0xE5);

  const auto& target =
      world.objects[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(world.objects.size()) - 1))];
  const Landmark& anchor = nearest_landmark(world, target.position);

  Episode ep;
  ep.id = id.empty() ? world.id + "-e" + std::to_string(seed) : std::move(id);
  ep.world_id = world.id;
  const auto& prefix =
      grammar.prefixes[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(grammar.prefixes.size()) - 1))];
  auto append = [&](const std::vector<std::string>& words) {
    ep.instruction.insert(ep.instruction.end(), words.begin(), words.end());
  };
  append(prefix);
  append(target.attributes);
  append(relation_words(target.position, anchor));
  append(anchor.name);
  ep.referenced_landmarks.push_back(anchor.id);

  if (world.landmarks.size() > 1 && rng.bernoulli(grammar.second_landmark_prob)) {
    const Landmark& second = nearest_landmark(world, target.position, &anchor);
    const bool close = geom::distance_to_polygon(target.position, second.shape) <= grammar.second_landmark_max_distance;
    const std::size_t extra = 1 + relation_words(target.position, second).size() + second.name.size();
    if (close && ep.instruction.size() + extra <= grammar.max_tokens) {
      append({"and"});
      append(relation_words(target.position, second));
      append(second.name);
      ep.referenced_landmarks.push_back(second.id);
    }
  }

  ep.goal = target.position;
  // Start: random heading from the goal at a random distance, retried until in bounds.
  Point2 start = world.bounds.center();
  for (int attempt = 0; attempt < 200; ++attempt) {
    const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double d = rng.uniform(grammar.start_distance_min, grammar.start_distance_max);
    const Point2 cand{ep.goal.x + d * std::cos(a), ep.goal.y + d * std::sin(a)};
    if (world.bounds.contains(cand)) {
      start = cand;
      break;
    }
  }
  ep.start_pose = {start, geom::wrap_angle(rng.uniform(-std::numbers::pi, std::numbers::pi))};
  ep.expert_path = {world.bounds.clamp(start), world.bounds.clamp(ep.goal)};
  return ep;
}

// Landmark polygons referenced by an episode, in reference order.
inline std::vector<const Polygon*> referenced_polygons(const World& world, const Episode& ep) {
  std::vector<const Polygon*> out;
  for (const auto& id : ep.referenced_landmarks) {
    const Landmark* lm = world.find_landmark(id);
    if (!lm) throw data_error("episode " + ep.id + " references unknown landmark " + id);
    out.push_back(&lm->shape);
  }
  return out;
}

inline LandmarkMap rasterize_landmarks(const std::vector<Landmark>& landmarks, const Rect& bounds, int size) {
  std::vector<const Polygon*> polys;
  for (const auto& l : landmarks) polys.push_back(&l.shape);
  return geom::rasterize_polygons(polys, bounds, size);
}

inline LandmarkMap episode_landmark_map(const World& world, const Episode& ep, int size) {
  const auto polys = referenced_polygons(world, ep);
  return geom::rasterize_polygons(polys, world.bounds, size);
}

}  // namespace hett::world
