#pragma once

// Line-delimited JSON records. Every line carries "v": 1 and keys are written
// in sorted order, so files are byte-stable for fixed inputs.

#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hett/annotator.hpp"
#include "hett/corpus.hpp"
#include "hett/error.hpp"
#include "hett/geom.hpp"
#include "hett/trajectory.hpp"
#include "hett/world.hpp"

namespace hett::io {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

inline json to_json(geom::Point2 p) { return json::array({p.x, p.y}); }

inline geom::Point2 point_from(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw data_error("expected [x, y] number pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json to_json(const geom::Polygon& poly) {
  json a = json::array();
  for (const auto& v : poly.vertices) a.push_back(to_json(v));
  return a;
}

inline geom::Polygon polygon_from(const json& j) {
  if (!j.is_array()) throw data_error("expected polygon vertex list");
  geom::Polygon p;
  for (const auto& v : j) p.vertices.push_back(point_from(v));
  return p;
}

template <typename T>
T field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw data_error(std::string("missing field \"") + key + "\"");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw data_error(std::string("field \"") + key + "\" has the wrong type");
  }
}

inline const json& member(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw data_error(std::string("missing field \"") + key + "\"");
  return *it;
}

inline void check_version(const json& j) {
  if (field<int>(j, "v") != kSchemaVersion) throw data_error("unsupported schema version");
}

inline json to_json(const world::World& w) {
  json lms = json::array();
  for (const auto& l : w.landmarks) lms.push_back({{"id", l.id}, {"name", l.name}, {"polygon", to_json(l.shape)}});
  json objs = json::array();
  for (const auto& o : w.objects) objs.push_back({{"attributes", o.attributes}, {"position", to_json(o.position)}});
  return {{"v", kSchemaVersion},
          {"id", w.id},
          {"seed", w.seed},
          {"bounds", json::array({to_json(w.bounds.min), to_json(w.bounds.max)})},
          {"landmarks", lms},
          {"objects", objs}};
}

inline world::World world_from(const json& j) {
  check_version(j);
  world::World w;
  w.id = field<std::string>(j, "id");
  w.seed = field<std::uint64_t>(j, "seed");
  const json& b = member(j, "bounds");
  if (!b.is_array() || b.size() != 2) throw data_error("bounds must be [[x0, y0], [x1, y1]]");
  w.bounds = {point_from(b[0]), point_from(b[1])};
  if (!(w.bounds.width() > 0.0 && w.bounds.height() > 0.0)) throw data_error("bounds must have positive extent");
  for (const auto& l : member(j, "landmarks"))
    w.landmarks.push_back({field<std::string>(l, "id"), field<std::vector<std::string>>(l, "name"),
                           polygon_from(member(l, "polygon"))});
  for (const auto& o : member(j, "objects"))
    w.objects.push_back({field<std::vector<std::string>>(o, "attributes"), point_from(member(o, "position"))});
  return w;
}

inline json to_json(const world::Episode& e) {
  json path = json::array();
  for (const auto& p : e.expert_path) path.push_back(to_json(p));
  return {{"v", kSchemaVersion},
          {"id", e.id},
          {"world", e.world_id},
          {"instruction", e.instruction},
          {"landmarks", e.referenced_landmarks},
          {"start", {{"position", to_json(e.start_pose.position)}, {"yaw", e.start_pose.yaw}}},
          {"goal", to_json(e.goal)},
          {"expert_path", path}};
}

inline world::Episode episode_from(const json& j) {
  check_version(j);
  world::Episode e;
  e.id = field<std::string>(j, "id");
  e.world_id = field<std::string>(j, "world");
  e.instruction = field<std::vector<std::string>>(j, "instruction");
  if (e.instruction.empty()) throw data_error("episode " + e.id + " has an empty instruction");
  e.referenced_landmarks = field<std::vector<std::string>>(j, "landmarks");
  const json& s = member(j, "start");
  e.start_pose = {point_from(member(s, "position")), field<double>(s, "yaw")};
  e.goal = point_from(member(j, "goal"));
  for (const auto& p : member(j, "expert_path")) e.expert_path.push_back(point_from(p));
  return e;
}

inline json to_json(const sim::Action& a) {
  return a.is_stop() ? json{{"kind", "stop"}} : json{{"kind", "move"}, {"heading", a.heading}};
}

inline sim::Action action_from(const json& j) {
  const auto kind = field<std::string>(j, "kind");
  if (kind == "stop") return sim::Action::stop();
  if (kind == "move") return {sim::Action::Kind::Move, field<double>(j, "heading")};
  throw data_error("unknown action kind: " + kind);
}

inline json to_json(const agent::StepRecord& s) {
  return {{"v", kSchemaVersion},
          {"step", s.step},
          {"position", to_json(s.pose.position)},
          {"yaw", s.pose.yaw},
          {"action", to_json(s.action)},
          {"stage", agent::stage_name(s.stage)},
          {"g", to_json(s.target)},
          {"a", s.heading},
          {"r", s.progress},
          {"expert", s.expert_acted},
          {"g_gt", to_json(s.target_gt)},
          {"a_gt", s.heading_gt},
          {"r_gt", s.progress_gt}};
}

inline agent::StepRecord step_from(const json& j) {
  check_version(j);
  agent::StepRecord s;
  s.step = field<int>(j, "step");
  s.pose = {point_from(member(j, "position")), field<double>(j, "yaw")};
  s.action = action_from(member(j, "action"));
  const auto stage = field<std::string>(j, "stage");
  if (stage != "coarse" && stage != "fine") throw data_error("unknown stage: " + stage);
  s.stage = stage == "coarse" ? agent::Stage::Coarse : agent::Stage::Fine;
  s.target = point_from(member(j, "g"));
  s.heading = field<double>(j, "a");
  s.progress = field<double>(j, "r");
  s.expert_acted = field<bool>(j, "expert");
  s.target_gt = point_from(member(j, "g_gt"));
  s.heading_gt = field<double>(j, "a_gt");
  s.progress_gt = field<double>(j, "r_gt");
  return s;
}

inline json to_json(const agent::TrajectoryRecord& t) {
  json steps = json::array();
  for (const auto& s : t.steps) steps.push_back(to_json(s));
  json pos = json::array();
  for (const auto& p : t.positions) pos.push_back(to_json(p));
  return {{"v", kSchemaVersion}, {"episode", t.episode_id}, {"world", t.world_id}, {"goal", to_json(t.goal)},
          {"steps", steps},      {"positions", pos},        {"stopped", t.stopped}, {"path_length", t.path_length}};
}

inline agent::TrajectoryRecord trajectory_from(const json& j) {
  check_version(j);
  agent::TrajectoryRecord t;
  t.episode_id = field<std::string>(j, "episode");
  t.world_id = field<std::string>(j, "world");
  t.goal = point_from(member(j, "goal"));
  for (const auto& s : member(j, "steps")) t.steps.push_back(step_from(s));
  for (const auto& p : member(j, "positions")) t.positions.push_back(point_from(p));
  t.stopped = field<bool>(j, "stopped");
  t.path_length = field<double>(j, "path_length");
  return t;
}

inline json split_to_json(const std::string& split, const std::vector<std::string>& ids) {
  return {{"v", kSchemaVersion}, {"split", split}, {"episodes", ids}};
}

inline json to_json(const annot::AnnotationRecord& r) {
  json j = {{"v", kSchemaVersion}, {"id", r.id}, {"text", r.instruction_text}, {"landmarks", r.annotated_landmarks},
            {"map", r.map_id}};
  if (r.target) j["target"] = to_json(*r.target);
  if (!r.split.empty()) j["split"] = r.split;
  return j;
}

inline annot::AnnotationRecord annotation_from(const json& j) {
  check_version(j);
  annot::AnnotationRecord r;
  r.id = field<std::string>(j, "id");
  r.instruction_text = field<std::string>(j, "text");
  r.annotated_landmarks = field<std::vector<std::string>>(j, "landmarks");
  r.map_id = field<std::string>(j, "map");
  if (j.contains("target")) r.target = point_from(j["target"]);
  if (j.contains("split")) r.split = field<std::string>(j, "split");
  return r;
}

// ---------------------------------------------------------------------------
// Files

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write " + path);
  out << text;
  if (!out) throw data_error("write failed: " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::string jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

// Calls fn(record, line_number) per nonblank line; parse and schema errors
// are reported as "<path>:<line>: <message>".
inline void read_jsonl(const std::string& path, const std::function<void(const json&, int)>& fn) {
  std::istringstream in(read_text(path));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (!j.is_object()) throw data_error("record is not an object");
      fn(j, n);
    } catch (const json::exception& e) {
      throw data_error(path + ":" + std::to_string(n) + ": malformed record: " + e.what());
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Data) throw;
      throw data_error(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

// Corpus files under a prefix: <prefix>.wjsonl, <prefix>.ejsonl, <prefix>.splits.jsonl.
inline void write_corpus(const data::Corpus& c, const std::string& prefix) {
  std::vector<json> w, e, s;
  for (const auto& x : c.worlds) w.push_back(to_json(x));
  for (const auto& x : c.episodes) e.push_back(to_json(x));
  for (const auto& [name, ids] : c.splits) s.push_back(split_to_json(name, ids));
  write_text(prefix + ".wjsonl", jsonl(w));
  write_text(prefix + ".ejsonl", jsonl(e));
  write_text(prefix + ".splits.jsonl", jsonl(s));
}

inline data::Corpus read_corpus(const std::string& prefix) {
  data::Corpus c;
  read_jsonl(prefix + ".wjsonl", [&](const json& j, int) { c.worlds.push_back(world_from(j)); });
  read_jsonl(prefix + ".ejsonl", [&](const json& j, int) { c.episodes.push_back(episode_from(j)); });
  read_jsonl(prefix + ".splits.jsonl", [&](const json& j, int) {
    check_version(j);
    c.splits[field<std::string>(j, "split")] = field<std::vector<std::string>>(j, "episodes");
  });
  for (const auto& e : c.episodes) c.world_of(e);
  for (const auto& [name, ids] : c.splits) c.split(name);
  return c;
}

}  // namespace hett::io
