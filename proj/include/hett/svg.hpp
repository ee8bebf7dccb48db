#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "hett/geom.hpp"
#include "hett/trajectory.hpp"
#include "hett/world.hpp"

namespace hett::cli {

struct SvgStyle {
  double scale = 1.5;  // pixels per meter
  const char* coarse_color = "#d9480f";
  const char* fine_color = "#1971c2";
  const char* expert_color = "#2b8a3e";
};

namespace detail {
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}
}  // namespace detail

// World outline, landmark polygons (referenced ones filled), the expert path,
// the agent path with one <path> per stage present, and one g_t marker per step.
inline std::string render_svg(const world::World& w, const world::Episode& ep, const agent::TrajectoryRecord& tr,
                              const SvgStyle& style = {}) {
  const geom::Rect& b = w.bounds;
  const double s = style.scale;
  auto px = [&](geom::Point2 p) { return detail::num((p.x - b.min.x) * s) + "," + detail::num((b.max.y - p.y) * s); };
  const std::string width = detail::num(b.width() * s), height = detail::num(b.height() * s);

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + width + "\" height=\"" + height + "\" viewBox=\"0 0 " +
         width + " " + height + "\">\n";
  out += "<title>" + ep.id + ": " + ep.instruction_text() + "</title>\n";
  out += "<rect class=\"world\" x=\"0\" y=\"0\" width=\"" + width + "\" height=\"" + height +
         "\" fill=\"#f8f9fa\" stroke=\"#495057\" stroke-width=\"1\"/>\n";

  for (const auto& lm : w.landmarks) {
    bool referenced = false;
    for (const auto& id : ep.referenced_landmarks) referenced = referenced || id == lm.id;
    std::string pts;
    for (const auto& v : lm.shape.vertices) pts += (pts.empty() ? "" : " ") + px(v);
    out += "<polygon class=\"landmark\" points=\"" + pts + "\" fill=\"" + (referenced ? "#ffd43b" : "#dee2e6") +
           "\" stroke=\"#868e96\" stroke-width=\"1\"><title>" + lm.display_name() + "</title></polygon>\n";
  }
  for (const auto& o : w.objects) {
    out += "<circle class=\"object\" cx=\"" + detail::num((o.position.x - b.min.x) * s) + "\" cy=\"" +
           detail::num((b.max.y - o.position.y) * s) + "\" r=\"2\" fill=\"#adb5bd\"/>\n";
  }

  if (ep.expert_path.size() >= 2) {
    std::string d;
    for (std::size_t i = 0; i < ep.expert_path.size(); ++i) d += (i ? " L " : "M ") + px(ep.expert_path[i]);
    out += "<path class=\"expert\" d=\"" + d + "\" fill=\"none\" stroke=\"" + style.expert_color +
           "\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/>\n";
  }

  // Step t moves positions[t] -> positions[t + 1] under steps[t].stage.
  for (agent::Stage stage : {agent::Stage::Coarse, agent::Stage::Fine}) {
    std::string d;
    for (std::size_t t = 0; t < tr.steps.size() && t + 1 < tr.positions.size(); ++t) {
      if (tr.steps[t].stage != stage) continue;
      if (d.empty()) d = "M " + px(tr.positions[t]);
      d += " L " + px(tr.positions[t + 1]);
    }
    if (d.empty()) continue;
    out += std::string("<path class=\"agent ") + agent::stage_name(stage) + "\" d=\"" + d + "\" fill=\"none\" stroke=\"" +
           (stage == agent::Stage::Coarse ? style.coarse_color : style.fine_color) + "\" stroke-width=\"2\"/>\n";
  }

  for (const auto& st : tr.steps) {
    const geom::Point2 g = b.denormalize(st.target);
    out += "<circle class=\"g-marker\" cx=\"" + detail::num((g.x - b.min.x) * s) + "\" cy=\"" +
           detail::num((b.max.y - g.y) * s) + "\" r=\"3\" fill=\"none\" stroke=\"#862e9c\" stroke-width=\"1\"><title>g_" +
           std::to_string(st.step) + "</title></circle>\n";
  }
  if (!tr.positions.empty()) {
    const geom::Point2 p0 = tr.positions.front();
    out += "<circle class=\"start\" cx=\"" + detail::num((p0.x - b.min.x) * s) + "\" cy=\"" +
           detail::num((b.max.y - p0.y) * s) + "\" r=\"4\" fill=\"#212529\"/>\n";
  }
  out += "<circle class=\"goal\" cx=\"" + detail::num((ep.goal.x - b.min.x) * s) + "\" cy=\"" +
         detail::num((b.max.y - ep.goal.y) * s) + "\" r=\"" + detail::num(20.0 * s) +
         "\" fill=\"none\" stroke=\"" + style.expert_color + "\" stroke-width=\"1.5\"/>\n";
  out += "</svg>\n";
  return out;
}

}  // namespace hett::cli
