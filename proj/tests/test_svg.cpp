#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "hett/rollout.hpp"
#include "hett/svg.hpp"

using namespace hett;

namespace {

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Svg, OnePathPerStageAndOneMarkerPerStep) {
  const auto c = fixture::small_corpus();
  agent::HettModel model(fixture::small_model(), agent::Vocabulary());
  for (const auto* ep : c.split("train")) {
    const auto& w = c.world_of(*ep);
    const auto tr = agent::rollout(model, w, *ep, fixture::small_sim());
    const std::string svg = cli::render_svg(w, *ep, tr);
    bool coarse = false, fine = false;
    for (std::size_t t = 0; t < tr.steps.size() && t + 1 < tr.positions.size(); ++t)
      (tr.steps[t].stage == agent::Stage::Coarse ? coarse : fine) = true;
    EXPECT_EQ(count(svg, "class=\"agent coarse\""), coarse ? 1u : 0u);
    EXPECT_EQ(count(svg, "class=\"agent fine\""), fine ? 1u : 0u);
    EXPECT_EQ(count(svg, "class=\"g-marker\""), tr.steps.size());
    EXPECT_EQ(count(svg, "class=\"landmark\""), w.landmarks.size());
    EXPECT_EQ(svg, cli::render_svg(w, *ep, tr));
  }
}

TEST(Svg, HandBuiltTrajectory) {
  const auto c = fixture::small_corpus();
  const auto* ep = c.split("train").front();
  const auto& w = c.world_of(*ep);
  agent::TrajectoryRecord tr;
  tr.positions = {{10, 10}, {30, 10}, {50, 10}};
  for (int t = 0; t < 3; ++t) {
    agent::StepRecord s;
    s.step = t;
    s.stage = t == 0 ? agent::Stage::Coarse : agent::Stage::Fine;
    s.target = {0.5, 0.5};
    s.action = t == 2 ? sim::Action::stop() : sim::Action::move(0.0);
    tr.steps.push_back(s);
  }
  const std::string svg = cli::render_svg(w, *ep, tr);
  EXPECT_EQ(count(svg, "class=\"agent coarse\""), 1u);
  EXPECT_EQ(count(svg, "class=\"agent fine\""), 1u);
  EXPECT_EQ(count(svg, "class=\"g-marker\""), 3u);
  EXPECT_EQ(count(svg, "<svg"), 1u);
  EXPECT_EQ(count(svg, "</svg>"), 1u);
}
