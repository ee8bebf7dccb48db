// Generate one world and episode, roll out an untrained HETT policy and the
// expert, print both traces and write SVGs next to the binary.
//
//   navigate_example [seed]

#include <cstdlib>
#include <iostream>

#include "hett/dagger.hpp"
#include "hett/metrics.hpp"
#include "hett/records.hpp"
#include "hett/rollout.hpp"
#include "hett/svg.hpp"

using namespace hett;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 7;
  const world::World w = world::generate_world(seed, {}, "w0");
  const world::Episode ep = world::generate_episode(w, seed, {}, "e0");
  std::cout << "instruction: " << ep.instruction_text() << "\n";
  std::cout << "start (" << ep.start_pose.position.x << ", " << ep.start_pose.position.y << ")  goal (" << ep.goal.x
            << ", " << ep.goal.y << ")\n";

  agent::HettConfig cfg;
  cfg.dim = 16;
  cfg.layers = 1;
  agent::HettModel model(cfg, agent::Vocabulary());
  const sim::SimConfig sim_cfg;

  Rng rng(seed);
  for (double expert : {0.0, 1.0}) {
    const auto tr = agent::rollout(model, w, ep, sim_cfg, expert, &rng);
    const auto m = eval::episode_metrics(train::outcome_of(tr), sim_cfg.success_radius);
    std::cout << (expert > 0 ? "expert" : "policy") << ": steps=" << tr.steps.size() << " NE=" << m.navigation_error
              << " success=" << m.success << "\n";
    for (const auto& s : tr.steps) std::cout << "  " << io::to_json(s).dump() << "\n";
    io::write_text(expert > 0 ? "navigate_expert.svg" : "navigate_policy.svg", cli::render_svg(w, ep, tr));
  }
  return 0;
}
