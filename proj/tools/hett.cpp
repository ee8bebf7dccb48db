// hett: command-line entry point.
//
//   hett gen-world         generate worlds, episodes and the split manifest
//   hett train             DAgger training, writes checkpoint + log
//   hett eval              metrics table for one split
//   hett rollout           one episode: per-step trace + SVG
//   hett lint-annotations  annotation lint report and refined records

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hett/annotator.hpp"
#include "hett/config.hpp"
#include "hett/corpus.hpp"
#include "hett/dagger.hpp"
#include "hett/error.hpp"
#include "hett/metrics.hpp"
#include "hett/model.hpp"
#include "hett/records.hpp"
#include "hett/rollout.hpp"
#include "hett/run.hpp"
#include "hett/svg.hpp"

namespace {

using namespace hett;

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;

  cli::RunConfig load() const {
    cli::RunConfig c = config_file.empty() ? cli::RunConfig() : cli::RunConfig::from_file(config_file);
    for (const auto& kv : sets) c.set_assignment(kv);
    if (seed) c.set("seed", std::to_string(*seed));
    return c;
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_file, "flat key = value config file");
  cmd->add_option("--set", c.sets, "override one config key (key=value), repeatable");
  cmd->add_option("--seed", c.seed, "override the seed key");
}

void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(parent, ec);
  if (ec) throw data_error("cannot create directory " + parent.string());
}

std::vector<agent::EpisodeRef> refs(const data::Corpus& c, const std::string& split) {
  std::vector<agent::EpisodeRef> out;
  for (const auto* e : c.split(split)) out.push_back({&c.world_of(*e), e});
  return out;
}

std::vector<std::string> dictionary_of(const data::Corpus& c) {
  std::set<std::string> names;
  for (const auto& w : c.worlds)
    for (const auto& l : w.landmarks) names.insert(l.display_name());
  return {names.begin(), names.end()};
}

int gen_world(const cli::RunConfig& cfg, const std::string& out, bool annotations) {
  const data::Corpus c = data::generate_corpus(cli::corpus_config(cfg));
  const std::string prefix = out.empty() ? cfg.str("data") : out;
  ensure_parent(prefix);
  io::write_corpus(c, prefix);
  std::cout << "wrote " << c.worlds.size() << " worlds, " << c.episodes.size() << " episodes to " << prefix << ".*\n";
  for (const auto& [name, ids] : c.splits) std::cout << "  " << name << ": " << ids.size() << " episodes\n";
  if (annotations) {
    std::vector<io::json> rows;
    for (const auto& [name, ids] : c.splits)
      for (const auto& id : ids) {
        const auto& ep = c.episode(id);
        rows.push_back(io::to_json(annot::clean_record(c.world_of(ep), ep, name)));
      }
    io::write_text(prefix + ".annotations.jsonl", io::jsonl(rows));
    std::string dict;
    for (const auto& n : dictionary_of(c)) dict += n + "\n";
    io::write_text(prefix + ".dictionary.txt", dict);
    std::cout << "wrote " << rows.size() << " annotation records to " << prefix << ".annotations.jsonl\n";
  }
  return 0;
}

int train_cmd(const cli::RunConfig& cfg, bool resume) {
  const data::Corpus c = io::read_corpus(cfg.str("data"));
  const auto train = refs(c, "train");
  const auto val = refs(c, cfg.str("val_split"));
  const sim::SimConfig sim_cfg = cli::sim_config(cfg);
  const train::DaggerConfig dcfg = cli::dagger_config(cfg);
  agent::HettModel model(cli::model_config(cfg), agent::Vocabulary());
  nn::AdamW opt(dcfg.optimizer);
  train::TrainState state;
  const std::string ckpt = cfg.str("checkpoint");
  const std::string log_path = cfg.str("log");
  ensure_parent(ckpt);
  ensure_parent(log_path);
  if (resume) {
    cli::load_training(ckpt, cfg, model, opt, state);
    std::cout << "resumed from " << ckpt << " after epoch " << state.epoch << "\n";
  }
  std::ofstream log(log_path, resume ? std::ios::app : std::ios::trunc);
  if (!log) throw data_error("cannot write log " + log_path);
  std::cout << "model parameters: " << model.params().total_size() << "\n";
  train::dagger_train(model, opt, state, train, val, sim_cfg, dcfg, [&](const train::EpochLog& e, const train::TrainState& s) {
    log << e.line() << '\n';
    log.flush();
    std::cout << e.line() << std::endl;
    cli::save_training(ckpt, cfg, model, opt, s);
  });
  if (state.epoch == 0 || dcfg.epochs == 0) cli::save_training(ckpt, cfg, model, opt, state);
  std::cout << "best epoch " << state.best_epoch << " (" << cfg.str("val_split") << " SR " << state.best_sr
            << ", NE " << state.best_ne << "); checkpoint " << ckpt << "\n";
  return 0;
}

int eval_cmd(const cli::RunConfig& cfg, const std::string& split, const std::string& per_episode) {
  const data::Corpus c = io::read_corpus(cfg.str("data"));
  const auto episodes = refs(c, split);
  agent::HettModel model(cli::model_config(cfg), agent::Vocabulary());
  cli::load_for_inference(cfg.str("checkpoint"), cfg, model);
  const eval::MetricsReport r = train::evaluate(model, episodes, cli::sim_config(cfg), cfg.integer("workers"));
  eval::print_table(std::cout, {{split, r}});
  const std::string out = cfg.str("metrics_out");
  ensure_parent(out);
  io::write_text(out, r.csv());
  if (!per_episode.empty()) {
    ensure_parent(per_episode);
    io::write_text(per_episode, r.per_episode_csv());
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}

int rollout_cmd(const cli::RunConfig& cfg, const std::string& episode_id, const std::string& svg,
                const std::string& trace) {
  const data::Corpus c = io::read_corpus(cfg.str("data"));
  const world::Episode& ep = c.episode(episode_id);
  const world::World& w = c.world_of(ep);
  agent::HettModel model(cli::model_config(cfg), agent::Vocabulary());
  cli::load_for_inference(cfg.str("checkpoint"), cfg, model);
  const sim::SimConfig sim_cfg = cli::sim_config(cfg);
  const agent::TrajectoryRecord tr = agent::rollout(model, w, ep, sim_cfg);
  std::string lines;
  for (const auto& s : tr.steps) lines += io::to_json(s).dump() + "\n";
  if (trace.empty()) {
    std::cout << lines;
  } else {
    ensure_parent(trace);
    io::write_text(trace, lines);
  }
  const auto m = eval::episode_metrics(train::outcome_of(tr), sim_cfg.success_radius);
  std::cerr << ep.id << ": \"" << ep.instruction_text() << "\" steps=" << tr.steps.size() << " NE=" << m.navigation_error
            << " success=" << m.success << "\n";
  if (!svg.empty()) {
    ensure_parent(svg);
    io::write_text(svg, cli::render_svg(w, ep, tr));
  }
  return 0;
}

int lint_cmd(const std::string& input, const std::string& dictionary, const std::string& out, const std::string& report) {
  std::vector<annot::AnnotationRecord> records;
  std::set<std::string> ids;
  io::read_jsonl(input, [&](const io::json& j, int) {
    records.push_back(io::annotation_from(j));
    if (!ids.insert(records.back().id).second) throw data_error("duplicate record id " + records.back().id);
  });
  std::vector<std::string> dict;
  {
    std::istringstream in(io::read_text(dictionary));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) dict.push_back(line);
    }
  }
  if (dict.empty()) throw usage_error("dictionary " + dictionary + " is empty");
  auto [refined, rep] = annot::refine(records, dict);
  std::cout << rep.table();
  for (const auto& f : rep.findings) {
    std::cout << f.record_id << ' ' << annot::class_name(f.cls);
    for (const auto& e : f.evidence) std::cout << " [" << e.span << " ~ " << e.name << " d=" << e.distance << ']';
    std::cout << '\n';
  }
  if (!report.empty()) io::write_text(report, rep.table());
  if (!out.empty()) {
    std::vector<io::json> rows;
    for (const auto& r : refined) rows.push_back(io::to_json(r));
    io::write_text(out, io::jsonl(rows));
  }
  const bool blocking = rep.count(annot::FindingClass::Major) > 0 || rep.count(annot::FindingClass::Deletion) > 0;
  return blocking ? static_cast<int>(ErrorKind::Data) : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HETT aerial navigation: data generation, training, evaluation, rollouts, annotation lint"};
  app.footer(cli::RunConfig::help());
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, roll_c;
  std::string gen_out, split = "val_seen", per_episode, episode_id, svg, trace;
  std::string lint_in, lint_dict, lint_out, lint_report;
  bool annotations = false, resume = false;

  auto* gen = app.add_subcommand("gen-world", "generate worlds, episodes and splits");
  add_common(gen, gen_c);
  gen->add_option("-o,--out", gen_out, "output prefix (default: the data key)");
  gen->add_flag("--annotations", annotations, "also write annotation records and a landmark dictionary");

  auto* tr = app.add_subcommand("train", "DAgger training");
  add_common(tr, train_c);
  tr->add_flag("--resume", resume, "continue from the checkpoint");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  add_common(ev, eval_c);
  ev->add_option("--split", split, "train | val_seen | val_unseen");
  ev->add_option("--per-episode", per_episode, "also write per-episode rows to this CSV");

  auto* ro = app.add_subcommand("rollout", "roll out one episode");
  add_common(ro, roll_c);
  ro->add_option("--episode", episode_id, "episode id")->required();
  ro->add_option("--svg", svg, "SVG output path");
  ro->add_option("--trace", trace, "per-step trace (JSON lines; default stdout)");

  auto* li = app.add_subcommand("lint-annotations", "lint and refine landmark annotations");
  li->add_option("-i,--input", lint_in, "annotation records (JSON lines)")->required();
  li->add_option("-d,--dictionary", lint_dict, "landmark names, one per line")->required();
  li->add_option("-o,--out", lint_out, "write refined records here");
  li->add_option("--report", lint_report, "write the count table here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::Usage);
  }

  try {
    if (gen->parsed()) return gen_world(gen_c.load(), gen_out, annotations);
    if (tr->parsed()) return train_cmd(train_c.load(), resume);
    if (ev->parsed()) return eval_cmd(eval_c.load(), split, per_episode);
    if (ro->parsed()) return rollout_cmd(roll_c.load(), episode_id, svg, trace);
    if (li->parsed()) return lint_cmd(lint_in, lint_dict, lint_out, lint_report);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::Invariant);
  }
  return static_cast<int>(ErrorKind::Usage);
}
