// hett_bench: seeded ablation and grid-size benchmark.
//
//   hett_bench --suite ablation --workers 4
//   hett_bench --suite grid --seeds 0 --epochs 6 --csv runs.csv

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "hett/bench.hpp"

using namespace hett;

int main(int argc, char** argv) {
  CLI::App app{"HETT desk-scale benchmark"};
  bench::BenchConfig cfg;
  std::string suite = "ablation", csv, only;
  app.add_option("--suite", suite, "ablation | grid | all")->check(CLI::IsMember({"ablation", "grid", "all"}));
  app.add_option("--variant", only, "run a single named variant");
  app.add_option("--seeds", cfg.seeds, "corpus/model/DAgger seeds");
  app.add_option("--workers", cfg.workers, "concurrent runs");
  app.add_option("--epochs", cfg.dagger.epochs, "DAgger epochs");
  app.add_option("--samples", cfg.dagger.max_samples_per_epoch, "trajectories per epoch (0 = all)");
  app.add_option("--lr", cfg.dagger.optimizer.lr, "AdamW learning rate");
  app.add_option("--dim", cfg.model.dim, "model width");
  app.add_option("--layers", cfg.model.layers, "transformer layers");
  app.add_option("--train", cfg.corpus.train_episodes, "train episodes");
  app.add_option("--val", cfg.corpus.val_seen_episodes, "val_seen and val_unseen episodes");
  app.add_option("--thresholds", cfg.stop_thresholds, "stop thresholds tried on training episodes");
  app.add_option("--csv", csv, "per-run results");
  CLI11_PARSE(app, argc, argv);
  cfg.corpus.val_unseen_episodes = cfg.corpus.val_seen_episodes;

  std::vector<bench::Variant> variants;
  if (suite != "grid") variants = bench::ablation_variants();
  if (suite != "ablation")
    for (const auto& v : bench::grid_variants()) variants.push_back(v);
  if (!only.empty()) {
    std::erase_if(variants, [&](const bench::Variant& v) { return v.name != only; });
    if (variants.empty()) {
      std::cerr << "unknown variant " << only << "\n";
      return 1;
    }
  }

  try {
    const auto results = bench::run_all(variants, cfg);
    std::cout << bench::table(results, variants);
    if (!csv.empty()) {
      std::ofstream out(csv);
      out << "variant,seed,stop_threshold,best_epoch,seen_NE,seen_SR,seen_OSR,seen_SPL,unseen_NE,unseen_SR,unseen_OSR,"
             "unseen_SPL,seconds\n";
      for (const auto& r : results)
        out << r.variant << ',' << r.seed << ',' << r.stop_threshold << ',' << r.best_epoch << ',' << r.val_seen.ne << ','
            << r.val_seen.sr << ',' << r.val_seen.osr << ',' << r.val_seen.spl << ',' << r.val_unseen.ne << ','
            << r.val_unseen.sr << ',' << r.val_unseen.osr << ',' << r.val_unseen.spl << ',' << r.seconds << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  }
  return 0;
}
