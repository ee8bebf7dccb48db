#pragma once

// Training state <-> checkpoint files. A checkpoint holds the latest
// parameters, the best-validation parameters, the optimizer moments, and the
// aggregate dataset (in <path>.dataset.jsonl), which is enough to resume.

#include <charconv>
#include <string>
#include <system_error>
#include <vector>

#include "hett/checkpoint.hpp"
#include "hett/config.hpp"
#include "hett/dagger.hpp"
#include "hett/model.hpp"
#include "hett/records.hpp"

namespace hett::cli {

inline std::string exact(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_exact(const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw data_error("checkpoint: bad number " + s);
  return v;
}

inline long long parse_integer(const std::string& s) {
  long long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw data_error("checkpoint: bad integer " + s);
  return v;
}

// Config keys that change the parameter set or the policy; checked on load.
inline const std::vector<std::string>& model_keys() {
  static const std::vector<std::string> keys = {"dim", "layers", "heads", "ff_mult", "landmark_map_size", "grid_size",
                                                "patch", "obs_size", "target_head", "share_transformers", "two_stage"};
  return keys;
}

inline std::string dataset_path(const std::string& checkpoint) { return checkpoint + ".dataset.jsonl"; }

inline void save_training(const std::string& path, const RunConfig& cfg, const agent::HettModel& model,
                          nn::AdamW& opt, const train::TrainState& state) {
  nn::Checkpoint ck;
  for (const auto& k : model_keys()) ck.meta["model." + k] = cfg.str(k);
  ck.meta["epoch"] = std::to_string(state.epoch);
  ck.meta["optimizer_steps"] = std::to_string(opt.steps());
  ck.meta["best_epoch"] = std::to_string(state.best_epoch);
  ck.meta["best_sr"] = exact(state.best_sr);
  ck.meta["best_ne"] = exact(state.best_ne);
  const auto& params = model.params().params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    ck.blobs.push_back({"param/" + p.name, p.tensor.shape(), {p.tensor.data().begin(), p.tensor.data().end()}});
  }
  if (!state.best_params.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i)
      ck.blobs.push_back({"best/" + params[i].name, params[i].tensor.shape(), state.best_params[i]});
  }
  if (!opt.first_moments().empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      ck.blobs.push_back({"adam_m/" + params[i].name, params[i].tensor.shape(), opt.first_moments()[i]});
      ck.blobs.push_back({"adam_v/" + params[i].name, params[i].tensor.shape(), opt.second_moments()[i]});
    }
  }
  std::vector<double> losses;
  for (const auto& e : state.log) losses.push_back(e.loss.total);
  ck.blobs.push_back({"log/loss", {static_cast<int>(losses.size())}, losses});
  nn::save_checkpoint(ck, path);

  std::vector<io::json> rows;
  for (const auto& t : state.dataset) rows.push_back(io::to_json(t));
  io::write_text(dataset_path(path), io::jsonl(rows));
}

inline void check_model_meta(const nn::Checkpoint& ck, const RunConfig& cfg, const std::string& path) {
  for (const auto& k : model_keys()) {
    const std::string& saved = ck.meta_value("model." + k);
    if (saved != cfg.str(k))
      throw data_error(path + ": checkpoint was trained with " + k + " = " + saved + ", config has " + cfg.str(k));
  }
}

inline void copy_blob(const nn::Blob& b, nn::Parameter& p) {
  if (b.shape != p.tensor.shape()) throw data_error("checkpoint blob " + b.name + " has shape " + nn::shape_str(b.shape));
  std::copy(b.values.begin(), b.values.end(), p.tensor.mutable_data().begin());
}

// Parameters for inference: the best-validation set when present.
inline void load_for_inference(const std::string& path, const RunConfig& cfg, agent::HettModel& model) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  check_model_meta(ck, cfg, path);
  for (auto& p : model.params().params()) {
    const nn::Blob* b = ck.find("best/" + p.name);
    copy_blob(b ? *b : ck.require("param/" + p.name), p);
  }
}

inline void load_training(const std::string& path, const RunConfig& cfg, agent::HettModel& model, nn::AdamW& opt,
                          train::TrainState& state) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  check_model_meta(ck, cfg, path);
  auto& params = model.params().params();
  for (auto& p : params) copy_blob(ck.require("param/" + p.name), p);
  state = {};
  state.epoch = static_cast<int>(parse_integer(ck.meta_value("epoch")));
  state.best_epoch = static_cast<int>(parse_integer(ck.meta_value("best_epoch")));
  state.best_sr = parse_exact(ck.meta_value("best_sr"));
  state.best_ne = parse_exact(ck.meta_value("best_ne"));
  if (ck.find("best/" + params.front().name)) {
    for (const auto& p : params) state.best_params.push_back(ck.require("best/" + p.name).values);
  }
  opt.first_moments().clear();
  opt.second_moments().clear();
  if (ck.find("adam_m/" + params.front().name)) {
    for (const auto& p : params) {
      opt.first_moments().push_back(ck.require("adam_m/" + p.name).values);
      opt.second_moments().push_back(ck.require("adam_v/" + p.name).values);
    }
  }
  opt.set_steps(parse_integer(ck.meta_value("optimizer_steps")));
  for (double loss : ck.require("log/loss").values) {
    train::EpochLog e;
    e.epoch = static_cast<int>(state.log.size()) + 1;
    e.loss.total = loss;
    state.log.push_back(e);
  }
  io::read_jsonl(dataset_path(path), [&](const io::json& j, int) { state.dataset.push_back(io::trajectory_from(j)); });
}

}  // namespace hett::cli
