#pragma once

// The two-stage transformer navigation model.
//
// Token sequences (segment embeddings are added per modality):
//   coarse: [readout_G; E; L; F]          -> g = sigmoid(MLP(G)) in [0,1]^2
//   fine:   [readout_R; readout_A; E; L; F; V; P]
//           -> r = sigmoid(MLP(R)),  (u, v) = MLP(A),  a = atan2(tanh u, tanh v)
// E: instruction embedding, L: landmark-map embedding, F: history grid
// tokens, V: instruction-aware visual embedding, P: pose embedding.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hett/error.hpp"
#include "hett/geom.hpp"
#include "hett/history_grid.hpp"
#include "hett/nn.hpp"
#include "hett/rng.hpp"
#include "hett/simulator.hpp"
#include "hett/tensor.hpp"
#include "hett/world.hpp"

namespace hett::agent {

using nn::Tensor;

enum class TargetHead { Sigmoid, Softmax };

struct HettConfig {
  int dim = 64;
  int layers = 2;
  int heads = 4;
  int ff_mult = 4;
  int landmark_map_size = 32;  // S^L
  int grid_size = 5;           // S^H; 0 removes history tokens
  int max_tokens = 24;
  int obs_channels = sim::kObservationChannels;
  int obs_size = 32;
  int patch = 8;
  std::vector<int> cnn_channels = {8, 16, 32};
  TargetHead target_head = TargetHead::Sigmoid;
  bool share_transformers = false;
  bool two_stage = true;
  double stop_threshold = 0.9;   // theta_stop
  double switch_distance = 30.0;  // delta_switch, meters
  double step_length = 20.0;
  int max_steps = 20;
  std::uint64_t init_seed = 1;

  bool use_history() const { return grid_size > 0; }

  void validate() const {
    if (dim <= 0 || layers <= 0 || heads <= 0 || ff_mult <= 0 || landmark_map_size <= 0 || max_tokens <= 0 ||
        obs_size <= 0 || patch <= 0 || step_length <= 0 || max_steps <= 0 || switch_distance <= 0)
      throw usage_error("HettConfig: all sizes and distances must be positive");
    if (grid_size < 0) throw usage_error("HettConfig: grid_size must be >= 0");
    if (dim % heads != 0) throw usage_error("HettConfig: dim must be divisible by heads");
    if (!(stop_threshold > 0.0 && stop_threshold < 1.0)) throw usage_error("HettConfig: stop_threshold must be in (0,1)");
    if (obs_size % patch != 0) throw usage_error("HettConfig: obs_size must be a multiple of patch");
    if (cnn_channels.empty()) throw usage_error("HettConfig: cnn_channels must be nonempty");
  }
};

// Closed token vocabulary; unknown words map to "<unk>".
class Vocabulary {
 public:
  Vocabulary() : Vocabulary(world::InstructionGrammar{}.vocabulary()) {}
  explicit Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
    for (std::size_t i = 0; i < words_.size(); ++i) index_[words_[i]] = static_cast<int>(i);
  }
  int id(const std::string& w) const {
    auto it = index_.find(w);
    if (it != index_.end()) return it->second;
    auto unk = index_.find("<unk>");
    return unk == index_.end() ? 0 : unk->second;
  }
  std::vector<int> encode(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    for (const auto& t : tokens) ids.push_back(id(t));
    return ids;
  }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> index_;
};

enum Segment { kSegInstruction = 0, kSegLandmark, kSegHistory, kSegVisual, kSegPose, kSegCount };

struct CoarseOutput {
  Tensor readout;  // G_t [1 x D]
  Tensor target;   // g_t [1 x 2]
};

struct FineOutput {
  Tensor progress_readout;  // R_t
  Tensor action_readout;    // A_t
  Tensor progress;          // r_t [1 x 1]
  Tensor action_raw;        // (u, v) [1 x 2]
  Tensor action;            // a_t [1 x 1]
};

// Per-step values of all heads (coarse values absent in single-stage mode).
struct StepOutputs {
  std::optional<CoarseOutput> coarse;
  FineOutput fine;
  Tensor visual;

  geom::Point2 target() const {
    return coarse ? geom::Point2{coarse->target.at(0), coarse->target.at(1)} : geom::Point2{0.5, 0.5};
  }
  double progress() const { return fine.progress.at(0); }
  double action() const { return fine.action.at(0); }
};

class HettModel {
 public:
  HettModel(HettConfig cfg, Vocabulary vocab) : cfg_(std::move(cfg)), vocab_(std::move(vocab)) {
    cfg_.validate();
    Rng rng = Rng::stream(cfg_.init_seed, 0xA11CE);
    const int d = cfg_.dim;
    token_emb_ = ps_.normal("embed.tokens", {static_cast<int>(vocab_.size()), d}, 0.02, rng);
    position_emb_ = ps_.normal("embed.positions", {cfg_.max_tokens, d}, 0.02, rng);
    segment_emb_ = ps_.normal("embed.segments", {kSegCount, d}, 0.02, rng);
    readout_g_ = ps_.normal("readout.target", {1, d}, 0.02, rng);
    readout_r_ = ps_.normal("readout.progress", {1, d}, 0.02, rng);
    readout_a_ = ps_.normal("readout.action", {1, d}, 0.02, rng);

    int in_ch = 3;
    for (std::size_t i = 0; i < cfg_.cnn_channels.size(); ++i) {
      landmark_cnn_.emplace_back(ps_, "landmark.conv" + std::to_string(i), in_ch, cfg_.cnn_channels[i], 3, 2, 1, rng);
      in_ch = cfg_.cnn_channels[i];
    }
    landmark_mlp_ = nn::Mlp(ps_, "landmark.mlp", {in_ch, d, d}, rng);

    patchify_ = nn::Conv2d(ps_, "visual.patchify", cfg_.obs_channels, d, cfg_.patch, cfg_.patch, 0, rng);
    const int patches = (cfg_.obs_size / cfg_.patch) * (cfg_.obs_size / cfg_.patch);
    patch_pos_ = ps_.normal("visual.patch_positions", {patches, d}, 0.02, rng);
    visual_query_ = ps_.normal("visual.query", {1, d}, 0.02, rng);
    visual_ln_ = nn::LayerNorm(ps_, "visual.ln_kv", d);
    visual_attn_ = nn::MultiHeadAttention(ps_, "visual.attn", d, cfg_.heads, rng);
    visual_out_ln_ = nn::LayerNorm(ps_, "visual.ln_out", d);
    visual_mlp_ = nn::Mlp(ps_, "visual.mlp", {d, cfg_.ff_mult * d, d}, rng);

    pose_mlp_ = nn::Mlp(ps_, "pose.mlp", {4, d, d}, rng);

    if (cfg_.use_history()) {
      empty_cell_ = ps_.normal("history.empty", {d}, 0.02, rng);
      cell_pos_ = ps_.normal("history.cell_positions", {cfg_.grid_size * cfg_.grid_size, d}, 0.02, rng);
    }

    coarse_tf_ = nn::TransformerEncoder(ps_, "coarse", d, cfg_.layers, cfg_.heads, cfg_.ff_mult, rng);
    if (!cfg_.share_transformers) fine_tf_ = nn::TransformerEncoder(ps_, "fine", d, cfg_.layers, cfg_.heads, cfg_.ff_mult, rng);
    target_head_ = nn::Mlp(ps_, "head.target", {d, d, 2}, rng);
    progress_head_ = nn::Mlp(ps_, "head.progress", {d, d, 1}, rng);
    action_head_ = nn::Mlp(ps_, "head.action", {d, d, 2}, rng);
  }

  HettModel(const HettModel&) = delete;
  HettModel& operator=(const HettModel&) = delete;
  HettModel(HettModel&&) = default;
  HettModel& operator=(HettModel&&) = default;

  const HettConfig& config() const { return cfg_; }
  // Policy-only setting; parameters are unaffected.
  void set_stop_threshold(double t) {
    HettConfig c = cfg_;
    c.stop_threshold = t;
    c.validate();
    cfg_ = c;
  }
  HettConfig& mutable_config() { return cfg_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }

  // E [N x D]: token + position embeddings. Long instructions are truncated.
  Tensor embed_instruction(const std::vector<std::string>& tokens) const {
    if (tokens.empty()) throw invariant_error("embed_instruction: empty instruction");
    std::vector<int> ids = vocab_.encode(tokens);
    if (ids.size() > static_cast<std::size_t>(cfg_.max_tokens)) ids.resize(static_cast<std::size_t>(cfg_.max_tokens));
    const int n = static_cast<int>(ids.size());
    return nn::add(nn::gather_rows(token_emb_, ids), nn::slice_rows(position_emb_, 0, n));
  }

  // CNN input channels (m, m*u, m*v) with (u, v) the normalized cell center.
  static std::vector<double> landmark_channels(const geom::LandmarkMap& map) {
    const std::size_t s = static_cast<std::size_t>(map.size);
    std::vector<double> x(3 * s * s);
    for (std::size_t r = 0; r < s; ++r) {
      for (std::size_t c = 0; c < s; ++c) {
        const double m = map.cells[r * s + c];
        x[r * s + c] = m;
        x[s * s + r * s + c] = m * (static_cast<double>(c) + 0.5) / static_cast<double>(s);
        x[2 * s * s + r * s + c] = m * (static_cast<double>(r) + 0.5) / static_cast<double>(s);
      }
    }
    return x;
  }

  // L [1 x D] = MLP(CNN(M^L)).
  Tensor encode_landmarks(const geom::LandmarkMap& map) const {
    if (map.size != cfg_.landmark_map_size)
      throw invariant_error("encode_landmarks: map is " + std::to_string(map.size) + ", expected " +
                            std::to_string(cfg_.landmark_map_size));
    Tensor x = Tensor::from({3, map.size, map.size}, landmark_channels(map));
    for (const auto& conv : landmark_cnn_) x = nn::gelu(conv(x));
    const Tensor weights = Tensor::from({1, x.dim(1) * x.dim(2)}, occupancy_weights(map, x.dim(1), x.dim(2)));
    return landmark_mlp_(nn::matmul(weights, nn::spatial_tokens(x)));
  }

  // Pooling weights over the final h x w feature grid: the share of occupied
  // map cells falling in each output cell. All zero for an empty map.
  static std::vector<double> occupancy_weights(const geom::LandmarkMap& map, int h, int w) {
    std::vector<double> occ(static_cast<std::size_t>(h) * w, 0.0);
    double total = 0.0;
    for (int r = 0; r < map.size; ++r) {
      for (int c = 0; c < map.size; ++c) {
        const double m = map.at(r, c);
        occ[static_cast<std::size_t>(r * h / map.size) * w + c * w / map.size] += m;
        total += m;
      }
    }
    if (total > 0.0)
      for (double& v : occ) v /= total;
    return occ;
  }

  // V [1 x D]: a learned query attends over [E; patch tokens].
  Tensor encode_visual(const Tensor& instruction, const sim::ObservationRaster& obs) const {
    if (obs.channels != cfg_.obs_channels || obs.height != cfg_.obs_size || obs.width != cfg_.obs_size)
      throw invariant_error("encode_visual: observation shape mismatch");
    const Tensor raster = Tensor::from({obs.channels, obs.height, obs.width}, obs.values);
    const Tensor patches = nn::add(nn::spatial_tokens(patchify_(raster)), patch_pos_);
    const Tensor kv = visual_ln_(nn::concat_rows({instruction, patches}));
    const Tensor pooled = nn::add(visual_query_, visual_attn_(visual_query_, kv));
    return nn::add(pooled, visual_mlp_(visual_out_ln_(pooled)));
  }

  // P [1 x D] from (x/W, y/H, sin yaw, cos yaw).
  Tensor encode_pose(const world::Pose& pose, const geom::Rect& bounds) const {
    const geom::Point2 u = bounds.normalize(pose.position);
    return pose_mlp_(Tensor::from({1, 4}, {u.x, u.y, std::sin(pose.yaw), std::cos(pose.yaw)}));
  }

  // Grid tokens with cell-position embeddings; empty tensor when history is off.
  std::optional<Tensor> history_tokens(const grid::HistoryGridMap& map, const Tensor& instruction,
                                       grid::GridTokens* raw = nullptr) const {
    if (!cfg_.use_history()) return std::nullopt;
    grid::GridTokens g = grid::aggregate(map, instruction, empty_cell_);
    Tensor tokens = nn::add(g.tokens, cell_pos_);
    if (raw) *raw = std::move(g);
    return tokens;
  }

  CoarseOutput coarse_forward(const Tensor& instruction, const Tensor& landmark,
                              const std::optional<Tensor>& history) const {
    std::vector<Tensor> seq = {readout_g_, segment(instruction, kSegInstruction), segment(landmark, kSegLandmark)};
    if (history) seq.push_back(segment(*history, kSegHistory));
    const Tensor out = coarse_tf_(nn::concat_rows(seq));
    CoarseOutput c;
    c.readout = nn::slice_rows(out, 0, 1);
    const Tensor logits = target_head_(c.readout);
    c.target = cfg_.target_head == TargetHead::Sigmoid ? nn::sigmoid(logits) : nn::softmax(logits, 1);
    return c;
  }

  FineOutput fine_forward(const Tensor& instruction, const Tensor& landmark, const std::optional<Tensor>& history,
                          const Tensor& visual, const Tensor& pose) const {
    std::vector<Tensor> seq = {readout_r_, readout_a_, segment(instruction, kSegInstruction),
                               segment(landmark, kSegLandmark)};
    if (history) seq.push_back(segment(*history, kSegHistory));
    seq.push_back(segment(visual, kSegVisual));
    seq.push_back(segment(pose, kSegPose));
    const auto& tf = cfg_.share_transformers ? coarse_tf_ : fine_tf_;
    const Tensor out = tf(nn::concat_rows(seq));
    FineOutput f;
    f.progress_readout = nn::slice_rows(out, 0, 1);
    f.action_readout = nn::slice_rows(out, 1, 1);
    f.progress = nn::sigmoid(progress_head_(f.progress_readout));
    f.action_raw = action_head_(f.action_readout);
    const Tensor squashed = nn::tanh(f.action_raw);
    f.action = action_angle(squashed);
    return f;
  }

  // a = atan2(tanh u, tanh v) for squashed (u, v) in a [1 x 2] row.
  static Tensor action_angle(const Tensor& squashed) {
    const Tensor t = nn::transpose(squashed);  // [2 x 1]
    return nn::atan2(nn::slice_rows(t, 0, 1), nn::slice_rows(t, 1, 1));
  }

  // One policy step: encode the view, record it in the history map, then
  // run the heads. Coarse heads are skipped in single-stage mode.
  StepOutputs step(const Tensor& instruction, const Tensor& landmark, grid::HistoryGridMap* history,
                   const sim::ObservationRaster& obs, const world::Pose& pose, const geom::Rect& bounds,
                   int step_index, bool need_coarse = true) const {
    StepOutputs s;
    s.visual = encode_visual(instruction, obs);
    std::optional<Tensor> hist;
    if (cfg_.use_history()) {
      if (!history) throw invariant_error("HettModel::step: history map required when grid_size > 0");
      history->insert(s.visual, pose.position, step_index);
      hist = history_tokens(*history, instruction);
    }
    if (cfg_.two_stage && need_coarse) s.coarse = coarse_forward(instruction, landmark, hist);
    s.fine = fine_forward(instruction, landmark, hist, s.visual, encode_pose(pose, bounds));
    return s;
  }

  grid::HistoryGridMap make_history(const geom::Rect& bounds) const {
    return grid::HistoryGridMap(bounds, std::max(cfg_.grid_size, 1), cfg_.dim);
  }

 private:
  Tensor segment(const Tensor& tokens, Segment seg) const {
    const Tensor rows = nn::as_row(tokens);
    return nn::add_row(rows, nn::slice_rows(segment_emb_, seg, 1));
  }

  HettConfig cfg_;
  Vocabulary vocab_;
  nn::ParamStore ps_;

  Tensor token_emb_, position_emb_, segment_emb_;
  Tensor readout_g_, readout_r_, readout_a_;
  std::vector<nn::Conv2d> landmark_cnn_;
  nn::Mlp landmark_mlp_;
  nn::Conv2d patchify_;
  Tensor patch_pos_, visual_query_;
  nn::LayerNorm visual_ln_;
  nn::MultiHeadAttention visual_attn_;
  nn::LayerNorm visual_out_ln_;
  nn::Mlp visual_mlp_;
  nn::Mlp pose_mlp_;
  Tensor empty_cell_, cell_pos_;
  nn::TransformerEncoder coarse_tf_, fine_tf_;
  nn::Mlp target_head_, progress_head_, action_head_;
};

}  // namespace hett::agent
