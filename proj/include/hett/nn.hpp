#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hett/error.hpp"
#include "hett/rng.hpp"
#include "hett/tensor.hpp"

namespace hett::nn {

struct Parameter {
  std::string name;
  Tensor tensor;
};

// Owns every trainable tensor of a model, in creation order.
class ParamStore {
 public:
  Tensor create(const std::string& name, Shape shape, std::vector<double> values) {
    if (index_.count(name)) throw invariant_error("duplicate parameter name: " + name);
    index_[name] = params_.size();
    params_.push_back({name, Tensor::from(std::move(shape), std::move(values), true)});
    return params_.back().tensor;
  }

  Tensor xavier(const std::string& name, Shape shape, int fan_in, int fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> v(numel(shape));
    for (double& x : v) x = rng.uniform(-a, a);
    return create(name, std::move(shape), std::move(v));
  }

  Tensor normal(const std::string& name, Shape shape, double stddev, Rng& rng) {
    std::vector<double> v(numel(shape));
    for (double& x : v) x = rng.normal(0.0, stddev);
    return create(name, std::move(shape), std::move(v));
  }

  Tensor constant(const std::string& name, Shape shape, double value) {
    const auto count = numel(shape);
    return create(name, std::move(shape), std::vector<double>(count, value));
  }

  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  const Parameter* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, int in, int out, Rng& rng) {
    weight_ = ps.xavier(name + ".weight", {in, out}, in, out, rng);
    bias_ = ps.constant(name + ".bias", {out}, 0.0);
  }
  Tensor operator()(const Tensor& x) const { return linear(x, weight_, bias_); }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  Tensor weight_, bias_;
};

// Linear -> GELU -> ... -> Linear.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore& ps, const std::string& name, std::vector<int> dims, Rng& rng) {
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
      layers_.emplace_back(ps, name + "." + std::to_string(i), dims[i], dims[i + 1], rng);
  }
  Tensor operator()(Tensor x) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      x = layers_[i](x);
      if (i + 1 < layers_.size()) x = gelu(x);
    }
    return x;
  }
  std::vector<Linear>& layers() { return layers_; }

 private:
  std::vector<Linear> layers_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& name, int dim) {
    gamma_ = ps.constant(name + ".gamma", {dim}, 1.0);
    beta_ = ps.constant(name + ".beta", {dim}, 0.0);
  }
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma_, beta_); }

 private:
  Tensor gamma_, beta_;
};

// Projected multi-head attention: queries from one token set, keys and values
// from another.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& ps, const std::string& name, int dim, int heads, Rng& rng)
      : heads_(heads),
        q_(ps, name + ".q", dim, dim, rng),
        k_(ps, name + ".k", dim, dim, rng),
        v_(ps, name + ".v", dim, dim, rng),
        o_(ps, name + ".o", dim, dim, rng) {
    if (dim % heads != 0) throw usage_error("attention: model dim " + std::to_string(dim) + " not divisible by heads");
  }
  Tensor operator()(const Tensor& queries, const Tensor& keys_values) const {
    return o_(multi_head_sdpa(q_(queries), k_(keys_values), v_(keys_values), heads_));
  }
  Linear& output() { return o_; }

 private:
  int heads_ = 1;
  Linear q_, k_, v_, o_;
};

// Pre-norm encoder layer: x + Attn(LN(x)), then x + MLP(LN(x)).
class TransformerLayer {
 public:
  TransformerLayer() = default;
  TransformerLayer(ParamStore& ps, const std::string& name, int dim, int heads, int ff_mult, Rng& rng)
      : ln1_(ps, name + ".ln1", dim),
        attn_(ps, name + ".attn", dim, heads, rng),
        ln2_(ps, name + ".ln2", dim),
        ff_(ps, name + ".ff", {dim, ff_mult * dim, dim}, rng) {}

  Tensor operator()(const Tensor& x) const {
    const Tensor h = ln1_(x);
    const Tensor y = add(x, attn_(h, h));
    return add(y, ff_(ln2_(y)));
  }
  MultiHeadAttention& attention() { return attn_; }
  Mlp& feed_forward() { return ff_; }

 private:
  LayerNorm ln1_;
  MultiHeadAttention attn_;
  LayerNorm ln2_;
  Mlp ff_;
};

class TransformerEncoder {
 public:
  TransformerEncoder() = default;
  TransformerEncoder(ParamStore& ps, const std::string& name, int dim, int layers, int heads, int ff_mult, Rng& rng)
      : final_ln_() {
    for (int i = 0; i < layers; ++i) layers_.emplace_back(ps, name + ".layer" + std::to_string(i), dim, heads, ff_mult, rng);
    final_ln_ = LayerNorm(ps, name + ".ln_final", dim);
  }
  Tensor operator()(Tensor x) const {
    for (const auto& l : layers_) x = l(x);
    return final_ln_(x);
  }

 private:
  std::vector<TransformerLayer> layers_;
  LayerNorm final_ln_;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParamStore& ps, const std::string& name, int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng)
      : stride_(stride), pad_(pad) {
    weight_ = ps.xavier(name + ".weight", {out_ch, in_ch, kernel, kernel}, in_ch * kernel * kernel,
                        out_ch * kernel * kernel, rng);
    bias_ = ps.constant(name + ".bias", {out_ch}, 0.0);
  }
  Tensor operator()(const Tensor& x) const { return conv2d(x, weight_, bias_, stride_, pad_); }
  Tensor& bias() { return bias_; }

 private:
  Tensor weight_, bias_;
  int stride_ = 1, pad_ = 0;
};

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 0.0;  // 0 disables global-norm clipping
};

// Decoupled weight decay with bias-corrected moments.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  const AdamWConfig& config() const { return cfg_; }
  AdamWConfig& config() { return cfg_; }
  std::int64_t steps() const { return t_; }

  void step(std::vector<Parameter>& params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.tensor.size(), 0.0);
        v_.emplace_back(p.tensor.size(), 0.0);
      }
    }
    if (m_.size() != params.size()) throw invariant_error("AdamW: parameter set changed between steps");
    ++t_;
    double clip = 1.0;
    if (cfg_.clip_norm > 0.0) {
      double sq = 0.0;
      for (const auto& p : params)
        for (double g : p.tensor.grad()) sq += g * g;
      const double norm = std::sqrt(sq);
      if (norm > cfg_.clip_norm) clip = cfg_.clip_norm / norm;
    }
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto w = params[i].tensor.mutable_data();
      const auto g = params[i].tensor.grad();
      const bool has_grad = g.size() == w.size();
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double gj = has_grad ? clip * g[j] : 0.0;
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
        w[j] -= cfg_.lr * cfg_.weight_decay * w[j];
        w[j] -= cfg_.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.eps);
      }
    }
  }

  // Moment buffers, exposed for checkpoint round trips.
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }

 private:
  AdamWConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace hett::nn
