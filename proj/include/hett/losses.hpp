#pragma once

#include <vector>

#include "hett/error.hpp"
#include "hett/geom.hpp"
#include "hett/tensor.hpp"

namespace hett::train {

using nn::Tensor;

struct LossWeights {
  double target = 2.0;    // alpha_1
  double action = 1.5;    // alpha_2
  double progress = 0.1;  // alpha_3
};

struct LossComponents {
  Tensor target;
  Tensor action;
  Tensor progress;
};

namespace detail {
inline void require_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw invariant_error(std::string(what) + ": sequence length mismatch");
}
inline Tensor zero() { return Tensor::scalar(0.0); }
}  // namespace detail

// sum_t mean((g_t - g_gt)^2) over the two coordinates.
inline Tensor loss_target(const std::vector<Tensor>& predicted, const std::vector<geom::Point2>& truth) {
  detail::require_aligned(predicted.size(), truth.size(), "loss_target");
  if (predicted.empty()) return detail::zero();
  std::vector<Tensor> terms;
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    const Tensor gt = Tensor::from(predicted[t].shape(), {truth[t].x, truth[t].y});
    terms.push_back(nn::mean(nn::square(nn::sub(predicted[t], gt))));
  }
  return nn::sum_all(terms);
}

// sum_t wrap(a_t - a_gt)^2 with the difference wrapped to (-pi, pi].
inline Tensor loss_action(const std::vector<Tensor>& predicted, const std::vector<double>& truth) {
  detail::require_aligned(predicted.size(), truth.size(), "loss_action");
  if (predicted.empty()) return detail::zero();
  std::vector<Tensor> terms;
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    const Tensor gt = Tensor::from(predicted[t].shape(), {truth[t]});
    terms.push_back(nn::sum(nn::square(nn::wrap_angle(nn::sub(predicted[t], gt)))));
  }
  return nn::sum_all(terms);
}

// sum_t (r_t - r_gt)^2.
inline Tensor loss_progress(const std::vector<Tensor>& predicted, const std::vector<double>& truth) {
  detail::require_aligned(predicted.size(), truth.size(), "loss_progress");
  if (predicted.empty()) return detail::zero();
  std::vector<Tensor> terms;
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    const Tensor gt = Tensor::from(predicted[t].shape(), {truth[t]});
    terms.push_back(nn::sum(nn::square(nn::sub(predicted[t], gt))));
  }
  return nn::sum_all(terms);
}

inline Tensor total_loss(const LossComponents& c, const LossWeights& w) {
  return nn::add(nn::add(nn::scale(c.target, w.target), nn::scale(c.action, w.action)),
                 nn::scale(c.progress, w.progress));
}

}  // namespace hett::train
