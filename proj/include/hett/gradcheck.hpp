#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "hett/nn.hpp"
#include "hett/rng.hpp"
#include "hett/tensor.hpp"

namespace hett::nn {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  std::size_t coords_per_param = 32;  // all coordinates when a tensor is smaller
  double denominator_floor = 1e-5;    // relative error = |a - n| / max(|a|, |n|, floor)
  std::uint64_t seed = 1;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coords_checked = 0;
  bool passed = true;
};

// Central differences on a random subsample of coordinates of each named
// tensor, compared against the tape's reverse-mode gradient. `f` must be
// deterministic and return a scalar.
inline GradCheckReport finite_difference_check(const std::function<Tensor()>& f, std::vector<Parameter> params,
                                               const GradCheckOptions& opt = {}) {
  for (auto& p : params) p.tensor.zero_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    const Tensor loss = f();
    tape.backward(loss);
  }

  GradCheckReport report;
  Rng rng(opt.seed);
  for (auto& p : params) {
    const std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
    std::vector<std::size_t> coords(p.tensor.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > opt.coords_per_param) {
      rng.shuffle(coords);
      coords.resize(opt.coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    auto data = p.tensor.mutable_data();
    for (std::size_t idx : coords) {
      const double orig = data[idx];
      data[idx] = orig + opt.step;
      const double fp = f().item();
      data[idx] = orig - opt.step;
      const double fm = f().item();
      data[idx] = orig;
      const double numeric = (fp - fm) / (2.0 * opt.step);
      const double a = analytic.empty() ? 0.0 : analytic[idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), opt.denominator_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coords_checked;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_param = p.name;
        report.worst_index = idx;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_relative_error < opt.tolerance;
  return report;
}

}  // namespace hett::nn
