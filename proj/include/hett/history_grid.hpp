#pragma once

// Spatial memory over a fixed S x S partition of the world rectangle. Each
// cell keeps every (feature, position, step) record inserted into it; the
// aggregation turns a cell's bank into one instruction-conditioned token.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "hett/error.hpp"
#include "hett/geom.hpp"
#include "hett/tensor.hpp"

namespace hett::grid {

using geom::Point2;
using geom::Rect;
using nn::Tensor;

struct CellIndex {
  int x = 0;
  int y = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

// floor(normalized coordinate * S), clamped to [0, S - 1].
inline CellIndex cell_index(Point2 p, const Rect& bounds, int size) {
  auto axis = [size](double v, double lo, double extent) {
    const double u = std::floor((v - lo) / extent * size);
    return static_cast<int>(std::clamp(u, 0.0, static_cast<double>(size - 1)));
  };
  return {axis(p.x, bounds.min.x, bounds.width()), axis(p.y, bounds.min.y, bounds.height())};
}

struct Record {
  Tensor feature;  // D values
  Point2 position;
  int step = 0;
};

class HistoryGridMap {
 public:
  HistoryGridMap(Rect bounds, int size, int feature_dim)
      : bounds_(bounds), size_(size), dim_(feature_dim), cells_(static_cast<std::size_t>(size) * size) {
    if (size < 1) throw usage_error("HistoryGridMap: grid size must be >= 1");
  }

  int size() const { return size_; }
  int feature_dim() const { return dim_; }
  const Rect& bounds() const { return bounds_; }
  int cell_count() const { return size_ * size_; }

  // Row-major: y * S + x.
  int flat_index(CellIndex c) const { return c.y * size_ + c.x; }

  void insert(const Tensor& feature, Point2 p, int step) {
    if (feature.size() != static_cast<std::size_t>(dim_))
      throw invariant_error("HistoryGridMap::insert: feature has " + std::to_string(feature.size()) +
                            " values, expected " + std::to_string(dim_));
    cells_[static_cast<std::size_t>(flat_index(cell_index(p, bounds_, size_)))].push_back({feature, p, step});
  }

  const std::vector<Record>& cell(int flat) const { return cells_[static_cast<std::size_t>(flat)]; }
  std::vector<Record>& cell(int flat) { return cells_[static_cast<std::size_t>(flat)]; }
  const std::vector<Record>& cell(CellIndex c) const { return cell(flat_index(c)); }

  std::size_t total_records() const {
    std::size_t n = 0;
    for (const auto& c : cells_) n += c.size();
    return n;
  }

 private:
  Rect bounds_;
  int size_;
  int dim_;
  std::vector<std::vector<Record>> cells_;
};

struct GridTokens {
  Tensor tokens;                              // [S*S x D], row-major cell order
  std::vector<bool> empty;                    // per cell
  std::vector<std::vector<double>> weights;   // per cell, one weight per record
};

// Per non-empty cell with features M (J x D): scores = M E^T (J x N), softmax
// over J for each instruction column, per-feature weight = mean over the N
// columns, token = sum_j weight_j m_j. Empty cells take `empty_embedding`.
// Differentiable with respect to E, the stored features and the embedding.
inline GridTokens aggregate(const HistoryGridMap& map, const Tensor& instruction, const Tensor& empty_embedding) {
  const int d = map.feature_dim();
  const int cells = map.cell_count();
  const Tensor e = nn::as_row(instruction);
  if (e.cols() != d) throw invariant_error("aggregate: instruction embedding width does not match feature dim");
  if (e.rows() < 1) throw invariant_error("aggregate: instruction must have at least one token");
  if (empty_embedding.size() != static_cast<std::size_t>(d))
    throw invariant_error("aggregate: empty embedding has the wrong size");
  const int n = e.rows();

  GridTokens out;
  out.empty.assign(static_cast<std::size_t>(cells), true);
  out.weights.resize(static_cast<std::size_t>(cells));

  std::vector<Tensor> inputs = {e, empty_embedding};
  std::vector<int> record_cell;  // cell of each input feature
  for (int c = 0; c < cells; ++c) {
    for (const auto& r : map.cell(c)) {
      inputs.push_back(r.feature);
      record_cell.push_back(c);
    }
  }

  // Column-softmax probabilities per record, kept for the backward pass.
  std::vector<std::vector<double>> probs(record_cell.size());
  std::vector<double> values(static_cast<std::size_t>(cells) * d, 0.0);
  const auto ev = e.data();
  std::size_t rec = 0;
  for (int c = 0; c < cells; ++c) {
    const auto& bank = map.cell(c);
    const std::size_t j_count = bank.size();
    double* token = values.data() + static_cast<std::size_t>(c) * d;
    if (j_count == 0) {
      for (int k = 0; k < d; ++k) token[k] = empty_embedding.at(static_cast<std::size_t>(k));
      continue;
    }
    out.empty[static_cast<std::size_t>(c)] = false;
    std::vector<double> scores(j_count * static_cast<std::size_t>(n));
    for (std::size_t j = 0; j < j_count; ++j) {
      const auto m = bank[j].feature.data();
      for (int t = 0; t < n; ++t) {
        double s = 0.0;
        for (int k = 0; k < d; ++k) s += m[static_cast<std::size_t>(k)] * ev[static_cast<std::size_t>(t) * d + k];
        scores[j * n + t] = s;
      }
    }
    for (int t = 0; t < n; ++t) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < j_count; ++j) mx = std::max(mx, scores[j * n + t]);
      double z = 0.0;
      for (std::size_t j = 0; j < j_count; ++j) {
        scores[j * n + t] = std::exp(scores[j * n + t] - mx);
        z += scores[j * n + t];
      }
      for (std::size_t j = 0; j < j_count; ++j) scores[j * n + t] /= z;
    }
    auto& w = out.weights[static_cast<std::size_t>(c)];
    w.assign(j_count, 0.0);
    for (std::size_t j = 0; j < j_count; ++j) {
      double acc = 0.0;
      for (int t = 0; t < n; ++t) acc += scores[j * n + t];
      w[j] = acc / n;
      const auto m = bank[j].feature.data();
      for (int k = 0; k < d; ++k) token[k] += w[j] * m[static_cast<std::size_t>(k)];
      probs[rec + j].assign(scores.begin() + static_cast<std::ptrdiff_t>(j * n),
                            scores.begin() + static_cast<std::ptrdiff_t>((j + 1) * n));
    }
    rec += j_count;
  }

  out.tokens = nn::detail::make_result_multi(
      {cells, d}, std::move(values), inputs,
      [d, n, cells, record_cell, probs = std::move(probs), weights = out.weights](nn::Node* self) mutable {
        return std::function<void()>([self, d, n, cells, record_cell, probs, weights] {
          nn::Node* pe = self->parents[0].get();
          nn::Node* pempty = self->parents[1].get();
          auto* ge = nn::detail::grad_of(pe);
          if (auto* g = nn::detail::grad_of(pempty)) {
            std::vector<bool> occupied(static_cast<std::size_t>(cells), false);
            for (int c : record_cell) occupied[static_cast<std::size_t>(c)] = true;
            for (int c = 0; c < cells; ++c) {
              if (occupied[static_cast<std::size_t>(c)]) continue;
              for (int k = 0; k < d; ++k) (*g)[static_cast<std::size_t>(k)] += self->grad[static_cast<std::size_t>(c) * d + k];
            }
          }
          std::size_t first = 0;
          while (first < record_cell.size()) {
            const int c = record_cell[first];
            std::size_t last = first;
            while (last < record_cell.size() && record_cell[last] == c) ++last;
            const double* gtok = self->grad.data() + static_cast<std::size_t>(c) * d;
            const auto& w = weights[static_cast<std::size_t>(c)];
            // d loss / d score[j, t] through the column softmax.
            std::vector<double> dk(last - first);
            for (std::size_t j = first; j < last; ++j) {
              const auto& m = self->parents[2 + j]->value;
              double dot = 0.0;
              for (int k = 0; k < d; ++k) dot += gtok[k] * m[static_cast<std::size_t>(k)];
              dk[j - first] = dot / n;
            }
            for (int t = 0; t < n; ++t) {
              double col = 0.0;
              for (std::size_t j = first; j < last; ++j) col += probs[j][static_cast<std::size_t>(t)] * dk[j - first];
              for (std::size_t j = first; j < last; ++j) {
                const double ds = probs[j][static_cast<std::size_t>(t)] * (dk[j - first] - col);
                nn::Node* pm = self->parents[2 + j].get();
                if (auto* gm = nn::detail::grad_of(pm))
                  for (int k = 0; k < d; ++k) (*gm)[static_cast<std::size_t>(k)] += ds * pe->value[static_cast<std::size_t>(t) * d + k];
                if (ge)
                  for (int k = 0; k < d; ++k) (*ge)[static_cast<std::size_t>(t) * d + k] += ds * pm->value[static_cast<std::size_t>(k)];
              }
            }
            for (std::size_t j = first; j < last; ++j) {
              nn::Node* pm = self->parents[2 + j].get();
              if (auto* gm = nn::detail::grad_of(pm))
                for (int k = 0; k < d; ++k) (*gm)[static_cast<std::size_t>(k)] += w[j - first] * gtok[k];
            }
            first = last;
          }
        });
      });
  return out;
}

}  // namespace hett::grid
