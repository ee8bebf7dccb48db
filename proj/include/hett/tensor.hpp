#pragma once

// Reverse-mode automatic differentiation over dense fp64 arrays.
//
// Operations executed while a Tape is active (see TapeScope) and touching at
// least one tensor that requires a gradient are recorded in execution order,
// which is a topological order of the graph. Tape::backward walks the records
// in reverse, so every node's backward closure runs exactly once. Outside a
// tape scope nothing is recorded, which makes inference over shared
// parameters safe from several threads.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hett/error.hpp"

namespace hett::nn {

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream o;
  o << '[';
  for (std::size_t i = 0; i < s.size(); ++i) o << (i ? "x" : "") << s[i];
  o << ']';
  return o.str();
}

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backward;

  std::vector<double>& grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

class Tensor;

class Tape {
 public:
  void record(std::shared_ptr<Node> n) { nodes_.push_back(std::move(n)); }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(root)/d(root) = 1 and propagates to every recorded node and leaf.
  inline void backward(const Tensor& root);
  void clear() { nodes_.clear(); }

 private:
  std::vector<std::shared_ptr<Node>> nodes_;
};

namespace detail {
inline thread_local Tape* active_tape = nullptr;
}

// Activates a tape on the current thread for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& t) : prev_(detail::active_tape) { detail::active_tape = &t; }
  ~TapeScope() { detail::active_tape = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
    if (numel(shape) != values.size())
      throw invariant_error("Tensor::from: shape " + shape_str(shape) + " does not match " +
                            std::to_string(values.size()) + " values");
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }
  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto count = numel(shape);
    return from(std::move(shape), std::vector<double>(count, 0.0), requires_grad);
  }
  static Tensor scalar(double v) { return from({1}, {v}); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  int dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  int rows() const { return rank() == 1 ? 1 : node_->shape[0]; }
  int cols() const { return rank() == 1 ? node_->shape[0] : node_->shape[1]; }

  std::span<const double> data() const { return node_->value; }
  std::span<double> mutable_data() { return node_->value; }
  std::span<const double> grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size() && !node_->value.empty(); }
  void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }
  bool requires_grad() const { return node_->requires_grad; }
  double item() const { return node_->value.at(0); }
  double at(std::size_t i) const { return node_->value[i]; }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

inline void Tape::backward(const Tensor& root) {
  if (root.size() != 1) throw invariant_error("backward: root must be a scalar, got " + shape_str(root.shape()));
  root.node()->grad_buffer()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.backward && !n.grad.empty()) n.backward();
  }
}

namespace detail {

inline bool recording(std::initializer_list<const Tensor*> inputs) {
  if (!active_tape) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// Builds a result node; the backward closure is installed only when recording.
template <typename Backward>
Tensor make_result(Shape shape, std::vector<double> value, std::initializer_list<const Tensor*> inputs,
                   Backward&& backward_factory) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  if (recording(inputs)) {
    n->requires_grad = true;
    for (const Tensor* t : inputs) n->parents.push_back(t->ptr());
    n->backward = backward_factory(n.get());
    active_tape->record(n);
  }
  return Tensor(std::move(n));
}

inline Tensor make_result_multi(Shape shape, std::vector<double> value, const std::vector<Tensor>& inputs,
                                const std::function<std::function<void()>(Node*)>& backward_factory) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool rec = active_tape != nullptr &&
             std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (rec) {
    n->requires_grad = true;
    for (const Tensor& t : inputs) n->parents.push_back(t.ptr());
    n->backward = backward_factory(n.get());
    active_tape->record(n);
  }
  return Tensor(std::move(n));
}

// Accumulates into a parent's gradient only when the parent wants one.
inline std::vector<double>* grad_of(Node* p) { return p->requires_grad ? &p->grad_buffer() : nullptr; }

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

inline CMapMat cmat(const std::vector<double>& v, int r, int c) { return CMapMat(v.data(), r, c); }
inline MapMat mat(std::vector<double>& v, int r, int c) { return MapMat(v.data(), r, c); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw invariant_error(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Shape manipulation

inline Tensor reshape(const Tensor& x, Shape shape) {
  detail::require(numel(shape) == x.size(), "reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  return detail::make_result(std::move(shape), x.node()->value, {&x}, [](Node* self) {
    return [self] {
      auto* g = detail::grad_of(self->parents[0].get());
      if (!g) return;
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self->grad[i];
    };
  });
}

// Treats a rank-1 tensor of length D as a 1 x D row.
inline Tensor as_row(const Tensor& x) { return x.rank() == 2 ? x : reshape(x, {1, static_cast<int>(x.size())}); }

inline Tensor transpose(const Tensor& x) {
  detail::require(x.rank() == 2, "transpose: expects rank 2, got " + shape_str(x.shape()));
  const int r = x.dim(0), c = x.dim(1);
  std::vector<double> out(x.size());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(j) * r + i] = x.at(static_cast<std::size_t>(i) * c + j);
  return detail::make_result({c, r}, std::move(out), {&x}, [r, c](Node* self) {
    return [self, r, c] {
      auto* g = detail::grad_of(self->parents[0].get());
      if (!g) return;
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          (*g)[static_cast<std::size_t>(i) * c + j] += self->grad[static_cast<std::size_t>(j) * r + i];
    };
  });
}

// Vertical concatenation of rank-2 tensors (rank-1 inputs count as one row).
inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  detail::require(!parts.empty(), "concat_rows: no inputs");
  const int cols = parts.front().cols();
  int rows = 0;
  std::vector<double> out;
  for (const auto& p : parts) {
    detail::require(p.cols() == cols, "concat_rows: column mismatch " + shape_str(p.shape()));
    rows += p.rows();
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  return detail::make_result_multi({rows, cols}, std::move(out), parts, [](Node* self) -> std::function<void()> {
    return [self] {
      std::size_t offset = 0;
      for (auto& parent : self->parents) {
        const std::size_t n = parent->value.size();
        if (auto* g = detail::grad_of(parent.get())) {
          for (std::size_t i = 0; i < n; ++i) (*g)[i] += self->grad[offset + i];
        }
        offset += n;
      }
    };
  });
}

inline Tensor slice_rows(const Tensor& x, int start, int count) {
  detail::require(x.rank() == 2 && start >= 0 && count >= 0 && start + count <= x.dim(0),
                  "slice_rows: out of range on " + shape_str(x.shape()));
  const int c = x.dim(1);
  const auto begin = x.data().begin() + static_cast<std::ptrdiff_t>(start) * c;
  std::vector<double> out(begin, begin + static_cast<std::ptrdiff_t>(count) * c);
  return detail::make_result({count, c}, std::move(out), {&x}, [start, c](Node* self) {
    return [self, start, c] {
      auto* g = detail::grad_of(self->parents[0].get());
      if (!g) return;
      const std::size_t off = static_cast<std::size_t>(start) * c;
      for (std::size_t i = 0; i < self->grad.size(); ++i) (*g)[off + i] += self->grad[i];
    };
  });
}

// Embedding lookup: rows of `table` selected by ids.
inline Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
  detail::require(table.rank() == 2, "gather_rows: table must be rank 2");
  const int d = table.dim(1);
  std::vector<double> out;
  out.reserve(ids.size() * static_cast<std::size_t>(d));
  for (int id : ids) {
    detail::require(id >= 0 && id < table.dim(0), "gather_rows: id out of range");
    const auto row = table.data().subspan(static_cast<std::size_t>(id) * d, static_cast<std::size_t>(d));
    out.insert(out.end(), row.begin(), row.end());
  }
  return detail::make_result({static_cast<int>(ids.size()), d}, std::move(out), {&table}, [ids, d](Node* self) {
    return [self, ids, d] {
      auto* g = detail::grad_of(self->parents[0].get());
      if (!g) return;
      for (std::size_t r = 0; r < ids.size(); ++r)
        for (int j = 0; j < d; ++j)
          (*g)[static_cast<std::size_t>(ids[r]) * d + j] += self->grad[r * static_cast<std::size_t>(d) + j];
    };
  });
}

// ---------------------------------------------------------------------------
// Elementwise arithmetic

namespace detail {
inline void require_same(const Tensor& a, const Tensor& b, const char* op) {
  require(a.size() == b.size(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
}
}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  return detail::make_result(a.shape(), std::move(out), {&a, &b}, [](Node* self) {
    return [self] {
      for (auto& p : self->parents) {
        if (auto* g = detail::grad_of(p.get()))
          for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self->grad[i];
      }
    };
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  return detail::make_result(a.shape(), std::move(out), {&a, &b}, [](Node* self) {
    return [self] {
      if (auto* g = detail::grad_of(self->parents[0].get()))
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self->grad[i];
      if (auto* g = detail::grad_of(self->parents[1].get()))
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self->grad[i];
    };
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  return detail::make_result(a.shape(), std::move(out), {&a, &b}, [](Node* self) {
    return [self] {
      Node* pa = self->parents[0].get();
      Node* pb = self->parents[1].get();
      if (auto* g = detail::grad_of(pa))
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self->grad[i] * pb->value[i];
      if (auto* g = detail::grad_of(pb))
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self->grad[i] * pa->value[i];
    };
  });
}

// x[T x D] + b broadcast over rows (b has D elements).
inline Tensor add_row(const Tensor& x, const Tensor& b) {
  const int t = x.rows(), d = x.cols();
  detail::require(b.size() == static_cast<std::size_t>(d), "add_row: bias size mismatch");
  std::vector<double> out(x.data().begin(), x.data().end());
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(i) * d + j] += b.at(static_cast<std::size_t>(j));
  return detail::make_result(x.shape(), std::move(out), {&x, &b}, [t, d](Node* self) {
    return [self, t, d] {
      if (auto* g = detail::grad_of(self->parents[0].get()))
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self->grad[i];
      if (auto* g = detail::grad_of(self->parents[1].get()))
        for (int i = 0; i < t; ++i)
          for (int j = 0; j < d; ++j) (*g)[static_cast<std::size_t>(j)] += self->grad[static_cast<std::size_t>(i) * d + j];
    };
  });
}

inline Tensor scale(const Tensor& x, double s) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * x.at(i);
  return detail::make_result(x.shape(), std::move(out), {&x}, [s](Node* self) {
    return [self, s] {
      if (auto* g = detail::grad_of(self->parents[0].get()))
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += s * self->grad[i];
    };
  });
}

inline Tensor add_scalar(const Tensor& x, double s) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) + s;
  return detail::make_result(x.shape(), std::move(out), {&x}, [](Node* self) {
    return [self] {
      if (auto* g = detail::grad_of(self->parents[0].get()))
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self->grad[i];
    };
  });
}

namespace detail {
// Elementwise map with derivative expressed through (input, output).
template <typename F, typename DF>
Tensor unary(const Tensor& x, F f, DF df) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x.at(i));
  return make_result(x.shape(), std::move(out), {&x}, [df](Node* self) {
    return [self, df] {
      Node* p = self->parents[0].get();
      if (auto* g = grad_of(p))
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self->grad[i] * df(p->value[i], self->value[i]);
    };
  });
}
}  // namespace detail

inline Tensor square(const Tensor& x) {
  return detail::unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& x) {
  return detail::unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor relu(const Tensor& x) {
  return detail::unary(x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

// Natural log; inputs must be positive.
inline Tensor log(const Tensor& x) {
  for (double v : x.data()) detail::require(v > 0.0, "log: non-positive input");
  return detail::unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

// tanh approximation of GELU.
inline Tensor gelu(const Tensor& x) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double c = 0.044715;
  return detail::unary(
      x,
      [](double v) { return 0.5 * v * (1.0 + std::tanh(k * (v + c * v * v * v))); },
      [](double v, double) {
        const double u = k * (v + c * v * v * v);
        const double t = std::tanh(u);
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * k * (1.0 + 3.0 * c * v * v);
      });
}

// Maps to (-pi, pi]; derivative 1 away from the branch cut.
inline Tensor wrap_angle(const Tensor& x) {
  return detail::unary(
      x,
      [](double a) {
        constexpr double two_pi = 2.0 * std::numbers::pi;
        double w = std::fmod(a + std::numbers::pi, two_pi);
        if (w < 0.0) w += two_pi;
        w -= std::numbers::pi;
        if (w <= -std::numbers::pi) w += two_pi;
        return w;
      },
      [](double, double) { return 1.0; });
}

// Elementwise atan2(y, x).
inline Tensor atan2(const Tensor& y, const Tensor& x) {
  detail::require_same(y, x, "atan2");
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::atan2(y.at(i), x.at(i));
  return detail::make_result(y.shape(), std::move(out), {&y, &x}, [](Node* self) {
    return [self] {
      Node* py = self->parents[0].get();
      Node* px = self->parents[1].get();
      auto* gy = detail::grad_of(py);
      auto* gx = detail::grad_of(px);
      for (std::size_t i = 0; i < self->grad.size(); ++i) {
        const double yv = py->value[i], xv = px->value[i];
        const double r2 = xv * xv + yv * yv;
        if (r2 == 0.0) continue;
        if (gy) (*gy)[i] += self->grad[i] * xv / r2;
        if (gx) (*gx)[i] -= self->grad[i] * yv / r2;
      }
    };
  });
}

inline Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return detail::make_result({1}, {s}, {&x}, [](Node* self) {
    return [self] {
      if (auto* g = detail::grad_of(self->parents[0].get()))
        for (double& v : *g) v += self->grad[0];
    };
  });
}

inline Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

inline Tensor sum_all(const std::vector<Tensor>& terms) {
  detail::require(!terms.empty(), "sum_all: no inputs");
  Tensor acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return acc;
}

// ---------------------------------------------------------------------------
// Linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
                  "matmul: shape mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  detail::mat(out, m, n).noalias() = detail::cmat(a.node()->value, m, k) * detail::cmat(b.node()->value, k, n);
  return detail::make_result({m, n}, std::move(out), {&a, &b}, [m, k, n](Node* self) {
    return [self, m, k, n] {
      Node* pa = self->parents[0].get();
      Node* pb = self->parents[1].get();
      const auto dc = detail::cmat(self->grad, m, n);
      if (auto* g = detail::grad_of(pa)) detail::mat(*g, m, k).noalias() += dc * detail::cmat(pb->value, k, n).transpose();
      if (auto* g = detail::grad_of(pb)) detail::mat(*g, k, n).noalias() += detail::cmat(pa->value, m, k).transpose() * dc;
    };
  });
}

// x[T x in] * w[in x out] + b[out].
inline Tensor linear(const Tensor& x_in, const Tensor& w, const Tensor& b) {
  const Tensor x = as_row(x_in);
  detail::require(w.rank() == 2 && x.dim(1) == w.dim(0) && b.size() == static_cast<std::size_t>(w.dim(1)),
                  "linear: shape mismatch " + shape_str(x.shape()) + " x " + shape_str(w.shape()));
  const int t = x.dim(0), in = w.dim(0), out_dim = w.dim(1);
  std::vector<double> out(static_cast<std::size_t>(t) * out_dim);
  auto o = detail::mat(out, t, out_dim);
  o.noalias() = detail::cmat(x.node()->value, t, in) * detail::cmat(w.node()->value, in, out_dim);
  o.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.node()->value.data(), out_dim);
  return detail::make_result({t, out_dim}, std::move(out), {&x, &w, &b}, [t, in, out_dim](Node* self) {
    return [self, t, in, out_dim] {
      Node* px = self->parents[0].get();
      Node* pw = self->parents[1].get();
      Node* pb = self->parents[2].get();
      const auto dy = detail::cmat(self->grad, t, out_dim);
      if (auto* g = detail::grad_of(px))
        detail::mat(*g, t, in).noalias() += dy * detail::cmat(pw->value, in, out_dim).transpose();
      if (auto* g = detail::grad_of(pw))
        detail::mat(*g, in, out_dim).noalias() += detail::cmat(px->value, t, in).transpose() * dy;
      if (auto* g = detail::grad_of(pb))
        Eigen::Map<Eigen::RowVectorXd>(g->data(), out_dim) += dy.colwise().sum();
    };
  });
}

// ---------------------------------------------------------------------------
// Normalization

// Numerically stabilized softmax. Rank 1: over all elements. Rank 2: axis 1
// normalizes each row, axis 0 each column.
inline Tensor softmax(const Tensor& x, int axis = -1) {
  detail::require(x.rank() == 1 || x.rank() == 2, "softmax: rank must be 1 or 2");
  const int rows = x.rank() == 1 ? 1 : x.dim(0);
  const int cols = x.rank() == 1 ? x.dim(0) : x.dim(1);
  if (axis < 0) axis = static_cast<int>(x.rank()) - 1;
  detail::require(axis < static_cast<int>(x.rank()), "softmax: axis out of range");
  const bool over_rows = x.rank() == 2 && axis == 0;
  // Lines are the slices being normalized.
  const int lines = over_rows ? cols : rows;
  const int len = over_rows ? rows : cols;
  const int stride = over_rows ? cols : 1;
  const int line_step = over_rows ? 1 : cols;

  std::vector<double> out(x.size());
  for (int l = 0; l < lines; ++l) {
    const std::size_t base = static_cast<std::size_t>(l) * line_step;
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < len; ++i) mx = std::max(mx, x.at(base + static_cast<std::size_t>(i) * stride));
    double z = 0.0;
    for (int i = 0; i < len; ++i) {
      const std::size_t idx = base + static_cast<std::size_t>(i) * stride;
      out[idx] = std::exp(x.at(idx) - mx);
      z += out[idx];
    }
    for (int i = 0; i < len; ++i) out[base + static_cast<std::size_t>(i) * stride] /= z;
  }
  return detail::make_result(x.shape(), std::move(out), {&x}, [lines, len, stride, line_step](Node* self) {
    return [self, lines, len, stride, line_step] {
      auto* g = detail::grad_of(self->parents[0].get());
      if (!g) return;
      for (int l = 0; l < lines; ++l) {
        const std::size_t base = static_cast<std::size_t>(l) * line_step;
        double dot = 0.0;
        for (int i = 0; i < len; ++i) {
          const std::size_t idx = base + static_cast<std::size_t>(i) * stride;
          dot += self->grad[idx] * self->value[idx];
        }
        for (int i = 0; i < len; ++i) {
          const std::size_t idx = base + static_cast<std::size_t>(i) * stride;
          (*g)[idx] += self->value[idx] * (self->grad[idx] - dot);
        }
      }
    };
  });
}

// Per-row normalization followed by the affine map gamma * xhat + beta.
inline Tensor layer_norm(const Tensor& x_in, const Tensor& gamma, const Tensor& beta, double eps = 1e-5) {
  const Tensor x = as_row(x_in);
  const int t = x.dim(0), d = x.dim(1);
  detail::require(gamma.size() == static_cast<std::size_t>(d) && beta.size() == static_cast<std::size_t>(d),
                  "layer_norm: affine size mismatch");
  std::vector<double> out(x.size()), xhat(x.size()), inv_std(static_cast<std::size_t>(t));
  for (int i = 0; i < t; ++i) {
    const std::size_t base = static_cast<std::size_t>(i) * d;
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += x.at(base + j);
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (x.at(base + j) - mu) * (x.at(base + j) - mu);
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(i)] = is;
    for (int j = 0; j < d; ++j) {
      xhat[base + j] = (x.at(base + j) - mu) * is;
      out[base + j] = gamma.at(static_cast<std::size_t>(j)) * xhat[base + j] + beta.at(static_cast<std::size_t>(j));
    }
  }
  return detail::make_result(
      x.shape(), std::move(out), {&x, &gamma, &beta},
      [t, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node* self) mutable {
        return [self, t, d, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
          Node* px = self->parents[0].get();
          Node* pg = self->parents[1].get();
          Node* pb = self->parents[2].get();
          auto* gx = detail::grad_of(px);
          auto* gg = detail::grad_of(pg);
          auto* gb = detail::grad_of(pb);
          for (int i = 0; i < t; ++i) {
            const std::size_t base = static_cast<std::size_t>(i) * d;
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (int j = 0; j < d; ++j) {
              const double dy = self->grad[base + j];
              if (gg) (*gg)[static_cast<std::size_t>(j)] += dy * xhat[base + j];
              if (gb) (*gb)[static_cast<std::size_t>(j)] += dy;
              const double dxhat = dy * pg->value[static_cast<std::size_t>(j)];
              sum_dxhat += dxhat;
              sum_dxhat_xhat += dxhat * xhat[base + j];
            }
            if (!gx) continue;
            const double is = inv_std[static_cast<std::size_t>(i)];
            for (int j = 0; j < d; ++j) {
              const double dxhat = self->grad[base + j] * pg->value[static_cast<std::size_t>(j)];
              (*gx)[base + j] += is / d * (d * dxhat - sum_dxhat - xhat[base + j] * sum_dxhat_xhat);
            }
          }
        };
      });
}

// ---------------------------------------------------------------------------
// Attention core

// Multi-head scaled dot-product attention without projections:
// q[Tq x D], k[Tk x D], v[Tk x D] -> [Tq x D], heads split the D columns.
inline Tensor multi_head_sdpa(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in, int heads) {
  const Tensor q = as_row(q_in), k = as_row(k_in), v = as_row(v_in);
  const int tq = q.dim(0), tk = k.dim(0), d = q.dim(1);
  detail::require(k.dim(1) == d && v.dim(1) == d && v.dim(0) == tk, "attention: shape mismatch");
  detail::require(heads > 0 && d % heads == 0, "attention: model dim not divisible by heads");
  const int dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  using detail::RowMat;
  const auto Q = detail::cmat(q.node()->value, tq, d);
  const auto K = detail::cmat(k.node()->value, tk, d);
  const auto V = detail::cmat(v.node()->value, tk, d);
  std::vector<double> out(static_cast<std::size_t>(tq) * d);
  auto O = detail::mat(out, tq, d);
  std::vector<RowMat> probs(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    RowMat s = (Q.middleCols(h * dh, dh) * K.middleCols(h * dh, dh).transpose()) * inv_sqrt;
    for (int i = 0; i < tq; ++i) {
      const double mx = s.row(i).maxCoeff();
      s.row(i) = (s.row(i).array() - mx).exp();
      s.row(i) /= s.row(i).sum();
    }
    O.middleCols(h * dh, dh).noalias() = s * V.middleCols(h * dh, dh);
    probs[static_cast<std::size_t>(h)] = std::move(s);
  }
  return detail::make_result(
      {tq, d}, std::move(out), {&q, &k, &v},
      [tq, tk, d, dh, heads, inv_sqrt, probs = std::move(probs)](Node* self) mutable {
        return [self, tq, tk, d, dh, heads, inv_sqrt, probs = std::move(probs)] {
          Node* pq = self->parents[0].get();
          Node* pk = self->parents[1].get();
          Node* pv = self->parents[2].get();
          auto* gq = detail::grad_of(pq);
          auto* gk = detail::grad_of(pk);
          auto* gv = detail::grad_of(pv);
          const auto dO = detail::cmat(self->grad, tq, d);
          const auto Q = detail::cmat(pq->value, tq, d);
          const auto K = detail::cmat(pk->value, tk, d);
          const auto V = detail::cmat(pv->value, tk, d);
          for (int h = 0; h < heads; ++h) {
            const RowMat& P = probs[static_cast<std::size_t>(h)];
            const auto dOh = dO.middleCols(h * dh, dh);
            if (gv) detail::mat(*gv, tk, d).middleCols(h * dh, dh).noalias() += P.transpose() * dOh;
            if (!gq && !gk) continue;
            const RowMat dP = dOh * V.middleCols(h * dh, dh).transpose();
            RowMat dS = P.cwiseProduct(dP);
            const Eigen::VectorXd row_dot = dS.rowwise().sum();
            dS -= P.cwiseProduct(row_dot.replicate(1, tk));
            dS *= inv_sqrt;
            if (gq) detail::mat(*gq, tq, d).middleCols(h * dh, dh).noalias() += dS * K.middleCols(h * dh, dh);
            if (gk) detail::mat(*gk, tk, d).middleCols(h * dh, dh).noalias() += dS.transpose() * Q.middleCols(h * dh, dh);
          }
        };
      });
}

// ---------------------------------------------------------------------------
// Convolution

// x[C x H x W], w[Co x C x k x k], b[Co] -> [Co x H' x W'] via im2col.
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  detail::require(x.rank() == 3 && w.rank() == 4 && w.dim(1) == x.dim(0) && w.dim(2) == w.dim(3) &&
                      b.size() == static_cast<std::size_t>(w.dim(0)),
                  "conv2d: shape mismatch " + shape_str(x.shape()) + " * " + shape_str(w.shape()));
  const int c = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int co = w.dim(0), k = w.dim(2);
  const int ho = (h + 2 * pad - k) / stride + 1, wo = (wd + 2 * pad - k) / stride + 1;
  detail::require(ho > 0 && wo > 0, "conv2d: kernel larger than padded input");
  const int rows = c * k * k, cols = ho * wo;

  std::vector<double> im2col(static_cast<std::size_t>(rows) * cols, 0.0);
  const auto& xv = x.node()->value;
  for (int ci = 0; ci < c; ++ci)
    for (int ki = 0; ki < k; ++ki)
      for (int kj = 0; kj < k; ++kj) {
        const std::size_t r = (static_cast<std::size_t>(ci) * k + ki) * k + kj;
        for (int oi = 0; oi < ho; ++oi) {
          const int ii = oi * stride - pad + ki;
          if (ii < 0 || ii >= h) continue;
          for (int oj = 0; oj < wo; ++oj) {
            const int jj = oj * stride - pad + kj;
            if (jj < 0 || jj >= wd) continue;
            im2col[r * cols + static_cast<std::size_t>(oi) * wo + oj] =
                xv[(static_cast<std::size_t>(ci) * h + ii) * wd + jj];
          }
        }
      }

  std::vector<double> out(static_cast<std::size_t>(co) * cols);
  auto O = detail::mat(out, co, cols);
  O.noalias() = detail::cmat(w.node()->value, co, rows) * detail::cmat(im2col, rows, cols);
  O.colwise() += Eigen::Map<const Eigen::VectorXd>(b.node()->value.data(), co);

  return detail::make_result(
      {co, ho, wo}, std::move(out), {&x, &w, &b},
      [=, im2col = std::move(im2col)](Node* self) mutable {
        return [=, im2col = std::move(im2col)] {
          Node* px = self->parents[0].get();
          Node* pw = self->parents[1].get();
          Node* pb = self->parents[2].get();
          const auto dO = detail::cmat(self->grad, co, cols);
          if (auto* g = detail::grad_of(pw))
            detail::mat(*g, co, rows).noalias() += dO * detail::cmat(im2col, rows, cols).transpose();
          if (auto* g = detail::grad_of(pb)) Eigen::Map<Eigen::VectorXd>(g->data(), co) += dO.rowwise().sum();
          auto* gx = detail::grad_of(px);
          if (!gx) return;
          const detail::RowMat dcol = detail::cmat(pw->value, co, rows).transpose() * dO;
          for (int ci = 0; ci < c; ++ci)
            for (int ki = 0; ki < k; ++ki)
              for (int kj = 0; kj < k; ++kj) {
                const int r = (ci * k + ki) * k + kj;
                for (int oi = 0; oi < ho; ++oi) {
                  const int ii = oi * stride - pad + ki;
                  if (ii < 0 || ii >= h) continue;
                  for (int oj = 0; oj < wo; ++oj) {
                    const int jj = oj * stride - pad + kj;
                    if (jj < 0 || jj >= wd) continue;
                    (*gx)[(static_cast<std::size_t>(ci) * h + ii) * wd + jj] += dcol(r, oi * wo + oj);
                  }
                }
              }
        };
      });
}

// [C x H x W] -> [1 x C] spatial mean.
inline Tensor global_avg_pool(const Tensor& x) {
  detail::require(x.rank() == 3, "global_avg_pool: expects rank 3");
  const int c = x.dim(0);
  const std::size_t hw = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  std::vector<double> out(static_cast<std::size_t>(c), 0.0);
  for (int ci = 0; ci < c; ++ci) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += x.at(ci * hw + i);
    out[static_cast<std::size_t>(ci)] = s / static_cast<double>(hw);
  }
  return detail::make_result({1, c}, std::move(out), {&x}, [c, hw](Node* self) {
    return [self, c, hw] {
      auto* g = detail::grad_of(self->parents[0].get());
      if (!g) return;
      for (int ci = 0; ci < c; ++ci)
        for (std::size_t i = 0; i < hw; ++i) (*g)[ci * hw + i] += self->grad[static_cast<std::size_t>(ci)] / hw;
    };
  });
}

// [C x H x W] -> [(H*W) x C]: one row per spatial position.
inline Tensor spatial_tokens(const Tensor& x) {
  detail::require(x.rank() == 3, "spatial_tokens: expects rank 3");
  return transpose(reshape(x, {x.dim(0), x.dim(1) * x.dim(2)}));
}

}  // namespace hett::nn
