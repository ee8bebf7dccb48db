#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace hett::geom {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(a + std::numbers::pi, two_pi);
  if (w < 0.0) w += two_pi;
  w -= std::numbers::pi;
  if (w <= -std::numbers::pi) w += two_pi;
  return w;
}

// Axis-aligned rectangle [min, max].
struct Rect {
  Point2 min;
  Point2 max;

  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
  Point2 center() const { return {0.5 * (min.x + max.x), 0.5 * (min.y + max.y)}; }
  bool contains(Point2 p) const { return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y; }
  Point2 clamp(Point2 p) const { return {std::clamp(p.x, min.x, max.x), std::clamp(p.y, min.y, max.y)}; }
  Point2 normalize(Point2 p) const { return {(p.x - min.x) / width(), (p.y - min.y) / height()}; }
  Point2 denormalize(Point2 u) const { return {min.x + u.x * width(), min.y + u.y * height()}; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

// Simple polygon, implicitly closed.
struct Polygon {
  std::vector<Point2> vertices;
  friend bool operator==(const Polygon&, const Polygon&) = default;
};

inline double signed_area(const Polygon& poly) {
  const auto& v = poly.vertices;
  double a = 0.0;
  for (std::size_t i = 0, n = v.size(); i < n; ++i) a += cross(v[i], v[(i + 1) % n]);
  return 0.5 * a;
}

inline double area(const Polygon& poly) { return std::abs(signed_area(poly)); }

inline Point2 centroid(const Polygon& poly) {
  const auto& v = poly.vertices;
  const double a = signed_area(poly);
  double cx = 0.0, cy = 0.0;
  for (std::size_t i = 0, n = v.size(); i < n; ++i) {
    const Point2 p = v[i], q = v[(i + 1) % n];
    const double c = cross(p, q);
    cx += (p.x + q.x) * c;
    cy += (p.y + q.y) * c;
  }
  return {cx / (6.0 * a), cy / (6.0 * a)};
}

inline Rect bounding_box(const Polygon& poly) {
  Rect r{{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()},
         {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()}};
  for (const auto& p : poly.vertices) {
    r.min.x = std::min(r.min.x, p.x);
    r.min.y = std::min(r.min.y, p.y);
    r.max.x = std::max(r.max.x, p.x);
    r.max.y = std::max(r.max.y, p.y);
  }
  return r;
}

inline double segment_distance(Point2 p, Point2 a, Point2 b) {
  const Point2 ab = b - a;
  const double len2 = dot(ab, ab);
  const double t = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
  return distance(p, a + t * ab);
}

inline bool on_boundary(Point2 p, const Polygon& poly, double tol = 1e-12) {
  const auto& v = poly.vertices;
  for (std::size_t i = 0, n = v.size(); i < n; ++i) {
    if (segment_distance(p, v[i], v[(i + 1) % n]) <= tol) return true;
  }
  return false;
}

// Even-odd crossing test; points on the boundary count as inside.
inline bool point_in_polygon(Point2 p, const Polygon& poly) {
  const auto& v = poly.vertices;
  const std::size_t n = v.size();
  if (n < 3) return false;
  if (on_boundary(p, poly)) return true;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = v[i], b = v[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

inline double distance_to_polygon(Point2 p, const Polygon& poly) {
  if (point_in_polygon(p, poly)) return 0.0;
  double d = std::numeric_limits<double>::infinity();
  const auto& v = poly.vertices;
  for (std::size_t i = 0, n = v.size(); i < n; ++i) d = std::min(d, segment_distance(p, v[i], v[(i + 1) % n]));
  return d;
}

namespace detail {
inline int orient(Point2 a, Point2 b, Point2 c) {
  const double v = cross(b - a, c - a);
  return (v > 0) - (v < 0);
}
inline bool segments_cross(Point2 a, Point2 b, Point2 c, Point2 d) {
  const int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  return o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0;
}
}  // namespace detail

// Non-adjacent edges must not properly intersect.
inline bool is_simple(const Polygon& poly) {
  const auto& v = poly.vertices;
  const std::size_t n = v.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (detail::segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) return false;
    }
  }
  return true;
}

inline bool is_valid(const Polygon& poly) {
  for (const auto& p : poly.vertices) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) return false;
  }
  return poly.vertices.size() >= 3 && area(poly) > 0.0 && is_simple(poly);
}

// Square occupancy grid over a world rectangle. Row index follows +y, column
// index follows +x; cell (row, col) has its center at
// min + ((col + 0.5) * w / S, (row + 0.5) * h / S).
struct LandmarkMap {
  int size = 0;
  std::vector<double> cells;

  double at(int row, int col) const { return cells[static_cast<std::size_t>(row) * size + col]; }
  double& at(int row, int col) { return cells[static_cast<std::size_t>(row) * size + col]; }
  double fill_fraction() const {
    double s = 0.0;
    for (double c : cells) s += c;
    return cells.empty() ? 0.0 : s / static_cast<double>(cells.size());
  }
  friend bool operator==(const LandmarkMap&, const LandmarkMap&) = default;
};

inline Point2 cell_center(const Rect& bounds, int size, int row, int col) {
  return {bounds.min.x + (col + 0.5) * bounds.width() / size, bounds.min.y + (row + 0.5) * bounds.height() / size};
}

inline LandmarkMap rasterize_polygons(std::span<const Polygon* const> polygons, const Rect& bounds, int size) {
  if (size < 1) throw std::invalid_argument("rasterize: grid size must be >= 1");
  LandmarkMap map{size, std::vector<double>(static_cast<std::size_t>(size) * size, 0.0)};
  for (const Polygon* poly : polygons) {
    const Rect box = bounding_box(*poly);
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        if (map.at(r, c) != 0.0) continue;
        const Point2 p = cell_center(bounds, size, r, c);
        if (!box.contains(p)) continue;
        if (point_in_polygon(p, *poly)) map.at(r, c) = 1.0;
      }
    }
  }
  return map;
}

}  // namespace hett::geom
