#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hett/geom.hpp"
#include "hett/rng.hpp"
#include "hett/world.hpp"

using namespace hett;
using geom::Point2;
using geom::Polygon;

namespace {

Polygon unit_square() { return Polygon{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}}; }

// Winding number by signed angle sum; independent of the crossing test.
int winding_number(Point2 p, const Polygon& poly) {
  double total = 0.0;
  const auto& v = poly.vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point2 a = v[i] - p, b = v[(i + 1) % v.size()] - p;
    total += std::atan2(geom::cross(a, b), geom::dot(a, b));
  }
  return static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
}

Polygon star(Rng& rng) {
  Polygon poly;
  const int n = 5 + static_cast<int>(rng.integer(0, 6));
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * i / n;
    const double r = rng.uniform(0.2, 1.0);
    poly.vertices.push_back({r * std::cos(a), r * std::sin(a)});
  }
  return poly;
}

}  // namespace

TEST(PointInPolygon, UnitSquare) {
  EXPECT_TRUE(geom::point_in_polygon({0.5, 0.5}, unit_square()));
  EXPECT_FALSE(geom::point_in_polygon({2, 2}, unit_square()));
}

TEST(PointInPolygon, BoundaryCountsAsInside) {
  EXPECT_TRUE(geom::point_in_polygon({1.0, 0.5}, unit_square()));
  EXPECT_TRUE(geom::point_in_polygon({0.0, 0.0}, unit_square()));
}

TEST(PointInPolygon, MatchesWindingNumberOffBoundary) {
  Rng rng(11);
  int checked = 0;
  for (int k = 0; k < 20; ++k) {
    const Polygon poly = star(rng);
    ASSERT_TRUE(geom::is_valid(poly));
    for (int i = 0; i < 1000; ++i) {
      const Point2 p{rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2)};
      if (geom::distance_to_polygon(p, poly) == 0.0 && geom::on_boundary(p, poly, 1e-9)) continue;
      EXPECT_EQ(geom::point_in_polygon(p, poly), winding_number(p, poly) != 0) << p.x << "," << p.y;
      ++checked;
    }
  }
  EXPECT_GT(checked, 19000);
}

TEST(Angles, WrapIntoHalfOpenInterval) {
  EXPECT_DOUBLE_EQ(geom::wrap_angle(std::numbers::pi), std::numbers::pi);
  EXPECT_DOUBLE_EQ(geom::wrap_angle(-std::numbers::pi), std::numbers::pi);
  EXPECT_NEAR(geom::wrap_angle(3 * std::numbers::pi / 2), -std::numbers::pi / 2, 1e-12);
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double a = geom::wrap_angle(rng.uniform(-50, 50));
    EXPECT_GT(a, -std::numbers::pi);
    EXPECT_LE(a, std::numbers::pi);
  }
}

TEST(Polygon, AreaAndCentroid) {
  EXPECT_DOUBLE_EQ(geom::area(unit_square()), 1.0);
  const Point2 c = geom::centroid(unit_square());
  EXPECT_DOUBLE_EQ(c.x, 0.5);
  EXPECT_DOUBLE_EQ(c.y, 0.5);
}

TEST(Polygon, BowtieIsNotSimple) {
  const Polygon bowtie{{{0, 0}, {1, 1}, {1, 0}, {0, 1}}};
  EXPECT_FALSE(geom::is_simple(bowtie));
  EXPECT_TRUE(geom::is_simple(unit_square()));
}

TEST(Rasterize, EmptyListGivesZeroMap) {
  const geom::Rect b{{0, 0}, {100, 100}};
  const auto m = world::rasterize_landmarks({}, b, 16);
  EXPECT_EQ(m.size, 16);
  EXPECT_EQ(m.fill_fraction(), 0.0);
}

TEST(Rasterize, FullCoverGivesAllOnes) {
  const geom::Rect b{{0, 0}, {100, 100}};
  world::Landmark lm{"L0", {"plaza"}, Polygon{{{0, 0}, {100, 0}, {100, 100}, {0, 100}}}};
  EXPECT_EQ(world::rasterize_landmarks({lm}, b, 16).fill_fraction(), 1.0);
}

TEST(Rasterize, HalfTriangleFraction) {
  const geom::Rect b{{0, 0}, {100, 100}};
  world::Landmark lm{"L0", {"plaza"}, Polygon{{{0, 0}, {100, 0}, {100, 100}}}};
  EXPECT_NEAR(world::rasterize_landmarks({lm}, b, 64).fill_fraction(), 0.5, 2.0 / 64);
}

TEST(Rasterize, UnionIsElementwiseMax) {
  Rng rng(5);
  const geom::Rect b{{-1.5, -1.5}, {1.5, 1.5}};
  for (int k = 0; k < 20; ++k) {
    Polygon a = star(rng), c = star(rng);
    for (auto& v : c.vertices) v = v + Point2{0.5, 0.3};
    const Polygon* pa[] = {&a};
    const Polygon* pc[] = {&c};
    const Polygon* both[] = {&a, &c};
    const auto ma = geom::rasterize_polygons(pa, b, 24);
    const auto mc = geom::rasterize_polygons(pc, b, 24);
    const auto mu = geom::rasterize_polygons(both, b, 24);
    for (std::size_t i = 0; i < mu.cells.size(); ++i) {
      EXPECT_EQ(mu.cells[i], std::max(ma.cells[i], mc.cells[i]));
      EXPECT_GE(mu.cells[i], ma.cells[i]);
    }
  }
}

TEST(Rasterize, CellsFollowCenterRule) {
  const geom::Rect b{{0, 0}, {40, 40}};
  const Polygon p{{{0, 0}, {20, 0}, {20, 40}, {0, 40}}};
  const Polygon* ps[] = {&p};
  const auto m = geom::rasterize_polygons(ps, b, 4);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) EXPECT_EQ(m.at(r, c), c < 2 ? 1.0 : 0.0);
  }
}
