#include <gtest/gtest.h>

#include "hett/gradcheck.hpp"
#include "hett/history_grid.hpp"
#include "oracles.hpp"

using namespace hett;
using nn::Tensor;

namespace {

const geom::Rect kBounds{{0, 0}, {100, 100}};

Tensor rand_tensor(nn::Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(nn::numel(shape));
  for (double& x : v) x = rng.uniform(-scale, scale);
  return Tensor::from(std::move(shape), std::move(v), true);
}

std::vector<double> row(const Tensor& t, int r, int d) {
  return {t.data().begin() + r * d, t.data().begin() + (r + 1) * d};
}

}  // namespace

TEST(CellIndex, Examples) {
  EXPECT_EQ(grid::cell_index({0, 0}, kBounds, 5), (grid::CellIndex{0, 0}));
  EXPECT_EQ(grid::cell_index({100, 100}, kBounds, 5), (grid::CellIndex{4, 4}));
  EXPECT_EQ(grid::cell_index({50, 10}, kBounds, 5), (grid::CellIndex{2, 0}));
}

TEST(Insert, CountsRecords) {
  grid::HistoryGridMap map(kBounds, 5, 4);
  Rng rng(1);
  map.insert(rand_tensor({4}, rng), {10, 10}, 0);
  int nonempty = 0;
  for (int c = 0; c < map.cell_count(); ++c) nonempty += !map.cell(c).empty();
  EXPECT_EQ(nonempty, 1);
  map.insert(rand_tensor({4}, rng), {12, 15}, 1);
  EXPECT_EQ(map.cell(grid::CellIndex{0, 0}).size(), 2u);
  for (int t = 2; t < 10; ++t) map.insert(rand_tensor({4}, rng), {rng.uniform(0, 100), rng.uniform(0, 100)}, t);
  EXPECT_EQ(map.total_records(), 10u);
  EXPECT_THROW(map.insert(rand_tensor({3}, rng), {1, 1}, 11), Error);
  for (int c = 0; c < map.cell_count(); ++c)
    for (const auto& r : map.cell(c)) EXPECT_EQ(map.flat_index(grid::cell_index(r.position, kBounds, 5)), c);
}

TEST(Aggregate, SingleAndIdenticalRecords) {
  Rng rng(2);
  grid::HistoryGridMap map(kBounds, 2, 3);
  const Tensor m = rand_tensor({3}, rng);
  map.insert(m, {10, 10}, 0);
  for (int i = 0; i < 4; ++i) map.insert(m, {80, 80}, i);
  const Tensor e = rand_tensor({5, 3}, rng), empty = rand_tensor({3}, rng);
  const auto g = grid::aggregate(map, e, empty);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(g.tokens.at(k), m.at(k));
    EXPECT_NEAR(g.tokens.at(3 * 3 + k), m.at(k), 1e-15);
    EXPECT_EQ(g.tokens.at(1 * 3 + k), empty.at(k));
  }
  EXPECT_TRUE(g.empty[1]);
  EXPECT_FALSE(g.empty[0]);
}

TEST(Aggregate, MatchesLoopOracle) {
  Rng rng(3);
  grid::HistoryGridMap map(kBounds, 1, 4);
  std::vector<std::vector<double>> feats;
  for (int j = 0; j < 3; ++j) {
    const Tensor f = rand_tensor({4}, rng, 2.0);
    feats.emplace_back(f.data().begin(), f.data().end());
    map.insert(f, {50, 50}, j);
  }
  const Tensor e = rand_tensor({2, 4}, rng, 2.0);
  const auto g = grid::aggregate(map, e, rand_tensor({4}, rng));
  const auto ref = oracle::grid_cell(feats, {row(e, 0, 4), row(e, 1, 4)});
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(g.weights[0][j], ref.weights[j], 1e-10);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(g.tokens.at(k), ref.token[k], 1e-10);
}

TEST(Aggregate, PermutationInvariantAndLocal) {
  Rng rng(4);
  const Tensor e = rand_tensor({3, 4}, rng), empty = rand_tensor({4}, rng);
  std::vector<Tensor> fs;
  for (int j = 0; j < 4; ++j) fs.push_back(rand_tensor({4}, rng));
  grid::HistoryGridMap a(kBounds, 3, 4), b(kBounds, 3, 4);
  for (int j = 0; j < 4; ++j) a.insert(fs[j], {10, 10}, j);
  for (int j = 3; j >= 0; --j) b.insert(fs[j], {10, 10}, j);
  const auto ta = grid::aggregate(a, e, empty), tb = grid::aggregate(b, e, empty);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(ta.tokens.at(k), tb.tokens.at(k), 1e-14);
  a.insert(rand_tensor({4}, rng), {90, 90}, 9);
  const auto tc = grid::aggregate(a, e, empty);
  for (int c = 0; c < 8; ++c)
    for (int k = 0; k < 4; ++k) EXPECT_EQ(tc.tokens.at(c * 4 + k), ta.tokens.at(c * 4 + k));
}

TEST(Aggregate, Gradients) {
  Rng rng(5);
  grid::HistoryGridMap map(kBounds, 2, 4);
  std::vector<nn::Parameter> params;
  for (int j = 0; j < 5; ++j) {
    const Tensor f = rand_tensor({4}, rng);
    params.push_back({"m" + std::to_string(j), f});
    map.insert(f, {j < 3 ? 10.0 : 70.0, 20.0}, j);
  }
  const Tensor e = rand_tensor({3, 4}, rng), empty = rand_tensor({4}, rng);
  params.push_back({"e", e});
  params.push_back({"empty", empty});
  Rng pr(6);
  std::vector<double> w(16);
  for (double& x : w) x = pr.uniform(-1, 1);
  const Tensor probe = Tensor::from({4, 4}, w);
  const auto rep = nn::finite_difference_check(
      [&] { return nn::sum(nn::mul(grid::aggregate(map, e, empty).tokens, probe)); }, params, {});
  EXPECT_TRUE(rep.passed) << rep.worst_param << " " << rep.max_relative_error;
}

TEST(Aggregate, RequiresInstructionWidth) {
  Rng rng(7);
  grid::HistoryGridMap map(kBounds, 2, 4);
  EXPECT_THROW(grid::aggregate(map, rand_tensor({2, 3}, rng), rand_tensor({4}, rng)), Error);
}
