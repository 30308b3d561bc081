#include <gtest/gtest.h>

#include <cmath>

#include "lgcp/lgcp.hpp"
#include "lgcp/rng.hpp"

using namespace lgcp;

TEST(Grid, NextPow2) {
  EXPECT_EQ(next_pow2(1), 1);
  EXPECT_EQ(next_pow2(2), 2);
  EXPECT_EQ(next_pow2(3), 4);
  EXPECT_EQ(next_pow2(64), 64);
  EXPECT_EQ(next_pow2(65), 128);
}

TEST(Grid, ExtendedSizes) {
  const Window w{0, 0, 100, 50};
  auto g = GridSpec::build(w, 32, 10);
  EXPECT_EQ(g.ext_nx(), 64);
  EXPECT_EQ(g.ext_ny(), 32);
  EXPECT_DOUBLE_EQ(g.cell_width(), 100.0 / 32);
  EXPECT_DOUBLE_EQ(g.cell_height(), 5.0);
  auto g4 = GridSpec::build(w, 10, 10, 2.5);
  EXPECT_EQ(g4.ext_nx(), 32);
  EXPECT_EQ(g4.n_ext(), 32u * 32u);
}

TEST(Grid, RejectsBadInput) {
  EXPECT_THROW(GridSpec::build({0, 0, 1, 1}, 0, 4), InvalidInput);
  EXPECT_THROW(GridSpec::build({0, 0, 1, 1}, 4, 4, 1.5), InvalidInput);
  EXPECT_THROW(GridSpec::build({0, 0, 0, 1}, 4, 4), InvalidInput);
}

TEST(Grid, LocateEdges) {
  auto g = GridSpec::build({0, 0, 100, 100}, 10, 10);
  EXPECT_EQ(g.locate(0, 0), 0u);
  EXPECT_EQ(g.locate(10, 0), 1u);  // left-closed
  EXPECT_EQ(g.locate(9.999999, 0), 0u);
  EXPECT_EQ(g.locate(100, 100), 99u);  // max edge snaps inward
  EXPECT_EQ(g.locate(100 + 5e-8, 50), g.obs_index(9, 5));
  EXPECT_FALSE(g.locate(100.01, 50));
  EXPECT_FALSE(g.locate(-1e-12, 50));
  EXPECT_FALSE(g.locate(std::nan(""), 50));
}

TEST(Grid, IndexRoundTrip) {
  auto g = GridSpec::build({0, 0, 3, 5}, 3, 5);
  for (std::size_t k = 0; k < g.n_obs(); ++k) {
    auto [ix, iy] = g.obs_coords(k);
    EXPECT_EQ(g.obs_index(ix, iy), k);
    EXPECT_EQ(g.ext_coords(g.ext_of_obs(k)), std::make_pair(ix, iy));
  }
}

TEST(Grid, TorusDistanceWraps) {
  auto g = GridSpec::build({0, 0, 8, 8}, 8, 8);
  const auto a = g.ext_index(0, 0);
  EXPECT_DOUBLE_EQ(g.torus_distance(a, g.ext_index(15, 0)), 1.0);
  EXPECT_DOUBLE_EQ(g.torus_distance(a, g.ext_index(8, 8)), std::hypot(8.0, 8.0));
  EXPECT_DOUBLE_EQ(g.torus_distance(g.ext_index(3, 4), g.ext_index(14, 1)),
                   g.torus_distance(g.ext_index(14, 1), g.ext_index(3, 4)));
}

TEST(Grid, BinningMatchesFloor) {
  auto g = GridSpec::build({-5, 2, 15, 12}, 7, 4);
  PointPattern p;
  p.window = g.window();
  Rng rng = make_stream(3, "bin");
  std::vector<int> expect(g.n_obs(), 0);
  for (int i = 0; i < 2000; ++i) {
    const double x = -5 + 20 * uniform01(rng), y = 2 + 10 * uniform01(rng);
    p.add(x, y);
    const int ix = static_cast<int>(std::floor((x + 5) / g.cell_width()));
    const int iy = static_cast<int>(std::floor((y - 2) / g.cell_height()));
    ++expect[g.obs_index(ix, iy)];
  }
  const CellCounts c = bin_points(p, g);
  EXPECT_EQ(c.total(), 2000);
  for (std::size_t k = 0; k < g.n_obs(); ++k) EXPECT_EQ(c.counts[g.ext_of_obs(k)], expect[k]);
  long off = 0;
  for (std::size_t k = 0; k < g.n_ext(); ++k)
    if (!c.observed[k]) off += c.counts[k];
  EXPECT_EQ(off, 0);
}

TEST(Grid, PatternValidation) {
  PointPattern p;
  p.window = {0, 0, 1, 1};
  p.add(0.5, 0.5);
  p.add(1.5, 0.5);
  EXPECT_THROW(p.validate(), InvalidInput);
  p.x[1] = 0.2;
  EXPECT_NO_THROW(p.validate());
  p.marks = {1};
  EXPECT_THROW(p.validate(), InvalidInput);
}

TEST(Grid, RegionMask) {
  auto g = GridSpec::build({0, 0, 2, 2}, 2, 2);
  RegionPartition part;
  part.region_of_cell = {1, 1, 2, 0};
  part.region_totals = {3, 4};
  part.offsets = {1, 1, 1, 1};
  const RegionMask m = region_mask(part, g);
  ASSERT_EQ(m.cells.size(), 2u);
  EXPECT_EQ(m.cells[0].size(), 2u);
  EXPECT_EQ(m.cells[1], std::vector<std::size_t>{2});
  EXPECT_EQ(m.outside, std::vector<std::size_t>{3});
  part.region_of_cell[3] = 5;
  EXPECT_THROW(region_mask(part, g), InvalidInput);
}
