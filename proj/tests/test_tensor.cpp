#include "lrf/random.hpp"
#include "lrf/tensor.hpp"

#include <gtest/gtest.h>

using namespace lrf;

TEST(Shape4, RejectsNonPositiveExtents) {
  EXPECT_THROW(Shape4(0, 1, 1, 1), std::invalid_argument);
  EXPECT_THROW(Shape4(1, 1, -2, 1), std::invalid_argument);
  EXPECT_EQ(Shape4(2, 3, 4, 5).size(), 120);
}

TEST(DenseTensor, SlicesAreContiguousRowMajorBlocks) {
  Tensor x(Shape4{2, 3, 4, 5});
  x.slice(1, 2)(3, 4) = 7.0;
  EXPECT_EQ(x(1, 2, 3, 4), 7.0);
  EXPECT_EQ(x.flat()[x.size() - 1], 7.0);
  EXPECT_THROW(x.slice(2, 0), std::out_of_range);
}

TEST(DenseTensor, FromSliceCopiesValues) {
  RowMatrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const Tensor t = Tensor::from_slice(m);
  EXPECT_EQ(t.shape(), Shape4(1, 1, 2, 3));
  EXPECT_EQ(max_abs_diff(t.slice(0, 0), m), 0.0);
}

TEST(SpikeTensor, RejectsNonBinaryValues) {
  Tensor t(Shape4{1, 1, 2, 2});
  t.flat() << 0, 1, 1, 0.5;
  EXPECT_THROW(SpikeTensor{t}, std::domain_error);
  t.flat()[3] = 1.0;
  EXPECT_NO_THROW(SpikeTensor{t});
}

TEST(SpikeTensor, ThresholdIsInclusive) {
  Tensor t(Shape4{1, 1, 1, 3});
  t.flat() << 0.99, 1.0, 2.0;
  const SpikeTensor s = SpikeTensor::threshold(t, 1.0);
  EXPECT_EQ(s(0, 0, 0, 0), 0.0);
  EXPECT_EQ(s(0, 0, 0, 1), 1.0);
  EXPECT_EQ(s(0, 0, 0, 2), 1.0);
}

TEST(TokenGrid, ManhattanDistanceExamples) {
  const TokenGrid g44(4, 4);
  EXPECT_EQ(manhattan_distance(g44, 0, 0), 0);
  EXPECT_EQ(manhattan_distance(g44, 0, 5), 2);
  EXPECT_EQ(manhattan_distance(TokenGrid(1, 7), 2, 6), 4);
  EXPECT_THROW(manhattan_distance(g44, 0, 16), std::domain_error);
}

TEST(TokenGrid, ManhattanDistanceIsAMetric) {
  const TokenGrid g(5, 6);
  for (Index i = 0; i < g.size(); ++i) {
    for (Index j = 0; j < g.size(); ++j) {
      EXPECT_EQ(manhattan_distance(g, i, j), manhattan_distance(g, j, i));
      EXPECT_EQ(manhattan_distance(g, i, j) == 0, i == j);
    }
  }
}

TEST(TokenGrid, NeighborIndexExamples) {
  EXPECT_EQ(neighbor_index(TokenGrid(3, 3), 4, {0, 0}), 4);
  EXPECT_FALSE(neighbor_index(TokenGrid(3, 3), 0, {-1, 0}).has_value());
  EXPECT_FALSE(neighbor_index(TokenGrid(5, 5), 12, {3, -3}).has_value());
  EXPECT_EQ(neighbor_index(TokenGrid(5, 5), 12, {-2, 2}), 4);
}

TEST(TokenGrid, RoundTripsRasterOrder) {
  const TokenGrid g(3, 7);
  for (Index n = 0; n < g.size(); ++n) {
    EXPECT_EQ(g.grid_to_token(g.token_to_grid(n)), n);
  }
  EXPECT_THROW(g.grid_to_token({3, 0}), std::domain_error);
}

TEST(TokenGrid, NearSquareFactorisation) {
  EXPECT_EQ(TokenGrid::near_square(64).rows(), 8);
  EXPECT_EQ(TokenGrid::near_square(12).rows(), 3);
  EXPECT_EQ(TokenGrid::near_square(12).cols(), 4);
  EXPECT_EQ(TokenGrid::near_square(13).rows(), 1);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.normal(), b.normal());
  }
  EXPECT_NE(Rng::derive(1, 0, 0), Rng::derive(1, 0, 1));
  EXPECT_NE(Rng::derive(1, 0, 0), Rng::derive(1, 1, 0));
}

TEST(Rng, UniformStaysInRange) {
  Rng r(7);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  EXPECT_GE(lo, 0.0);
  EXPECT_LT(hi, 1.0);
}

TEST(MaxRelDiff, FloorsZeroReferenceEntries) {
  Vector ref(3), a(3);
  ref << 0.0, 1.0, 2.0;
  a << 1e-12, 1.0, 2.0;
  EXPECT_LT(max_rel_diff(a, ref), 1e-3);
}
