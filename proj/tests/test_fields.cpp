#include <gtest/gtest.h>

#include <random>

#include "plasmaviz/fields.hpp"
#include "support.hpp"

using namespace plasmaviz;
using testsupport::cube_dims;

namespace {

VectorField random_vector(const GridDims& d, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  std::vector<float> x(d.node_count()), y(d.node_count()), z(d.node_count());
  for (std::size_t n = 0; n < d.node_count(); ++n) {
    x[n] = u(rng);
    y[n] = u(rng);
    z[n] = u(rng);
  }
  return VectorField(d, x, y, z);
}

Vec3 trilinear_oracle(const VectorField& f, const Vec3& p) {
  const GridDims& d = f.dims();
  const double gx = (p[0] - d.origin[0]) / d.dx, gy = (p[1] - d.origin[1]) / d.dy, gz = (p[2] - d.origin[2]) / d.dz;
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(gx), d.nx - 2);
  const auto j = std::min<std::size_t>(static_cast<std::size_t>(gy), d.ny - 2);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(gz), d.nz - 2);
  const double u = gx - i, v = gy - j, w = gz - k;
  Vec3 out{0, 0, 0};
  for (int c = 0; c < 8; ++c) {
    const int a = c & 1, b = (c >> 1) & 1, e = (c >> 2) & 1;
    const double wt = (a ? u : 1 - u) * (b ? v : 1 - v) * (e ? w : 1 - w);
    out = out + f.at(i + a, j + b, k + e) * wt;
  }
  return out;
}

}  // namespace

TEST(LinearIndex, Examples) {
  GridDims d;
  EXPECT_EQ(linear_index(d, 0, 0, 0), 0u);
  EXPECT_EQ(linear_index(d, 1, 1, 1), 7u);
  EXPECT_THROW(linear_index(d, 2, 0, 0), Error);
  try {
    linear_index(d, 0, 0, 5);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::out_of_range);
  }
}

TEST(LinearIndex, MatchesEnumerationOrderAndIsBijective) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    GridDims d;
    d.nx = 2 + rng() % 6;
    d.ny = 2 + rng() % 6;
    d.nz = 2 + rng() % 6;
    std::size_t expected = 0;
    for (std::size_t k = 0; k < d.nz; ++k)
      for (std::size_t j = 0; j < d.ny; ++j)
        for (std::size_t i = 0; i < d.nx; ++i) EXPECT_EQ(linear_index(d, i, j, k), expected++);
    EXPECT_EQ(expected, d.node_count());
  }
}

TEST(GridDims, Validation) {
  GridDims d;
  d.nx = 1;
  EXPECT_THROW(d.validate(), Error);
  d = GridDims{};
  d.dy = 0;
  EXPECT_THROW(d.validate(), Error);
  EXPECT_NO_THROW(GridDims{}.validate());
}

TEST(Fields, RejectNonFiniteAndWrongLength) {
  GridDims d;
  std::vector<float> v(8, 0.f);
  v[3] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(ScalarField(d, v), Error);
  EXPECT_THROW(ScalarField(d, std::vector<float>(7)), Error);
  EXPECT_THROW(VectorField(d, std::vector<float>(8), std::vector<float>(8), std::vector<float>(9)), Error);
}

TEST(SampleVector, NodesAndMidpoints) {
  std::mt19937_64 rng(5);
  GridDims d = cube_dims(4, 0.5, {1, -2, 3});
  VectorField f = random_vector(d, rng);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t i = 0; i < 4; ++i) {
        auto s = sample_vector(f, d.node_position(i, j, k));
        ASSERT_TRUE(s);
        for (int c = 0; c < 3; ++c) EXPECT_NEAR((*s)[c], f.at(i, j, k)[c], 1e-12);
      }
  const Vec3 mid = (d.node_position(1, 2, 3) + d.node_position(2, 2, 3)) * 0.5;
  auto s = sample_vector(f, mid);
  ASSERT_TRUE(s);
  const Vec3 expect = (f.at(1, 2, 3) + f.at(2, 2, 3)) * 0.5;
  for (int c = 0; c < 3; ++c) EXPECT_NEAR((*s)[c], expect[c], 1e-12);
}

TEST(SampleVector, MatchesBruteForceTrilinear) {
  std::mt19937_64 rng(11);
  GridDims d = cube_dims(4, 1.5, {-1, 0, 2});
  VectorField f = random_vector(d, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 2000; ++n) {
    Vec3 p;
    for (int c = 0; c < 3; ++c) p[c] = d.origin[c] + u(rng) * 3 * 1.5;
    auto s = sample_vector(f, p);
    ASSERT_TRUE(s);
    const Vec3 o = trilinear_oracle(f, p);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR((*s)[c], o[c], 1e-12);
  }
}

TEST(SampleVector, OutsideIsDomainExit) {
  GridDims d;
  VectorField f(d, std::vector<float>(8, 1.f), std::vector<float>(8), std::vector<float>(8));
  EXPECT_FALSE(sample_vector(f, {-1e-9, 0.5, 0.5}));
  EXPECT_FALSE(sample_vector(f, {0.5, 1.0 + 1e-9, 0.5}));
  EXPECT_TRUE(sample_vector(f, {1.0, 1.0, 1.0}));
}

TEST(FieldMinMax, Examples) {
  const GridDims d4 = cube_dims(4);
  EXPECT_EQ(field_minmax(testsupport::make_scalar(d4, [](auto, auto, auto) { return 2.5; })), (MinMax{2.5, 2.5}));
  EXPECT_EQ(field_minmax(testsupport::make_scalar(d4, [](auto i, auto, auto) { return double(i); })), (MinMax{0, 3}));
  std::mt19937_64 rng(2);
  const ScalarField f = testsupport::random_scalar(cube_dims(16), rng, -5.f, 7.f);
  float lo = f.values()[0], hi = lo;
  for (float v : f.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_EQ(field_minmax(f), (MinMax{lo, hi}));
}

TEST(FrameSeries, LazyLoadsOnDemandAndEvicts) {
  std::atomic<int> loads{0};
  FrameSeries<int> s(10, LoadPolicy::lazy, [&](std::size_t k) {
    ++loads;
    return std::make_shared<const int>(static_cast<int>(k) * 2);
  }, 2);
  EXPECT_EQ(loads, 0);
  EXPECT_EQ(*s.get(3), 6);
  EXPECT_EQ(*s.get(3), 6);
  EXPECT_EQ(loads, 1);
  s.get(4);
  s.get(5);
  s.get(3);
  EXPECT_EQ(loads, 4);
  EXPECT_THROW(s.get(10), Error);
}

TEST(FrameSeries, EagerLoadsEverything) {
  int loads = 0;
  FrameSeries<int> s(3, LoadPolicy::eager, [&](std::size_t k) {
    ++loads;
    return std::make_shared<const int>(static_cast<int>(k));
  });
  EXPECT_EQ(loads, 3);
  EXPECT_EQ(*s.get(2), 2);
  EXPECT_EQ(loads, 3);
}
