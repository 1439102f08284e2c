#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "biatrium/geometry.hpp"
#include "oracles.hpp"

using namespace biatrium;

namespace {

// Each voxel stores its own linear index + 1 so provenance survives any
// sequence of crops and pads (0 marks fill).
Volume index_volume(const Shape3& s) {
  Volume v(s, {1.0, 1.0, 1.0});
  for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = static_cast<float>(i + 1);
  return v;
}

Grid<std::int32_t> index_grid(const Shape3& s) {
  Grid<std::int32_t> g(s, {1.0, 1.0, 1.0});
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = static_cast<std::int32_t>(i + 1);
  return g;
}

}  // namespace

TEST(Standardize, ChallengeResolution) {
  Volume v({640, 640, 44}, {0.625, 0.625, 2.5}, 1.0f);
  const auto [out, p] = standardize(v, {576, 576, 48});
  EXPECT_EQ(out.shape(), (Shape3{576, 576, 48}));
  EXPECT_EQ(p.offset, (Index3{32, 32, -2}));
  EXPECT_EQ(p.parent_shape, (Shape3{640, 640, 44}));
  EXPECT_EQ(out.spacing(), v.spacing());
  // z padding: 2 slices low, 2 high.
  EXPECT_EQ(out(0, 0, 0), 0.0f);
  EXPECT_EQ(out(0, 0, 1), 0.0f);
  EXPECT_EQ(out(0, 0, 2), 1.0f);
  EXPECT_EQ(out(0, 0, 45), 1.0f);
  EXPECT_EQ(out(0, 0, 46), 0.0f);
}

TEST(Standardize, IdentityWhenAlreadyStandard) {
  std::mt19937 rng(1);
  const Volume v = oracle::random_volume(rng, {16, 12, 8});
  const auto [out, p] = standardize(v, {16, 12, 8});
  EXPECT_EQ(p.offset, (Index3{0, 0, 0}));
  EXPECT_EQ(out, v);
}

TEST(Standardize, OddDifferenceGoesHigh) {
  const Volume v = index_volume({577, 2, 2});
  const auto [out, p] = standardize(v, {576, 2, 2});
  EXPECT_EQ(p.offset[0], 0);  // crop 0 low, 1 high
  EXPECT_EQ(out(0, 0, 0), v(0, 0, 0));
  EXPECT_EQ(out(575, 0, 0), v(575, 0, 0));

  const auto [padded, q] = standardize(index_volume({4, 1, 1}), {7, 1, 1});
  EXPECT_EQ(q.offset[0], -1);  // pad 1 low, 2 high
  EXPECT_EQ(padded(0, 0, 0), 0.0f);
  EXPECT_EQ(padded(1, 0, 0), 1.0f);
  EXPECT_EQ(padded(5, 0, 0), 0.0f);
}

TEST(Standardize, RejectsNonPositiveTarget) {
  Volume v({4, 4, 4}, {1.0, 1.0, 1.0});
  EXPECT_THROW(standardize(v, {0, 4, 4}), Error);
}

TEST(Downsample, StandardToCoarseGrid) {
  Volume v({576, 576, 48}, {0.625, 0.625, 2.5}, 3.0f);
  const Volume out = downsample_mean(v, {4, 4, 1});
  EXPECT_EQ(out.shape(), (Shape3{144, 144, 48}));
  EXPECT_EQ(out.spacing(), (Spacing3{2.5, 2.5, 2.5}));
  for (float x : out.data()) ASSERT_EQ(x, 3.0f);
}

TEST(Downsample, BlockMean) {
  Volume v({2, 2, 1}, {1.0, 1.0, 1.0}, std::vector<float>{0, 1, 2, 3});
  const Volume out = downsample_mean(v, {2, 2, 1});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.data()[0], 1.5f);
}

TEST(Downsample, NonDivisibleRejected) {
  Volume v({5, 4, 1}, {1.0, 1.0, 1.0});
  EXPECT_THROW(downsample_mean(v, {2, 2, 1}), Error);
}

TEST(Downsample, GlobalMeanPreserved) {
  std::mt19937 rng(2);
  for (int t = 0; t < 20; ++t) {
    const Index3 f{1 + static_cast<int>(rng() % 4), 1 + static_cast<int>(rng() % 4), 1 + static_cast<int>(rng() % 2)};
    const Volume v = oracle::random_volume(rng, {f[0] * 7, f[1] * 5, f[2] * 3}, 0.0f, 1000.0f);
    const Volume out = downsample_mean(v, f);
    const double a = std::accumulate(v.data().begin(), v.data().end(), 0.0) / v.size();
    const double b = std::accumulate(out.data().begin(), out.data().end(), 0.0) / out.size();
    EXPECT_NEAR(a, b, 1e-6 * std::fabs(a));
  }
}

TEST(BBox, Singleton) {
  LabelMap m({10, 10, 10}, {1.0, 1.0, 1.0}, 0);
  m(5, 6, 7) = 2;
  const BBox b = bbox_from_mask(m, std::vector<std::uint8_t>{2});
  EXPECT_EQ(b.lo, (Index3{5, 6, 7}));
  EXPECT_EQ(b.hi, (Index3{6, 7, 8}));
}

TEST(BBox, FullVolume) {
  LabelMap m({4, 3, 2}, {1.0, 1.0, 1.0}, 1);
  const BBox b = bbox_from_mask(m, std::vector<std::uint8_t>{1});
  EXPECT_EQ(b.lo, (Index3{0, 0, 0}));
  EXPECT_EQ(b.hi, (Index3{4, 3, 2}));
}

TEST(BBox, TwoVoxels) {
  LabelMap m({12, 12, 12}, {1.0, 1.0, 1.0}, 0);
  m(1, 1, 1) = 1;
  m(9, 3, 2) = 3;
  const BBox b = bbox_from_mask(m, std::vector<std::uint8_t>{1, 3});
  EXPECT_EQ(b.lo, (Index3{1, 1, 1}));
  EXPECT_EQ(b.hi, (Index3{10, 4, 3}));
}

TEST(BBox, EmptyMaskIsNoForeground) {
  LabelMap m({4, 4, 4}, {1.0, 1.0, 1.0}, 0);
  try {
    bbox_from_mask(m, std::vector<std::uint8_t>{1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::no_foreground);
  }
}

TEST(BBox, TightAgainstBruteForce) {
  std::mt19937 rng(3);
  for (int t = 0; t < 50; ++t) {
    const LabelMap m = oracle::random_labels(rng, {9, 8, 7}, {1, 1, 1}, 4);
    const std::vector<std::uint8_t> pos{2, 3};
    bool any = false;
    Index3 lo{99, 99, 99}, hi{-1, -1, -1};
    for (int x = 0; x < 9; ++x)
      for (int y = 0; y < 8; ++y)
        for (int z = 0; z < 7; ++z)
          if (m(x, y, z) == 2 || m(x, y, z) == 3) {
            any = true;
            lo = {std::min(lo[0], x), std::min(lo[1], y), std::min(lo[2], z)};
            hi = {std::max(hi[0], x + 1), std::max(hi[1], y + 1), std::max(hi[2], z + 1)};
          }
    if (!any) {
      EXPECT_THROW(bbox_from_mask(m, pos), Error);
      continue;
    }
    const BBox b = bbox_from_mask(m, pos);
    EXPECT_EQ(b.lo, lo);
    EXPECT_EQ(b.hi, hi);
  }
}

TEST(CropWindow, CenteredFullWindowIsIdentity) {
  std::mt19937 rng(4);
  const Volume v = oracle::random_volume(rng, {10, 8, 6});
  const auto [out, p] = crop_window(v, {5, 4, 3}, {10, 8, 6});
  EXPECT_EQ(p.offset, (Index3{0, 0, 0}));
  EXPECT_EQ(out, v);
}

TEST(CropWindow, ClampedAtOrigin) {
  const Placement p = window_placement({576, 576, 48}, {0, 0, 0}, {256, 256, 48});
  EXPECT_EQ(p.offset, (Index3{0, 0, 0}));
  const Placement q = window_placement({576, 576, 48}, {575, 575, 47}, {256, 256, 48});
  EXPECT_EQ(q.offset, (Index3{320, 320, 0}));
}

TEST(CropWindow, CenterFromCoarseBox) {
  // Coarse box [30, 50) x [40, 60) x [10, 30) on the 144-grid.
  const BBox coarse{{30, 40, 10}, {50, 60, 30}};
  const BBox fine = scale_bbox(coarse, {4, 4, 1}, 0, {576, 576, 48});
  EXPECT_EQ(fine.lo, (Index3{120, 160, 10}));
  EXPECT_EQ(fine.hi, (Index3{200, 240, 30}));
  EXPECT_EQ(fine.center(), (Index3{160, 200, 20}));
  const Placement p = window_placement({576, 576, 48}, fine.center(), {256, 256, 48});
  EXPECT_EQ(p.offset, (Index3{32, 72, 0}));
  const BBox window{p.offset, {p.offset[0] + 256, p.offset[1] + 256, 48}};
  EXPECT_TRUE(window.contains(fine));
}

TEST(CropWindow, OversizedWindowPadsSymmetrically) {
  const Placement p = window_placement({100, 40, 20}, {3, 3, 3}, {64, 64, 48});
  EXPECT_EQ(p.offset, (Index3{0, -12, -14}));
}

TEST(CropWindow, AlwaysRequestedShape) {
  std::mt19937 rng(5);
  for (int t = 0; t < 100; ++t) {
    const Shape3 parent{1 + static_cast<int>(rng() % 20), 1 + static_cast<int>(rng() % 20),
                        1 + static_cast<int>(rng() % 20)};
    const Shape3 window{1 + static_cast<int>(rng() % 25), 1 + static_cast<int>(rng() % 25),
                        1 + static_cast<int>(rng() % 25)};
    const Index3 center{static_cast<int>(rng() % 40) - 10, static_cast<int>(rng() % 40) - 10,
                        static_cast<int>(rng() % 40) - 10};
    const auto [out, p] = crop_window(Volume(parent, {1, 1, 1}), center, window);
    ASSERT_EQ(out.shape(), window);
  }
}

TEST(CropWindow, RejectsNonPositiveWindow) {
  EXPECT_THROW(crop_window(Volume({4, 4, 4}, {1, 1, 1}), {1, 1, 1}, {0, 2, 2}), Error);
}

TEST(Stitch, RestoresInWindowVoxels) {
  std::mt19937 rng(6);
  const LabelMap m = oracle::random_labels(rng, {20, 18, 10}, {1, 1, 1}, 4);
  const Placement p = window_placement(m.shape(), {12, 9, 5}, {8, 8, 6});
  const LabelMap child = extract<std::uint8_t>(m, p, 0);
  const LabelMap back = stitch(child, p);
  long inside_nonzero = 0, restored_nonzero = 0;
  for_each_index(m.shape(), [&](int x, int y, int z) {
    const Index3 c{x - p.offset[0], y - p.offset[1], z - p.offset[2]};
    const bool inside = child.contains(c);
    if (inside) {
      ASSERT_EQ(back(x, y, z), m(x, y, z));
      inside_nonzero += m(x, y, z) != 0;
    } else {
      ASSERT_EQ(back(x, y, z), 0);
    }
    restored_nonzero += back(x, y, z) != 0;
  });
  EXPECT_EQ(inside_nonzero, restored_nonzero);
}

TEST(Stitch, ShapeMismatchRejected) {
  const LabelMap child({3, 3, 3}, {1, 1, 1}, 1);
  const Placement p{{10, 10, 10}, {0, 0, 0}, {4, 4, 4}};
  EXPECT_THROW(stitch(child, p), Error);
}

TEST(Stitch, ComposedIndexTracking) {
  std::mt19937 rng(7);
  for (int t = 0; t < 50; ++t) {
    const Shape3 orig{4 + static_cast<int>(rng() % 30), 4 + static_cast<int>(rng() % 30),
                      2 + static_cast<int>(rng() % 12)};
    const Shape3 standard{4 + static_cast<int>(rng() % 30), 4 + static_cast<int>(rng() % 30),
                          2 + static_cast<int>(rng() % 12)};
    const Shape3 window{1 + static_cast<int>(rng() % 20), 1 + static_cast<int>(rng() % 20),
                        1 + static_cast<int>(rng() % 14)};
    const Index3 center{static_cast<int>(rng() % standard[0]), static_cast<int>(rng() % standard[1]),
                        static_cast<int>(rng() % standard[2])};
    const auto ids = index_grid(orig);
    const Placement sp = centered_placement(orig, standard);
    const auto on_standard = extract<std::int32_t>(ids, sp, 0);
    const Placement cp = window_placement(standard, center, window);
    const auto child = extract<std::int32_t>(on_standard, cp, 0);
    const auto back = stitch<std::int32_t>(stitch<std::int32_t>(child, cp, 0), sp, 0);
    ASSERT_EQ(back.shape(), orig);
    // Every child voxel that carries an id lands exactly on that id's voxel.
    long carried = 0;
    for (std::int32_t id : child.data()) carried += id != 0;
    long restored = 0;
    for (std::size_t i = 0; i < back.size(); ++i)
      if (back.data()[i] != 0) {
        ASSERT_EQ(back.data()[i], static_cast<std::int32_t>(i + 1));
        ++restored;
      }
    ASSERT_EQ(carried, restored);
  }
}
