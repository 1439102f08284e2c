#include <gtest/gtest.h>

#include <numbers>
#include <set>

#include "biatrium/phantom.hpp"

using namespace biatrium;

namespace {

PhantomSpec small_spec() {
  PhantomSpec s;
  s.shape = {96, 96, 24};
  s.spacing = {1.0, 1.0, 2.0};
  s.left_atrium = {{30.0, 48.0, 24.0}, {12.0, 10.0, 12.0}};
  s.right_atrium = {{62.0, 48.0, 24.0}, {12.0, 10.0, 12.0}};
  s.wall_thickness_mm = 2.0;
  return s;
}

long count(const LabelMap& m, std::uint8_t c) { return std::count(m.data().begin(), m.data().end(), c); }

double ellipsoid_volume(const Ellipsoid& e) {
  return 4.0 / 3.0 * std::numbers::pi * e.radii_mm[0] * e.radii_mm[1] * e.radii_mm[2];
}

}  // namespace

TEST(Phantom, NoiseFreeLevels) {
  const auto [img, gt] = generate_phantom(small_spec());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const float v = img.data()[i];
    const auto c = gt.data()[i];
    ASSERT_EQ(v, c == 0 ? 0.1f : c == 1 ? 0.5f : 0.9f);
  }
  const std::set<std::uint8_t> codes(gt.data().begin(), gt.data().end());
  EXPECT_EQ(codes, (std::set<std::uint8_t>{0, 1, 2, 3}));
}

TEST(Phantom, Deterministic) {
  auto s = small_spec();
  s.noise_amplitude = 0.05;
  s.seed = 42;
  const auto a = generate_phantom(s);
  const auto b = generate_phantom(s);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  s.seed = 43;
  EXPECT_FALSE(generate_phantom(s).first == a.first);
}

TEST(Phantom, NoiseKeepsClassRangesDisjoint) {
  auto s = small_spec();
  s.noise_amplitude = 0.19;
  s.seed = 5;
  const auto [img, gt] = generate_phantom(s);
  float lo[3] = {INFINITY, INFINITY, INFINITY}, hi[3] = {-INFINITY, -INFINITY, -INFINITY};
  for (std::size_t i = 0; i < img.size(); ++i) {
    const int k = std::min<int>(gt.data()[i], 2);
    lo[k] = std::min(lo[k], img.data()[i]);
    hi[k] = std::max(hi[k], img.data()[i]);
  }
  EXPECT_LT(hi[0], lo[1]);
  EXPECT_LT(hi[1], lo[2]);
}

TEST(Phantom, CavityVolumeMatchesEllipsoid) {
  for (const auto& s : {small_spec(), PhantomSpec{}}) {
    const auto [img, gt] = generate_phantom(s);
    const double vox = s.spacing[0] * s.spacing[1] * s.spacing[2];
    EXPECT_NEAR(count(gt, s.left_atrium_code) * vox / ellipsoid_volume(s.left_atrium), 1.0, 0.05);
    EXPECT_NEAR(count(gt, s.right_atrium_code) * vox / ellipsoid_volume(s.right_atrium), 1.0, 0.05);
  }
}

TEST(Phantom, DefaultGeometry) {
  const auto [img, gt] = generate_phantom(PhantomSpec{});
  EXPECT_EQ(img.shape(), (Shape3{640, 640, 44}));
  EXPECT_EQ(gt.spacing(), (Spacing3{0.625, 0.625, 2.5}));
  EXPECT_GT(count(gt, 1), 0);
}

TEST(Phantom, CavitiesEnclosedByWall) {
  const auto [img, gt] = generate_phantom(small_spec());
  const int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for_each_index(gt.shape(), [&](int x, int y, int z) {
    const auto c = gt(x, y, z);
    if (c < 2) return;
    for (const auto& d : nb) {
      const auto n = gt(x + d[0], y + d[1], z + d[2]);
      ASSERT_TRUE(n == c || n == 1) << x << "," << y << "," << z;
    }
  });
}

TEST(Phantom, ThickerWallHasMoreVoxels) {
  auto thin = small_spec(), thick = small_spec();
  thick.wall_thickness_mm = 4.0;
  EXPECT_LT(count(generate_phantom(thin).second, 1), count(generate_phantom(thick).second, 1));
}

TEST(Phantom, OverlapRejected) {
  auto s = small_spec();
  s.right_atrium.center_mm[0] = 40.0;
  EXPECT_THROW(generate_phantom(s), Error);
  s.right_atrium.center_mm[0] = 55.0;  // cavities apart but walls collide with the other cavity
  EXPECT_THROW(generate_phantom(s), Error);
}

TEST(Phantom, InvalidSpecs) {
  auto s = small_spec();
  s.left_atrium.radii_mm[1] = 0.0;
  EXPECT_THROW(generate_phantom(s), Error);
  s = small_spec();
  s.left_atrium.center_mm[0] = 5.0;
  EXPECT_THROW(generate_phantom(s), Error);
  s = small_spec();
  s.noise_amplitude = 0.3;
  EXPECT_THROW(generate_phantom(s), Error);
}

TEST(Phantom, JsonSpec) {
  const auto s = phantom_spec_from_json(nlohmann::json::parse(
      R"({"shape":[96,96,24],"spacing":[1,1,2],"wall_thickness_mm":2,
          "left_atrium":{"center_mm":[30,48,24],"radii_mm":[12,10,12]},
          "right_atrium":{"center_mm":[62,48,24],"radii_mm":[12,10,12]},"seed":3})"));
  EXPECT_EQ(s.shape, (Shape3{96, 96, 24}));
  EXPECT_EQ(s.seed, 3u);
  EXPECT_THROW(phantom_spec_from_json(nlohmann::json::parse(R"({"radius":3})")), Error);
}
