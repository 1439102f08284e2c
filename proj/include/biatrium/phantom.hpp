#pragma once

// Synthetic bi-atrial phantom: two ellipsoidal cavities (left and right
// atrium), each wrapped in a wall shell, on a uniform background.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "biatrium/error.hpp"
#include "biatrium/grid.hpp"

namespace biatrium {

struct Ellipsoid {
  std::array<double, 3> center_mm{};
  std::array<double, 3> radii_mm{};

  // Voxel centers at index * spacing.
  bool contains(const Index3& v, const Spacing3& sp) const {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double d = (v[i] * sp[i] - center_mm[i]) / radii_mm[i];
      s += d * d;
    }
    return s <= 1.0;
  }
};

struct IntensityLevels {
  double background = 0.1;
  double wall = 0.5;
  double cavity = 0.9;
};

struct PhantomSpec {
  Shape3 shape{640, 640, 44};
  Spacing3 spacing{0.625, 0.625, 2.5};
  Ellipsoid left_atrium{{175.0, 200.0, 55.0}, {22.0, 20.0, 22.5}};
  Ellipsoid right_atrium{{232.0, 205.0, 55.0}, {20.0, 18.0, 20.0}};
  double wall_thickness_mm = 2.5;
  IntensityLevels levels;
  double noise_amplitude = 0.0;
  std::uint64_t seed = 0;
  std::uint8_t wall_code = 1;
  std::uint8_t right_atrium_code = 2;
  std::uint8_t left_atrium_code = 3;

  void validate() const {
    require_positive(shape, "phantom shape");
    for (double s : spacing)
      if (!(s > 0.0)) throw Error(Errc::invalid_argument, "phantom spacing must be > 0");
    if (!(wall_thickness_mm > 0.0)) throw Error(Errc::invalid_argument, "wall thickness must be > 0");
    if (!(noise_amplitude >= 0.0)) throw Error(Errc::invalid_argument, "noise amplitude must be >= 0");
    const double gap = std::min(std::fabs(levels.wall - levels.background), std::fabs(levels.cavity - levels.wall));
    if (noise_amplitude > 0.0 && !(2.0 * noise_amplitude < gap))
      throw Error(Errc::invalid_argument, "noise amplitude must be below half the smallest intensity gap");
    for (const auto* e : {&left_atrium, &right_atrium}) {
      for (int i = 0; i < 3; ++i) {
        if (!(e->radii_mm[i] > 0.0)) throw Error(Errc::invalid_argument, "ellipsoid radii must be > 0");
        const double extent = e->radii_mm[i] + wall_thickness_mm;
        if (e->center_mm[i] - extent < 0.0 || e->center_mm[i] + extent > (shape[i] - 1) * spacing[i])
          throw Error(Errc::invalid_argument, "ellipsoid plus wall does not fit inside the volume");
      }
    }
  }
};

namespace detail {

// Offsets (in voxels) within a ball of radius r mm under anisotropic spacing.
inline std::vector<Index3> ball_offsets(double r, const Spacing3& sp) {
  std::vector<Index3> out;
  Index3 reach;
  for (int i = 0; i < 3; ++i) reach[i] = static_cast<int>(std::floor(r / sp[i]));
  for (int dz = -reach[2]; dz <= reach[2]; ++dz)
    for (int dy = -reach[1]; dy <= reach[1]; ++dy)
      for (int dx = -reach[0]; dx <= reach[0]; ++dx) {
        const double d2 = dx * sp[0] * dx * sp[0] + dy * sp[1] * dy * sp[1] + dz * sp[2] * dz * sp[2];
        if (d2 <= r * r) out.push_back({dx, dy, dz});
      }
  // Face neighbors keep the shell closed when it is thinner than a voxel.
  for (const Index3 f : {Index3{1, 0, 0}, Index3{-1, 0, 0}, Index3{0, 1, 0}, Index3{0, -1, 0}, Index3{0, 0, 1},
                         Index3{0, 0, -1}})
    if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
  return out;
}

// Uniform double in [0, 1) from the top 53 bits of the generator output.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

// Cavity voxels take the cavity code; every non-cavity voxel within
// wall_thickness_mm of a cavity voxel (and at least the face neighbors) is
// wall. Cavities must not touch each other's wall.
inline std::pair<Volume, LabelMap> generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const auto& s = spec.shape;
  const auto& sp = spec.spacing;
  LabelMap labels(s, sp, 0);

  std::vector<std::uint8_t> owner(labels.size(), 0);  // 1 = LA, 2 = RA cavity
  for_each_index(s, [&](int x, int y, int z) {
    const Index3 v{x, y, z};
    const bool la = spec.left_atrium.contains(v, sp);
    const bool ra = spec.right_atrium.contains(v, sp);
    if (la && ra) throw Error(Errc::invalid_argument, "left and right atrium cavities overlap");
    const auto i = labels.linear(x, y, z);
    if (la) {
      owner[i] = 1;
      labels.data()[i] = spec.left_atrium_code;
    } else if (ra) {
      owner[i] = 2;
      labels.data()[i] = spec.right_atrium_code;
    }
  });

  const auto ball = detail::ball_offsets(spec.wall_thickness_mm, sp);
  for_each_index(s, [&](int x, int y, int z) {
    const auto own = owner[labels.linear(x, y, z)];
    if (own == 0) return;
    for (const auto& o : ball) {
      const int nx = x + o[0], ny = y + o[1], nz = z + o[2];
      if (!labels.contains(nx, ny, nz)) continue;
      const auto j = labels.linear(nx, ny, nz);
      if (owner[j] == 0) {
        labels.data()[j] = spec.wall_code;
      } else if (owner[j] != own) {
        throw Error(Errc::invalid_argument, "left and right atrium cavities are closer than the wall thickness");
      }
    }
  });

  Volume image(s, sp);
  std::mt19937_64 rng(spec.seed);
  for (std::size_t i = 0; i < image.size(); ++i) {
    const auto c = labels.data()[i];
    double level = spec.levels.background;
    if (c == spec.wall_code) level = spec.levels.wall;
    else if (c != 0) level = spec.levels.cavity;
    if (spec.noise_amplitude > 0.0) level += spec.noise_amplitude * (2.0 * detail::unit_uniform(rng) - 1.0);
    image.data()[i] = static_cast<float>(level);
  }
  return {std::move(image), std::move(labels)};
}

inline PhantomSpec phantom_spec_from_json(const nlohmann::json& j) {
  PhantomSpec spec;
  auto reject_unknown = [](const nlohmann::json& obj, std::initializer_list<const char*> keys, const std::string& where) {
    if (!obj.is_object()) throw Error(Errc::bad_config, where + ": expected an object");
    for (const auto& [k, _] : obj.items())
      if (std::find_if(keys.begin(), keys.end(), [&](const char* key) { return k == key; }) == keys.end())
        throw Error(Errc::bad_config, where + "." + k + ": unknown key");
  };
  reject_unknown(j,
                 {"shape", "spacing", "left_atrium", "right_atrium", "wall_thickness_mm", "levels", "noise_amplitude",
                  "seed", "wall_code", "right_atrium_code", "left_atrium_code"},
                 "phantom");
  try {
    if (j.contains("shape")) spec.shape = j.at("shape").get<Shape3>();
    if (j.contains("spacing")) spec.spacing = j.at("spacing").get<Spacing3>();
    auto ellipsoid = [&](const char* key, Ellipsoid& e) {
      if (!j.contains(key)) return;
      reject_unknown(j.at(key), {"center_mm", "radii_mm"}, std::string("phantom.") + key);
      if (j.at(key).contains("center_mm")) e.center_mm = j.at(key).at("center_mm").get<std::array<double, 3>>();
      if (j.at(key).contains("radii_mm")) e.radii_mm = j.at(key).at("radii_mm").get<std::array<double, 3>>();
    };
    ellipsoid("left_atrium", spec.left_atrium);
    ellipsoid("right_atrium", spec.right_atrium);
    if (j.contains("wall_thickness_mm")) spec.wall_thickness_mm = j.at("wall_thickness_mm").get<double>();
    if (j.contains("levels")) {
      const auto& l = j.at("levels");
      reject_unknown(l, {"background", "wall", "cavity"}, "phantom.levels");
      if (l.contains("background")) spec.levels.background = l.at("background").get<double>();
      if (l.contains("wall")) spec.levels.wall = l.at("wall").get<double>();
      if (l.contains("cavity")) spec.levels.cavity = l.at("cavity").get<double>();
    }
    if (j.contains("noise_amplitude")) spec.noise_amplitude = j.at("noise_amplitude").get<double>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("wall_code")) spec.wall_code = j.at("wall_code").get<std::uint8_t>();
    if (j.contains("right_atrium_code")) spec.right_atrium_code = j.at("right_atrium_code").get<std::uint8_t>();
    if (j.contains("left_atrium_code")) spec.left_atrium_code = j.at("left_atrium_code").get<std::uint8_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::bad_config, std::string("phantom: ") + e.what());
  }
  spec.validate();
  return spec;
}

}  // namespace biatrium
