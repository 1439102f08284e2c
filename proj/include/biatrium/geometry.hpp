#pragma once

// Resolution standardization, block downsampling, ROI boxes, window crops and
// stitch-back. All grids share one convention: child voxel j sits on parent
// voxel j + Placement::offset.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>

#include "biatrium/error.hpp"
#include "biatrium/grid.hpp"

namespace biatrium {

inline constexpr Shape3 kStandardShape{576, 576, 48};
inline constexpr Index3 kCoarseFactors{4, 4, 1};
inline constexpr Shape3 kFineWindow{256, 256, 48};

// Half-open voxel box [lo, hi).
struct BBox {
  Index3 lo{0, 0, 0};
  Index3 hi{1, 1, 1};

  Shape3 extent() const { return {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]}; }
  bool contains(const Index3& p) const {
    for (int i = 0; i < 3; ++i)
      if (p[i] < lo[i] || p[i] >= hi[i]) return false;
    return true;
  }
  bool contains(const BBox& o) const {
    for (int i = 0; i < 3; ++i)
      if (o.lo[i] < lo[i] || o.hi[i] > hi[i]) return false;
    return true;
  }
  // Midpoint of the box rounded half up.
  Index3 center() const {
    Index3 c;
    for (int i = 0; i < 3; ++i) c[i] = floor_div(lo[i] + hi[i] + 1, 2);
    return c;
  }
  friend bool operator==(const BBox&, const BBox&) = default;

  static int floor_div(int a, int b) {
    const int q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
  }
};

struct Placement {
  Shape3 parent_shape{1, 1, 1};
  Index3 offset{0, 0, 0};
  Shape3 window_shape{1, 1, 1};

  void validate() const {
    require_positive(parent_shape, "parent_shape");
    require_positive(window_shape, "window_shape");
  }
  friend bool operator==(const Placement&, const Placement&) = default;
};

// Child grid cut from (or padded around) `parent` according to `p`.
template <typename T>
Grid<T> extract(const Grid<T>& parent, const Placement& p, T fill) {
  p.validate();
  if (parent.shape() != p.parent_shape)
    throw Error(Errc::shape_mismatch, "parent shape " + to_string(parent.shape()) + " does not match placement " +
                                          to_string(p.parent_shape));
  Grid<T> child(p.window_shape, parent.spacing(), fill);
  child.set_orientation(parent.orientation());
  // Overlap in child coordinates, per axis.
  Index3 lo, hi;
  for (int i = 0; i < 3; ++i) {
    lo[i] = std::max(0, -p.offset[i]);
    hi[i] = std::min(p.window_shape[i], p.parent_shape[i] - p.offset[i]);
    if (hi[i] <= lo[i]) return child;
  }
  for (int z = lo[2]; z < hi[2]; ++z)
    for (int y = lo[1]; y < hi[1]; ++y) {
      const T* src = &parent(lo[0] + p.offset[0], y + p.offset[1], z + p.offset[2]);
      std::copy(src, src + (hi[0] - lo[0]), &child(lo[0], y, z));
    }
  return child;
}

// Inverse of extract: writes the child back into a `background` parent grid.
// Child voxels that map outside the parent (padding) are dropped.
template <typename T>
Grid<T> stitch(const Grid<T>& child, const Placement& p, T background = T{}) {
  p.validate();
  if (child.shape() != p.window_shape)
    throw Error(Errc::shape_mismatch,
                "child shape " + to_string(child.shape()) + " does not match window " + to_string(p.window_shape));
  Grid<T> parent(p.parent_shape, child.spacing(), background);
  parent.set_orientation(child.orientation());
  Index3 lo, hi;
  for (int i = 0; i < 3; ++i) {
    lo[i] = std::max(0, -p.offset[i]);
    hi[i] = std::min(p.window_shape[i], p.parent_shape[i] - p.offset[i]);
    if (hi[i] <= lo[i]) return parent;
  }
  for (int z = lo[2]; z < hi[2]; ++z)
    for (int y = lo[1]; y < hi[1]; ++y) {
      const T* src = &child(lo[0], y, z);
      std::copy(src, src + (hi[0] - lo[0]), &parent(lo[0] + p.offset[0], y + p.offset[1], z + p.offset[2]));
    }
  return parent;
}

inline LabelMap stitch(const LabelMap& child, const Placement& p) { return stitch<std::uint8_t>(child, p, 0); }

// Center-aligned pad/crop; an odd difference puts the extra voxel on the
// high-index side for both padding and cropping.
inline Placement centered_placement(const Shape3& parent, const Shape3& target) {
  require_positive(target, "target shape");
  Placement p{parent, {0, 0, 0}, target};
  for (int i = 0; i < 3; ++i) p.offset[i] = (parent[i] - target[i]) / 2;  // truncates toward zero
  return p;
}

inline std::pair<Volume, Placement> standardize(const Volume& v, const Shape3& target = kStandardShape,
                                                float fill = 0.0f) {
  const Placement p = centered_placement(v.shape(), target);
  return {extract(v, p, fill), p};
}

// Restores the original grid from a standardized one.
template <typename T>
Grid<T> unstandardize(const Grid<T>& child, const Placement& p, T background = T{}) {
  return stitch(child, p, background);
}

inline Volume downsample_mean(const Volume& v, const Index3& factors) {
  Shape3 out_shape;
  Spacing3 out_spacing;
  for (int i = 0; i < 3; ++i) {
    if (factors[i] < 1) throw Error(Errc::invalid_argument, "downsample factors must be >= 1");
    if (v.shape()[i] % factors[i] != 0)
      throw Error(Errc::invalid_argument, "shape " + to_string(v.shape()) + " not divisible by factors " +
                                              to_string(factors));
    out_shape[i] = v.shape()[i] / factors[i];
    out_spacing[i] = v.spacing()[i] * factors[i];
  }
  Volume out(out_shape, out_spacing);
  out.set_orientation(v.orientation());
  const double inv = 1.0 / (static_cast<double>(factors[0]) * factors[1] * factors[2]);
  for_each_index(out_shape, [&](int x, int y, int z) {
    double sum = 0.0;
    for (int dz = 0; dz < factors[2]; ++dz)
      for (int dy = 0; dy < factors[1]; ++dy)
        for (int dx = 0; dx < factors[0]; ++dx)
          sum += v(x * factors[0] + dx, y * factors[1] + dy, z * factors[2] + dz);
    out(x, y, z) = static_cast<float>(sum * inv);
  });
  return out;
}

// Binary block max: a coarse voxel is 1 when any voxel of its block satisfies `positive`.
inline LabelMap downsample_any(const LabelMap& m, const Index3& factors,
                               const std::function<bool(std::uint8_t)>& positive) {
  Shape3 out_shape;
  Spacing3 out_spacing;
  for (int i = 0; i < 3; ++i) {
    if (factors[i] < 1 || m.shape()[i] % factors[i] != 0)
      throw Error(Errc::invalid_argument, "shape " + to_string(m.shape()) + " not divisible by factors " +
                                              to_string(factors));
    out_shape[i] = m.shape()[i] / factors[i];
    out_spacing[i] = m.spacing()[i] * factors[i];
  }
  LabelMap out(out_shape, out_spacing, 0);
  for_each_index(m.shape(), [&](int x, int y, int z) {
    if (positive(m(x, y, z))) out(x / factors[0], y / factors[1], z / factors[2]) = 1;
  });
  return out;
}

inline BBox bbox_from_mask(const LabelMap& m, const std::function<bool(std::uint8_t)>& positive) {
  Index3 lo{m.shape()[0], m.shape()[1], m.shape()[2]};
  Index3 hi{-1, -1, -1};
  for_each_index(m.shape(), [&](int x, int y, int z) {
    if (!positive(m(x, y, z))) return;
    const Index3 p{x, y, z};
    for (int i = 0; i < 3; ++i) {
      lo[i] = std::min(lo[i], p[i]);
      hi[i] = std::max(hi[i], p[i]);
    }
  });
  if (hi[0] < 0) throw Error(Errc::no_foreground, "mask has no foreground voxels");
  return {lo, {hi[0] + 1, hi[1] + 1, hi[2] + 1}};
}

inline BBox bbox_from_mask(const LabelMap& m, std::span<const std::uint8_t> positive_classes) {
  return bbox_from_mask(m, [positive_classes](std::uint8_t v) {
    return std::find(positive_classes.begin(), positive_classes.end(), v) != positive_classes.end();
  });
}

// Coarse box -> fine grid: scaled by the block factors, grown by `margin`
// voxels, clipped to the fine grid.
inline BBox scale_bbox(const BBox& coarse, const Index3& factors, int margin, const Shape3& fine_shape) {
  BBox out;
  for (int i = 0; i < 3; ++i) {
    out.lo[i] = std::max(0, coarse.lo[i] * factors[i] - margin);
    out.hi[i] = std::min(fine_shape[i], coarse.hi[i] * factors[i] + margin);
  }
  return out;
}

// Window of `window` voxels centered on `center`, shifted the least amount
// that keeps it inside the parent. Axes where the window exceeds the parent
// are padded symmetrically instead.
inline Placement window_placement(const Shape3& parent, const Index3& center, const Shape3& window) {
  require_positive(window, "window");
  Placement p{parent, {0, 0, 0}, window};
  for (int i = 0; i < 3; ++i) {
    if (window[i] > parent[i]) {
      p.offset[i] = (parent[i] - window[i]) / 2;
    } else {
      p.offset[i] = std::clamp(center[i] - window[i] / 2, 0, parent[i] - window[i]);
    }
  }
  return p;
}

inline std::pair<Volume, Placement> crop_window(const Volume& v, const Index3& center,
                                                const Shape3& window = kFineWindow, float fill = 0.0f) {
  const Placement p = window_placement(v.shape(), center, window);
  return {extract(v, p, fill), p};
}

// Parent-grid index of a child voxel.
inline Index3 to_parent(const Placement& p, const Index3& child) {
  return {child[0] + p.offset[0], child[1] + p.offset[1], child[2] + p.offset[2]};
}

}  // namespace biatrium
