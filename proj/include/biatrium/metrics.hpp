#pragma once

// Overlap (Dice) and boundary-distance (HD95, Hausdorff) metrics per class.
// Distances are in millimetres: a voxel at index i sits at i * spacing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "biatrium/error.hpp"
#include "biatrium/grid.hpp"
#include "biatrium/spatial_index.hpp"

namespace biatrium {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline void require_same_shape(const LabelMap& a, const LabelMap& b) {
  if (a.shape() != b.shape())
    throw Error(Errc::shape_mismatch, "prediction " + to_string(a.shape()) + " vs ground truth " + to_string(b.shape()));
}

inline ConfusionCounts confusion_counts(const LabelMap& pred, const LabelMap& gt, std::uint8_t cls) {
  require_same_shape(pred, gt);
  ConfusionCounts c;
  const auto p = pred.data();
  const auto g = gt.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool in_p = p[i] == cls;
    const bool in_g = g[i] == cls;
    c.tp += in_p && in_g;
    c.fp += in_p && !in_g;
    c.fn += !in_p && in_g;
  }
  return c;
}

struct DiceScore {
  double value = 0.0;
  bool empty = false;  // class absent from both maps; value is 1 by convention
};

inline DiceScore dice(const ConfusionCounts& c) {
  const std::int64_t denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return {1.0, true};
  return {static_cast<double>(2 * c.tp) / static_cast<double>(denom), false};
}

enum class PointMode { surface, full_region };

// Voxel centers of `cls` with at least one 6-neighbor outside the class.
// Out-of-bounds neighbors count as outside.
inline std::vector<Point3> surface_points(const LabelMap& m, std::uint8_t cls) {
  std::vector<Point3> pts;
  const auto& s = m.shape();
  const auto& sp = m.spacing();
  for_each_index(s, [&](int x, int y, int z) {
    if (m(x, y, z) != cls) return;
    auto outside = [&](int a, int b, int c) { return !m.contains(a, b, c) || m(a, b, c) != cls; };
    if (outside(x - 1, y, z) || outside(x + 1, y, z) || outside(x, y - 1, z) || outside(x, y + 1, z) ||
        outside(x, y, z - 1) || outside(x, y, z + 1))
      pts.push_back({x * sp[0], y * sp[1], z * sp[2]});
  });
  return pts;
}

inline std::vector<Point3> region_points(const LabelMap& m, std::uint8_t cls) {
  std::vector<Point3> pts;
  const auto& sp = m.spacing();
  for_each_index(m.shape(), [&](int x, int y, int z) {
    if (m(x, y, z) == cls) pts.push_back({x * sp[0], y * sp[1], z * sp[2]});
  });
  return pts;
}

inline std::vector<Point3> class_points(const LabelMap& m, std::uint8_t cls, PointMode mode) {
  return mode == PointMode::surface ? surface_points(m, cls) : region_points(m, cls);
}

enum class DistanceFlag { none, empty, infinite };

struct SurfaceDistance {
  double mm = 0.0;
  DistanceFlag flag = DistanceFlag::none;
};

// {d(a,B) : a in A} followed by {d(b,A) : b in B}, unsorted.
inline std::vector<double> pooled_distances(std::span<const Point3> a, std::span<const Point3> b) {
  std::vector<double> d;
  d.reserve(a.size() + b.size());
  const KdTree tree_b(b);
  for (const auto& p : a) d.push_back(std::sqrt(tree_b.nearest_squared(p)));
  const KdTree tree_a(a);
  for (const auto& p : b) d.push_back(std::sqrt(tree_a.nearest_squared(p)));
  return d;
}

namespace detail {

inline bool empty_case(std::span<const Point3> a, std::span<const Point3> b, SurfaceDistance& out) {
  if (a.empty() && b.empty()) {
    out = {0.0, DistanceFlag::empty};
    return true;
  }
  if (a.empty() || b.empty()) {
    out = {std::numeric_limits<double>::infinity(), DistanceFlag::infinite};
    return true;
  }
  return false;
}

}  // namespace detail

// Nearest-rank index: ceil(q/100 * n) - 1, computed in integers.
inline std::size_t nearest_rank_index(std::size_t n, unsigned percent) {
  const std::size_t rank = (static_cast<std::size_t>(percent) * n + 99) / 100;
  return rank == 0 ? 0 : rank - 1;
}

inline SurfaceDistance hd95(std::span<const Point3> a, std::span<const Point3> b) {
  SurfaceDistance out;
  if (detail::empty_case(a, b, out)) return out;
  auto d = pooled_distances(a, b);
  const auto k = nearest_rank_index(d.size(), 95);
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  return {d[k], DistanceFlag::none};
}

inline SurfaceDistance hausdorff(std::span<const Point3> a, std::span<const Point3> b) {
  SurfaceDistance out;
  if (detail::empty_case(a, b, out)) return out;
  const auto d = pooled_distances(a, b);
  return {*std::max_element(d.begin(), d.end()), DistanceFlag::none};
}

struct MetricRow {
  std::string case_id;
  std::string class_name;
  DiceScore dice;
  SurfaceDistance hd95;
};

struct MetricReport {
  std::vector<MetricRow> rows;

  const MetricRow* find(const std::string& case_id, const std::string& class_name) const {
    for (const auto& r : rows)
      if (r.case_id == case_id && r.class_name == class_name) return &r;
    return nullptr;
  }
};

inline MetricReport evaluate_case(const LabelMap& pred, const LabelMap& gt, const ClassMap& classes,
                                  const std::string& case_id = "case", PointMode mode = PointMode::surface) {
  require_same_shape(pred, gt);
  if (pred.spacing() != gt.spacing()) throw Error(Errc::shape_mismatch, "prediction and ground truth spacing differ");
  classes.validate();
  MetricReport report;
  for (const auto& entry : classes.entries) {
    const auto counts = confusion_counts(pred, gt, entry.code);
    const auto pa = class_points(pred, entry.code, mode);
    const auto pb = class_points(gt, entry.code, mode);
    report.rows.push_back({case_id, entry.name, dice(counts), hd95(pa, pb)});
  }
  return report;
}

}  // namespace biatrium
