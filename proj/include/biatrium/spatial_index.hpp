#pragma once

// Static 3-D k-d tree answering exact nearest-neighbor distance queries.
// Squared distances are accumulated as dx*dx + dy*dy + dz*dz in that order,
// so results match a brute-force scan bit for bit.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace biatrium {

using Point3 = std::array<double, 3>;

inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

class KdTree {
 public:
  explicit KdTree(std::span<const Point3> points) : points_(points.begin(), points.end()) {
    nodes_.reserve(points_.size());
    if (!points_.empty()) root_ = build(0, static_cast<int>(points_.size()), 0);
  }

  bool empty() const { return points_.empty(); }

  // Squared distance to the closest stored point; +inf when empty.
  double nearest_squared(const Point3& q) const {
    double best = std::numeric_limits<double>::infinity();
    if (root_ < 0) return best;
    struct Pending {
      int node;
      double bound;  // lower bound on squared distance to the subtree
    };
    Pending stack[128];
    int top = 0;
    stack[top++] = {root_, 0.0};
    while (top > 0) {
      const Pending item = stack[--top];
      if (item.bound >= best) continue;
      const Node& n = nodes_[item.node];
      const double d = squared_distance(points_[n.point], q);
      if (d < best) best = d;
      const double diff = q[n.axis] - points_[n.point][n.axis];
      const int near = diff < 0 ? n.left : n.right;
      const int far = diff < 0 ? n.right : n.left;
      // Far side first so the near side is popped next.
      if (far >= 0 && diff * diff < best) stack[top++] = {far, diff * diff};
      if (near >= 0) stack[top++] = {near, item.bound};
    }
    return best;
  }

 private:
  struct Node {
    int point;
    int axis;
    int left = -1;
    int right = -1;
  };

  int build(int begin, int end, int depth) {
    if (begin >= end) return -1;
    // Split on the axis of largest spread.
    Point3 lo = points_[begin], hi = points_[begin];
    for (int i = begin + 1; i < end; ++i)
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], points_[i][a]);
        hi[a] = std::max(hi[a], points_[i][a]);
      }
    int axis = 0;
    for (int a = 1; a < 3; ++a)
      if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
    const int mid = begin + (end - begin) / 2;
    std::nth_element(points_.begin() + begin, points_.begin() + mid, points_.begin() + end,
                     [axis](const Point3& a, const Point3& b) { return a[axis] < b[axis]; });
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({mid, axis});
    const int l = build(begin, mid, depth + 1);
    const int r = build(mid + 1, end, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  std::vector<Point3> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace biatrium
