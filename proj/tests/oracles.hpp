#pragma once

// Brute-force reference computations used only by tests. Nothing here calls
// into the code paths it is used to check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "biatrium/grid.hpp"

namespace oracle {

using biatrium::LabelMap;
using biatrium::Volume;
using P3 = std::array<double, 3>;

inline double dist(const P3& a, const P3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// All-pairs directed distances, both directions pooled.
inline std::vector<double> pooled(const std::vector<P3>& a, const std::vector<P3>& b) {
  std::vector<double> out;
  for (const auto& p : a) {
    double best = INFINITY;
    for (const auto& q : b) best = std::min(best, dist(p, q));
    out.push_back(best);
  }
  for (const auto& q : b) {
    double best = INFINITY;
    for (const auto& p : a) best = std::min(best, dist(p, q));
    out.push_back(best);
  }
  return out;
}

inline double hd95(const std::vector<P3>& a, const std::vector<P3>& b) {
  auto d = pooled(a, b);
  std::sort(d.begin(), d.end());
  // Nearest rank: the smallest k with k / n >= 0.95.
  std::size_t k = 1;
  while (k * 100 < 95 * d.size()) ++k;
  return d[k - 1];
}

inline double hausdorff(const std::vector<P3>& a, const std::vector<P3>& b) {
  double m = 0.0;
  for (double v : pooled(a, b)) m = std::max(m, v);
  return m;
}

struct Counts {
  long tp = 0, fp = 0, fn = 0;
};

inline Counts counts(const LabelMap& pred, const LabelMap& gt, std::uint8_t cls) {
  Counts c;
  const auto& s = gt.shape();
  for (int x = 0; x < s[0]; ++x)
    for (int y = 0; y < s[1]; ++y)
      for (int z = 0; z < s[2]; ++z) {
        const bool p = pred(x, y, z) == cls, g = gt(x, y, z) == cls;
        if (p && g) ++c.tp;
        if (p && !g) ++c.fp;
        if (!p && g) ++c.fn;
      }
  return c;
}

// Boundary voxels: any 6-neighbor outside the class or outside the grid.
inline std::vector<P3> surface(const LabelMap& m, std::uint8_t cls) {
  std::vector<P3> out;
  const auto& s = m.shape();
  const auto& sp = m.spacing();
  const int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (int x = 0; x < s[0]; ++x)
    for (int y = 0; y < s[1]; ++y)
      for (int z = 0; z < s[2]; ++z) {
        if (m(x, y, z) != cls) continue;
        bool boundary = false;
        for (const auto& d : nb) {
          const int a = x + d[0], b = y + d[1], c = z + d[2];
          if (a < 0 || b < 0 || c < 0 || a >= s[0] || b >= s[1] || c >= s[2] || m(a, b, c) != cls) boundary = true;
        }
        if (boundary) out.push_back({x * sp[0], y * sp[1], z * sp[2]});
      }
  return out;
}

// Textbook global histogram equalization on min-max normalized values.
inline std::vector<double> global_he(const Volume& v, int n_bins) {
  float lo = v.data()[0], hi = v.data()[0];
  for (float x : v.data()) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  std::vector<int> bin(v.size(), 0);
  std::vector<long> hist(n_bins, 0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (hi > lo) {
      const double t = (static_cast<double>(v.data()[i]) - lo) / (static_cast<double>(hi) - lo);
      bin[i] = std::min(n_bins - 1, static_cast<int>(t * n_bins));
    }
    ++hist[bin[i]];
  }
  std::vector<long> cdf(n_bins);
  long run = 0;
  for (int b = 0; b < n_bins; ++b) cdf[b] = (run += hist[b]);
  long cdf_min = 0;
  for (int b = 0; b < n_bins && cdf_min == 0; ++b) cdf_min = cdf[b];
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = run == cdf_min ? static_cast<double>(bin[i]) / (n_bins - 1)
                            : static_cast<double>(cdf[bin[i]] - cdf_min) / static_cast<double>(run - cdf_min);
  return out;
}

inline double bce(int y, double p) { return -(y * std::log(p) + (1 - y) * std::log(1.0 - p)); }

inline double focal(int y, double p, double gamma) {
  return -(y * std::pow(1.0 - p, gamma) * std::log(p) + (1 - y) * std::pow(p, gamma) * std::log(1.0 - p));
}

inline Volume random_volume(std::mt19937& rng, biatrium::Shape3 s, float lo = -100.0f, float hi = 100.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  Volume v(s, {1.0, 1.0, 1.0});
  for (auto& x : v.data()) x = u(rng);
  return v;
}

inline LabelMap random_labels(std::mt19937& rng, biatrium::Shape3 s, biatrium::Spacing3 sp, int n_classes,
                              double blob_fraction = 0.5) {
  LabelMap m(s, sp, 0);
  std::uniform_int_distribution<int> cls(0, n_classes - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Random boxes so classes form blobs rather than salt-and-pepper.
  const int boxes = 1 + static_cast<int>(u(rng) * 6);
  for (int b = 0; b < boxes; ++b) {
    int lo[3], hi[3];
    for (int i = 0; i < 3; ++i) {
      const int a = static_cast<int>(u(rng) * s[i]), c = static_cast<int>(u(rng) * s[i]);
      lo[i] = std::min(a, c);
      hi[i] = std::max(a, c) + 1;
    }
    const auto c = static_cast<std::uint8_t>(cls(rng));
    for (int z = lo[2]; z < hi[2]; ++z)
      for (int y = lo[1]; y < hi[1]; ++y)
        for (int x = lo[0]; x < hi[0]; ++x) m(x, y, z) = c;
  }
  for (auto& v : m.data())
    if (u(rng) > 1.0 - blob_fraction * 0.1) v = static_cast<std::uint8_t>(cls(rng));
  return m;
}

}  // namespace oracle
