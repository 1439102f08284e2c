#pragma once

// Multidimensional contrast-limited adaptive histogram equalization (3-D).
//
// The volume is min-max normalized to [0,1], replicate-padded to a whole
// number of tiles, and each tile gets a clipped-histogram equalization table.
// A voxel's output blends the tables of the 2x2x2 nearest tile centers
// trilinearly; positions outside the lattice of centers clamp to the nearest
// center along that axis.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "biatrium/error.hpp"
#include "biatrium/grid.hpp"

namespace biatrium {

struct MclaheParams {
  std::optional<Index3> kernel_size;  // unset: max(1, dim / 8) per axis
  int n_bins = 128;
  double clip_limit = 0.01;

  Index3 resolve_kernel(const Shape3& shape) const {
    if (kernel_size) return *kernel_size;
    Index3 k;
    for (int i = 0; i < 3; ++i) k[i] = std::max(1, shape[i] / 8);
    return k;
  }

  void validate() const {
    if (kernel_size)
      for (int k : *kernel_size)
        if (k < 1) throw Error(Errc::invalid_argument, "mclahe kernel_size must be >= 1");
    if (n_bins < 2 || n_bins > 65536) throw Error(Errc::invalid_argument, "mclahe n_bins must lie in 2..65536");
    if (!(clip_limit > 0.0 && clip_limit <= 1.0))
      throw Error(Errc::invalid_argument, "mclahe clip_limit must lie in (0, 1]");
  }
};

// Equalization table for one tile: n_bins values in [0,1], nondecreasing.
using TileMapping = std::vector<double>;

inline int bin_of(double normalized, int n_bins) {
  return std::min(static_cast<int>(std::floor(normalized * n_bins)), n_bins - 1);
}

inline std::int64_t clip_count(std::int64_t tile_voxels, double clip_limit) {
  return std::max<std::int64_t>(1, std::llround(clip_limit * static_cast<double>(tile_voxels)));
}

// Clips every bin to max(1, round(clip_limit * tile_voxels)) and spreads the
// excess in one pass: an equal share to every bin, the remainder one count
// each to bins 0, 1, ... Bins may end above the limit.
inline std::vector<std::int64_t> clip_redistribute(std::span<const std::int64_t> hist, std::int64_t tile_voxels,
                                                   double clip_limit) {
  const std::int64_t limit = clip_count(tile_voxels, clip_limit);
  std::vector<std::int64_t> out(hist.begin(), hist.end());
  std::int64_t excess = 0;
  for (auto& c : out)
    if (c > limit) {
      excess += c - limit;
      c = limit;
    }
  const auto n = static_cast<std::int64_t>(out.size());
  if (n == 0 || excess == 0) return out;
  const std::int64_t share = excess / n;
  const std::int64_t rest = excess % n;
  for (std::int64_t b = 0; b < n; ++b) out[b] += share + (b < rest ? 1 : 0);
  return out;
}

inline TileMapping mapping_from_hist(std::span<const std::int64_t> hist) {
  if (hist.empty()) throw Error(Errc::invalid_argument, "empty histogram");
  const std::size_t n = hist.size();
  std::vector<std::int64_t> cdf(n);
  std::int64_t run = 0;
  std::int64_t cdf_min = 0;
  for (std::size_t b = 0; b < n; ++b) {
    run += hist[b];
    cdf[b] = run;
    if (cdf_min == 0 && run > 0) cdf_min = run;
  }
  if (run <= 0) throw Error(Errc::invalid_argument, "histogram has no mass");

  TileMapping map(n);
  const std::int64_t denom = run - cdf_min;
  if (denom == 0) {
    for (std::size_t b = 0; b < n; ++b) map[b] = static_cast<double>(b) / static_cast<double>(n - 1);
    return map;
  }
  for (std::size_t b = 0; b < n; ++b)
    map[b] = std::max(0.0, static_cast<double>(cdf[b] - cdf_min) / static_cast<double>(denom));
  return map;
}

// Per-tile tables, tile index x-fastest.
struct TileMappings {
  Shape3 tiles{1, 1, 1};
  Index3 kernel{1, 1, 1};
  int n_bins = 0;
  std::vector<double> tables;  // tiles * n_bins

  std::span<const double> mapping(int tx, int ty, int tz) const {
    const auto t = static_cast<std::size_t>(tx) +
                   static_cast<std::size_t>(tiles[0]) *
                       (static_cast<std::size_t>(ty) + static_cast<std::size_t>(tiles[1]) * static_cast<std::size_t>(tz));
    return std::span<const double>(tables).subspan(t * static_cast<std::size_t>(n_bins),
                                                    static_cast<std::size_t>(n_bins));
  }
  std::size_t tile_count() const { return voxel_count(tiles); }
};

namespace detail {

// Bin index of every voxel after min-max normalization.
inline std::vector<std::uint16_t> normalized_bins(const Volume& v, int n_bins) {
  require_finite(v);
  const auto [mn, mx] = std::minmax_element(v.data().begin(), v.data().end());
  const double lo = *mn;
  const double range = static_cast<double>(*mx) - lo;
  std::vector<std::uint16_t> bins(v.size(), 0);
  if (range > 0.0)
    for (std::size_t i = 0; i < v.size(); ++i)
      bins[i] = static_cast<std::uint16_t>(bin_of((v.data()[i] - lo) / range, n_bins));
  return bins;
}

struct AxisWeight {
  int t0;
  int t1;
  double w1;  // weight of t1; t0 gets 1 - w1
};

// Voxel i has continuous position i + 0.5; tile t is centered at (t + 0.5) * k.
inline std::vector<AxisWeight> axis_weights(int dim, int k, int tiles) {
  std::vector<AxisWeight> out(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) {
    const double u = (i + 0.5) / k - 0.5;
    if (u <= 0.0) {
      out[i] = {0, 0, 0.0};
    } else if (u >= tiles - 1) {
      out[i] = {tiles - 1, tiles - 1, 0.0};
    } else {
      const int t0 = static_cast<int>(std::floor(u));
      out[i] = {t0, t0 + 1, u - t0};
    }
  }
  return out;
}

inline TileMappings build_tile_mappings(std::span<const std::uint16_t> bins, const Shape3& shape,
                                        const MclaheParams& params) {
  TileMappings tm;
  tm.kernel = params.resolve_kernel(shape);
  tm.n_bins = params.n_bins;
  for (int i = 0; i < 3; ++i) tm.tiles[i] = (shape[i] + tm.kernel[i] - 1) / tm.kernel[i];
  const std::int64_t tile_voxels = static_cast<std::int64_t>(tm.kernel[0]) * tm.kernel[1] * tm.kernel[2];
  tm.tables.resize(tm.tile_count() * static_cast<std::size_t>(tm.n_bins));

  std::vector<std::int64_t> hist(static_cast<std::size_t>(tm.n_bins));
  std::size_t t = 0;
  for (int tz = 0; tz < tm.tiles[2]; ++tz)
    for (int ty = 0; ty < tm.tiles[1]; ++ty)
      for (int tx = 0; tx < tm.tiles[0]; ++tx, ++t) {
        std::fill(hist.begin(), hist.end(), 0);
        // Padded coordinates replicate the last voxel along each axis.
        for (int z = tz * tm.kernel[2]; z < (tz + 1) * tm.kernel[2]; ++z) {
          const std::size_t sz = static_cast<std::size_t>(std::min(z, shape[2] - 1));
          for (int y = ty * tm.kernel[1]; y < (ty + 1) * tm.kernel[1]; ++y) {
            const std::size_t sy = static_cast<std::size_t>(std::min(y, shape[1] - 1));
            const std::size_t row = static_cast<std::size_t>(shape[0]) * (sy + static_cast<std::size_t>(shape[1]) * sz);
            for (int x = tx * tm.kernel[0]; x < (tx + 1) * tm.kernel[0]; ++x)
              ++hist[bins[row + static_cast<std::size_t>(std::min(x, shape[0] - 1))]];
          }
        }
        const auto clipped = clip_redistribute(hist, tile_voxels, params.clip_limit);
        const auto map = mapping_from_hist(clipped);
        std::copy(map.begin(), map.end(), tm.tables.begin() + static_cast<std::ptrdiff_t>(t * tm.n_bins));
      }
  return tm;
}

}  // namespace detail

// Per-tile equalization tables for `v`; exposed for inspection and tests.
inline TileMappings mclahe_tile_mappings(const Volume& v, const MclaheParams& params = {}) {
  params.validate();
  const auto bins = detail::normalized_bins(v, params.n_bins);
  return detail::build_tile_mappings(bins, v.shape(), params);
}

inline Volume mclahe(const Volume& v, const MclaheParams& params = {}) {
  params.validate();
  const Shape3& shape = v.shape();
  const auto bins = detail::normalized_bins(v, params.n_bins);
  const TileMappings tm = detail::build_tile_mappings(bins, shape, params);

  const auto wx = detail::axis_weights(shape[0], tm.kernel[0], tm.tiles[0]);
  const auto wy = detail::axis_weights(shape[1], tm.kernel[1], tm.tiles[1]);
  const auto wz = detail::axis_weights(shape[2], tm.kernel[2], tm.tiles[2]);

  Volume out(shape, v.spacing());
  out.set_orientation(v.orientation());
  std::size_t i = 0;
  for (int z = 0; z < shape[2]; ++z) {
    const auto& az = wz[z];
    for (int y = 0; y < shape[1]; ++y) {
      const auto& ay = wy[y];
      for (int x = 0; x < shape[0]; ++x, ++i) {
        const auto& ax = wx[x];
        const int b = bins[i];
        auto at = [&](int tx, int ty, int tz) { return tm.mapping(tx, ty, tz)[b]; };
        const double c00 = (1 - ax.w1) * at(ax.t0, ay.t0, az.t0) + ax.w1 * at(ax.t1, ay.t0, az.t0);
        const double c10 = (1 - ax.w1) * at(ax.t0, ay.t1, az.t0) + ax.w1 * at(ax.t1, ay.t1, az.t0);
        const double c01 = (1 - ax.w1) * at(ax.t0, ay.t0, az.t1) + ax.w1 * at(ax.t1, ay.t0, az.t1);
        const double c11 = (1 - ax.w1) * at(ax.t0, ay.t1, az.t1) + ax.w1 * at(ax.t1, ay.t1, az.t1);
        const double c0 = (1 - ay.w1) * c00 + ay.w1 * c10;
        const double c1 = (1 - ay.w1) * c01 + ay.w1 * c11;
        out.data()[i] = static_cast<float>(std::clamp((1 - az.w1) * c0 + az.w1 * c1, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace biatrium
