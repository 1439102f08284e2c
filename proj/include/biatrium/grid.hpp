#pragma once

// Dense 3D grids (x-fastest) with physical voxel spacing, plus the class map
// used to interpret label codes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "biatrium/error.hpp"

namespace biatrium {

using Index3 = std::array<int, 3>;
using Shape3 = std::array<int, 3>;
using Spacing3 = std::array<double, 3>;

inline std::string to_string(const Index3& v) {
  return "(" + std::to_string(v[0]) + "," + std::to_string(v[1]) + "," + std::to_string(v[2]) + ")";
}

inline std::size_t voxel_count(const Shape3& s) {
  return static_cast<std::size_t>(s[0]) * static_cast<std::size_t>(s[1]) *
         static_cast<std::size_t>(s[2]);
}

inline void require_positive(const Shape3& s, const char* what) {
  for (int v : s)
    if (v < 1) throw Error(Errc::invalid_argument, std::string(what) + " must be positive, got " + to_string(s));
}

// NIfTI qform/sform block carried through untouched. Never interpreted.
struct OrientationBytes {
  static constexpr std::size_t kSize = 76;
  std::array<std::uint8_t, kSize> bytes{};
  bool present = false;
};

template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(Shape3 shape, Spacing3 spacing, T fill = T{})
      : shape_(shape), spacing_(spacing) {
    validate_geometry();
    data_.assign(voxel_count(shape_), fill);
  }

  Grid(Shape3 shape, Spacing3 spacing, std::vector<T> data)
      : shape_(shape), spacing_(spacing), data_(std::move(data)) {
    validate_geometry();
    if (data_.size() != voxel_count(shape_))
      throw Error(Errc::shape_mismatch, "data length " + std::to_string(data_.size()) +
                                            " does not match shape " + to_string(shape_));
  }

  const Shape3& shape() const noexcept { return shape_; }
  const Spacing3& spacing() const noexcept { return spacing_; }
  void set_spacing(const Spacing3& s) {
    spacing_ = s;
    validate_geometry();
  }

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  std::size_t linear(int x, int y, int z) const noexcept {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(shape_[0]) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(shape_[1]) * static_cast<std::size_t>(z));
  }

  bool contains(int x, int y, int z) const noexcept {
    return x >= 0 && y >= 0 && z >= 0 && x < shape_[0] && y < shape_[1] && z < shape_[2];
  }
  bool contains(const Index3& i) const noexcept { return contains(i[0], i[1], i[2]); }

  T& operator()(int x, int y, int z) noexcept { return data_[linear(x, y, z)]; }
  const T& operator()(int x, int y, int z) const noexcept { return data_[linear(x, y, z)]; }
  T& operator[](const Index3& i) noexcept { return data_[linear(i[0], i[1], i[2])]; }
  const T& operator[](const Index3& i) const noexcept { return data_[linear(i[0], i[1], i[2])]; }

  const OrientationBytes& orientation() const noexcept { return orientation_; }
  void set_orientation(const OrientationBytes& o) { orientation_ = o; }

  bool same_geometry(const Grid& o) const noexcept {
    return shape_ == o.shape_ && spacing_ == o.spacing_;
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.shape_ == b.shape_ && a.spacing_ == b.spacing_ && a.data_ == b.data_;
  }

 private:
  void validate_geometry() const {
    require_positive(shape_, "shape");
    for (double s : spacing_)
      if (!(s > 0.0) || !std::isfinite(s))
        throw Error(Errc::invalid_argument, "spacing components must be finite and > 0");
  }

  Shape3 shape_{1, 1, 1};
  Spacing3 spacing_{1.0, 1.0, 1.0};
  std::vector<T> data_ = std::vector<T>(1);
  OrientationBytes orientation_;
};

using Volume = Grid<float>;
using LabelMap = Grid<std::uint8_t>;

inline void require_finite(const Volume& v) {
  for (float x : v.data())
    if (!std::isfinite(x)) throw Error(Errc::non_finite, "volume contains NaN or Inf");
}

// Visits every voxel in x-fastest order with its integer coordinates.
template <typename Fn>
void for_each_index(const Shape3& s, Fn&& fn) {
  for (int z = 0; z < s[2]; ++z)
    for (int y = 0; y < s[1]; ++y)
      for (int x = 0; x < s[0]; ++x) fn(x, y, z);
}

struct ClassEntry {
  std::string name;
  std::uint8_t code;
};

// Foreground classes in report order. Background is code 0.
struct ClassMap {
  std::vector<ClassEntry> entries{{"wall", 1}, {"right_atrium", 2}, {"left_atrium", 3}};

  bool contains_code(std::uint8_t c) const {
    if (c == 0) return true;
    return std::any_of(entries.begin(), entries.end(), [c](const ClassEntry& e) { return e.code == c; });
  }

  const ClassEntry* find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }

  void validate() const {
    if (entries.empty()) throw Error(Errc::invalid_argument, "class map is empty");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].code == 0) throw Error(Errc::invalid_argument, "class code 0 is reserved for background");
      for (std::size_t j = i + 1; j < entries.size(); ++j)
        if (entries[i].code == entries[j].code || entries[i].name == entries[j].name)
          throw Error(Errc::invalid_argument, "duplicate class entry '" + entries[j].name + "'");
    }
  }
};

inline void require_labels_in(const LabelMap& m, const ClassMap& classes, const char* what) {
  for (std::uint8_t v : m.data())
    if (!classes.contains_code(v))
      throw Error(Errc::invalid_argument,
                  std::string(what) + " contains undeclared class code " + std::to_string(v));
}

}  // namespace biatrium
