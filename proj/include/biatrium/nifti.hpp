#pragma once

// Single-file NIfTI-1 (".nii", optionally gzip-wrapped) restricted to 3-D,
// single-timepoint images of type uint8, int16 or float32.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "biatrium/error.hpp"
#include "biatrium/grid.hpp"
#include "biatrium/gzip.hpp"

namespace biatrium::nifti {

inline constexpr int kHeaderSize = 348;
inline constexpr int kVoxOffset = 352;
inline constexpr std::size_t kOrientationOffset = 252;

enum class Dtype : std::int16_t { uint8 = 2, int16 = 4, float32 = 16 };
enum class Endian { little, big };

inline int bytes_per_voxel(Dtype t) {
  switch (t) {
    case Dtype::uint8: return 1;
    case Dtype::int16: return 2;
    case Dtype::float32: return 4;
  }
  return 0;
}

// Decoded file contents. `payload` is always little-endian regardless of the
// byte order of the file it came from.
struct Image {
  Shape3 shape{1, 1, 1};
  Spacing3 spacing{1.0, 1.0, 1.0};
  Dtype dtype = Dtype::float32;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  OrientationBytes orientation;
  std::vector<std::uint8_t> payload;
};

namespace detail {

template <typename T>
T byteswap_value(T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  std::memcpy(&v, b, sizeof(T));
  return v;
}

static_assert(std::endian::native == std::endian::little, "little-endian host assumed");

class HeaderReader {
 public:
  HeaderReader(std::span<const std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}
  template <typename T>
  T get(std::size_t off) const {
    T v;
    std::memcpy(&v, bytes_.data() + off, sizeof(T));
    return swap_ ? byteswap_value(v) : v;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  bool swap_;
};

class HeaderWriter {
 public:
  HeaderWriter(std::span<std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}
  template <typename T>
  void put(std::size_t off, T v) {
    if (swap_) v = byteswap_value(v);
    std::memcpy(bytes_.data() + off, &v, sizeof(T));
  }

 private:
  std::span<std::uint8_t> bytes_;
  bool swap_;
};

// qform_code, sform_code (int16) then 18 float32 fields.
inline void swap_orientation(std::span<std::uint8_t, OrientationBytes::kSize> o) {
  for (std::size_t i = 0; i < 4; i += 2) std::swap(o[i], o[i + 1]);
  for (std::size_t i = 4; i < OrientationBytes::kSize; i += 4) {
    std::swap(o[i], o[i + 3]);
    std::swap(o[i + 1], o[i + 2]);
  }
}

inline void swap_payload(std::span<std::uint8_t> p, int width) {
  if (width == 1) return;
  for (std::size_t i = 0; i + width <= p.size(); i += width)
    for (int k = 0; k < width / 2; ++k) std::swap(p[i + k], p[i + width - 1 - k]);
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io, "write to '" + path.string() + "' failed");
}

}  // namespace detail

inline Image decode(std::span<const std::uint8_t> raw) {
  std::vector<std::uint8_t> inflated;
  if (gzip::has_magic(raw)) {
    inflated = gzip::decompress(raw);
    raw = inflated;
  }
  if (raw.size() < static_cast<std::size_t>(kHeaderSize))
    throw Error(Errc::bad_header_size, "file shorter than the 348-byte header");

  bool swap = false;
  {
    std::int32_t sizeof_hdr;
    std::memcpy(&sizeof_hdr, raw.data(), 4);
    if (sizeof_hdr != kHeaderSize) {
      if (detail::byteswap_value(sizeof_hdr) != kHeaderSize)
        throw Error(Errc::bad_header_size, "sizeof_hdr = " + std::to_string(sizeof_hdr) + ", expected 348");
      swap = true;
    }
  }
  if (std::memcmp(raw.data() + 344, "n+1\0", 4) != 0)
    throw Error(Errc::bad_magic, "expected single-file magic \"n+1\"");

  const detail::HeaderReader h(raw, swap);
  const auto ndim = h.get<std::int16_t>(40);
  if (ndim < 1 || ndim > 7) throw Error(Errc::bad_header_size, "dim[0] = " + std::to_string(ndim) + " out of 1..7");
  if (ndim != 3) throw Error(Errc::bad_dim_count, "expected 3 spatial dims, got " + std::to_string(ndim));

  Image img;
  for (int i = 0; i < 3; ++i) {
    img.shape[i] = h.get<std::int16_t>(42 + 2 * i);
    if (img.shape[i] < 1) throw Error(Errc::bad_dim_count, "dim[" + std::to_string(i + 1) + "] must be positive");
    const double pd = std::fabs(static_cast<double>(h.get<float>(80 + 4 * i)));
    if (!(pd > 0.0) || !std::isfinite(pd))
      throw Error(Errc::invalid_argument, "pixdim[" + std::to_string(i + 1) + "] must be non-zero");
    img.spacing[i] = pd;
  }

  const auto code = h.get<std::int16_t>(70);
  switch (code) {
    case 2: img.dtype = Dtype::uint8; break;
    case 4: img.dtype = Dtype::int16; break;
    case 16: img.dtype = Dtype::float32; break;
    default: throw Error(Errc::unsupported_datatype, "datatype code " + std::to_string(code));
  }
  img.scl_slope = h.get<float>(112);
  img.scl_inter = h.get<float>(116);

  std::copy_n(raw.begin() + kOrientationOffset, OrientationBytes::kSize, img.orientation.bytes.begin());
  if (swap) detail::swap_orientation(img.orientation.bytes);
  img.orientation.present = true;

  const float vox_offset = h.get<float>(108);
  if (!(vox_offset >= static_cast<float>(kHeaderSize)))
    throw Error(Errc::bad_header_size, "vox_offset must be >= 348");
  const auto start = static_cast<std::size_t>(vox_offset);
  const std::size_t nbytes = voxel_count(img.shape) * static_cast<std::size_t>(bytes_per_voxel(img.dtype));
  if (raw.size() < start + nbytes)
    throw Error(Errc::truncated_payload, "need " + std::to_string(nbytes) + " payload bytes at offset " +
                                             std::to_string(start) + ", file has " + std::to_string(raw.size()));
  img.payload.assign(raw.begin() + static_cast<std::ptrdiff_t>(start),
                     raw.begin() + static_cast<std::ptrdiff_t>(start + nbytes));
  if (swap) detail::swap_payload(img.payload, bytes_per_voxel(img.dtype));
  return img;
}

inline std::vector<std::uint8_t> encode(const Image& img, Endian endian = Endian::little) {
  const bool swap = endian == Endian::big;
  const std::size_t nbytes = voxel_count(img.shape) * static_cast<std::size_t>(bytes_per_voxel(img.dtype));
  if (img.payload.size() != nbytes) throw Error(Errc::shape_mismatch, "payload size does not match shape and dtype");

  std::vector<std::uint8_t> out(kVoxOffset + nbytes, 0);
  detail::HeaderWriter h(out, swap);
  h.put<std::int32_t>(0, kHeaderSize);
  h.put<std::int16_t>(40, 3);
  for (int i = 0; i < 3; ++i) h.put<std::int16_t>(42 + 2 * i, static_cast<std::int16_t>(img.shape[i]));
  for (int i = 4; i < 8; ++i) h.put<std::int16_t>(40 + 2 * i, 1);
  h.put<std::int16_t>(70, static_cast<std::int16_t>(img.dtype));
  h.put<std::int16_t>(72, static_cast<std::int16_t>(8 * bytes_per_voxel(img.dtype)));
  h.put<float>(76, 1.0f);
  for (int i = 0; i < 3; ++i) h.put<float>(80 + 4 * i, static_cast<float>(img.spacing[i]));
  h.put<float>(108, static_cast<float>(kVoxOffset));
  h.put<float>(112, img.scl_slope);
  h.put<float>(116, img.scl_inter);
  out[123] = 2;  // xyzt_units: mm

  if (img.orientation.present) {
    auto o = img.orientation;
    if (swap) detail::swap_orientation(o.bytes);
    std::copy(o.bytes.begin(), o.bytes.end(), out.begin() + kOrientationOffset);
  }
  std::memcpy(out.data() + 344, "n+1\0", 4);

  std::copy(img.payload.begin(), img.payload.end(), out.begin() + kVoxOffset);
  if (swap) detail::swap_payload(std::span(out).subspan(kVoxOffset), bytes_per_voxel(img.dtype));
  return out;
}

inline Image read_image(const std::filesystem::path& path) { return decode(detail::read_file(path)); }

inline void write_image(const Image& img, const std::filesystem::path& path, bool compress,
                        Endian endian = Endian::little) {
  auto bytes = encode(img, endian);
  if (compress) bytes = gzip::compress(bytes);
  detail::write_file(path, bytes);
}

// Voxel values as doubles, scl_slope/scl_inter applied when the slope is non-zero.
inline std::vector<double> scaled_values(const Image& img) {
  const std::size_t n = voxel_count(img.shape);
  std::vector<double> out(n);
  const std::uint8_t* p = img.payload.data();
  for (std::size_t i = 0; i < n; ++i) {
    switch (img.dtype) {
      case Dtype::uint8: out[i] = p[i]; break;
      case Dtype::int16: {
        std::int16_t v;
        std::memcpy(&v, p + 2 * i, 2);
        out[i] = v;
        break;
      }
      case Dtype::float32: {
        float v;
        std::memcpy(&v, p + 4 * i, 4);
        out[i] = v;
        break;
      }
    }
  }
  if (img.scl_slope != 0.0f && !(img.scl_slope == 1.0f && img.scl_inter == 0.0f))
    for (auto& v : out) v = v * img.scl_slope + img.scl_inter;
  return out;
}

inline Volume to_volume(const Image& img) {
  const auto values = scaled_values(img);
  std::vector<float> data(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    data[i] = static_cast<float>(values[i]);
    if (!std::isfinite(data[i])) throw Error(Errc::non_finite, "voxel " + std::to_string(i) + " is not finite");
  }
  Volume v(img.shape, img.spacing, std::move(data));
  v.set_orientation(img.orientation);
  return v;
}

inline LabelMap to_label_map(const Image& img) {
  const auto values = scaled_values(img);
  std::vector<std::uint8_t> data(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!(v >= 0.0 && v <= 255.0) || v != std::floor(v))
      throw Error(Errc::invalid_argument, "label voxel " + std::to_string(i) + " is not an integer in 0..255");
    data[i] = static_cast<std::uint8_t>(v);
  }
  LabelMap m(img.shape, img.spacing, std::move(data));
  m.set_orientation(img.orientation);
  return m;
}

inline Image from_volume(const Volume& v, Dtype dtype = Dtype::float32) {
  Image img;
  img.shape = v.shape();
  img.spacing = v.spacing();
  img.dtype = dtype;
  img.orientation = v.orientation();
  const auto n = v.size();
  img.payload.resize(n * static_cast<std::size_t>(bytes_per_voxel(dtype)));
  auto* p = img.payload.data();
  for (std::size_t i = 0; i < n; ++i) {
    const float x = v.data()[i];
    switch (dtype) {
      case Dtype::float32: std::memcpy(p + 4 * i, &x, 4); break;
      case Dtype::int16: {
        if (x != std::floor(x) || x < -32768.0f || x > 32767.0f)
          throw Error(Errc::invalid_argument, "value not representable as int16");
        const auto s = static_cast<std::int16_t>(x);
        std::memcpy(p + 2 * i, &s, 2);
        break;
      }
      case Dtype::uint8:
        if (x != std::floor(x) || x < 0.0f || x > 255.0f)
          throw Error(Errc::invalid_argument, "value not representable as uint8");
        p[i] = static_cast<std::uint8_t>(x);
        break;
    }
  }
  return img;
}

inline Image from_label_map(const LabelMap& m) {
  Image img;
  img.shape = m.shape();
  img.spacing = m.spacing();
  img.dtype = Dtype::uint8;
  img.orientation = m.orientation();
  img.payload.assign(m.data().begin(), m.data().end());
  return img;
}

}  // namespace biatrium::nifti

namespace biatrium {

inline Volume read_volume(const std::filesystem::path& path) { return nifti::to_volume(nifti::read_image(path)); }

inline LabelMap read_label_map(const std::filesystem::path& path) {
  return nifti::to_label_map(nifti::read_image(path));
}

inline void write_volume(const Volume& v, const std::filesystem::path& path, bool compress = false,
                         nifti::Dtype dtype = nifti::Dtype::float32) {
  nifti::write_image(nifti::from_volume(v, dtype), path, compress);
}

inline void write_volume(const LabelMap& m, const std::filesystem::path& path, bool compress = false) {
  nifti::write_image(nifti::from_label_map(m), path, compress);
}

// Paths ending in ".gz" are written compressed.
inline bool wants_gzip(const std::filesystem::path& path) { return path.extension() == ".gz"; }

}  // namespace biatrium
