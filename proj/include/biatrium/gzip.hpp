#pragma once

// RFC 1952 containers via zlib. Output is deterministic (mtime = 0).

#include <zlib.h>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "biatrium/error.hpp"

namespace biatrium::gzip {

inline bool has_magic(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B;
}

inline std::vector<std::uint8_t> compress(std::span<const std::uint8_t> in, int level = 6) {
  z_stream zs{};
  // 15 window bits + 16 selects the gzip wrapper.
  if (deflateInit2(&zs, level, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw Error(Errc::gzip, "deflateInit2 failed");
  gz_header header{};
  header.os = 255;
  deflateSetHeader(&zs, &header);

  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(in.size())) + 32);
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(Errc::gzip, "deflate did not finish");
  out.resize(produced);
  return out;
}

inline std::vector<std::uint8_t> decompress(std::span<const std::uint8_t> in) {
  if (!has_magic(in)) throw Error(Errc::gzip, "missing 0x1F8B magic");
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK) throw Error(Errc::gzip, "inflateInit2 failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());

  std::vector<std::uint8_t> out;
  std::uint8_t chunk[1 << 16];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk;
    zs.avail_out = sizeof(chunk);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw Error(Errc::gzip, std::string("corrupt or truncated stream") + (zs.msg ? std::string(": ") + zs.msg : ""));
    }
    out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw Error(Errc::gzip, "truncated stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

}  // namespace biatrium::gzip
