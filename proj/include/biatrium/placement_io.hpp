#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "biatrium/error.hpp"
#include "biatrium/geometry.hpp"

namespace biatrium {

inline nlohmann::json placement_to_json(const Placement& p) {
  return {{"parent_shape", p.parent_shape}, {"offset", p.offset}, {"window_shape", p.window_shape}};
}

inline Placement placement_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::invalid_argument, "placement sidecar must be a JSON object");
  auto triple = [&](const char* key) {
    if (!j.contains(key)) throw Error(Errc::invalid_argument, std::string("placement: missing key '") + key + "'");
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 3 || !v[0].is_number_integer() || !v[1].is_number_integer() ||
        !v[2].is_number_integer())
      throw Error(Errc::invalid_argument, std::string("placement: '") + key + "' must be 3 integers");
    return Index3{v[0].get<int>(), v[1].get<int>(), v[2].get<int>()};
  };
  for (const auto& [key, _] : j.items())
    if (key != "parent_shape" && key != "offset" && key != "window_shape")
      throw Error(Errc::invalid_argument, "placement: unknown key '" + key + "'");
  Placement p{triple("parent_shape"), triple("offset"), triple("window_shape")};
  p.validate();
  return p;
}

inline void write_placement(const Placement& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot open '" + path.string() + "' for writing");
  out << placement_to_json(p).dump(2) << '\n';
  if (!out) throw Error(Errc::io, "write to '" + path.string() + "' failed");
}

inline Placement read_placement(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open '" + path.string() + "' for reading");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_argument, "placement '" + path.string() + "': " + e.what());
  }
  return placement_from_json(j);
}

}  // namespace biatrium
