#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace biatrium {

enum class Errc {
  invalid_argument,
  io,
  bad_header_size,
  bad_magic,
  unsupported_datatype,
  bad_dim_count,
  truncated_payload,
  gzip,
  shape_mismatch,
  no_foreground,
  non_finite,
  bad_config,
  backend_failure,
  backend_timeout,
  backend_output,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::io: return "i/o error";
    case Errc::bad_header_size: return "malformed header";
    case Errc::bad_magic: return "bad magic";
    case Errc::unsupported_datatype: return "unsupported datatype";
    case Errc::bad_dim_count: return "unsupported dimension count";
    case Errc::truncated_payload: return "truncated payload";
    case Errc::gzip: return "gzip error";
    case Errc::shape_mismatch: return "shape mismatch";
    case Errc::no_foreground: return "no foreground";
    case Errc::non_finite: return "non-finite value";
    case Errc::bad_config: return "invalid config";
    case Errc::backend_failure: return "backend failure";
    case Errc::backend_timeout: return "backend timeout";
    case Errc::backend_output: return "backend output";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace biatrium
