#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace penning {

/// Shortest round-trip decimal form, independent of locale.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

}  // namespace penning
