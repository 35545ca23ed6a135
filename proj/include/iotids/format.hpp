#pragma once

#include <charconv>
#include <cmath>
#include <optional>
#include <string>

namespace iotids {

// Shortest round-trip decimal form; identical output on every run.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("undefined");
}

}  // namespace iotids
