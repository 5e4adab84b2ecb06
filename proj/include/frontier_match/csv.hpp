#pragma once

#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace frontier_match::csv {

// Split one CSV line on commas. The schemas used here never quote fields, so
// no quote handling; a trailing \r from CRLF input is stripped.
inline std::vector<std::string> split(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += fields[i];
  }
  return out;
}

// Deterministic shortest-ish float formatting for machine-readable output.
inline std::string fmt(double x, int significant = 12) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", significant, x);
  return buf;
}

inline std::string fmt_fixed(double x, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, x);
  return buf;
}

}  // namespace frontier_match::csv
