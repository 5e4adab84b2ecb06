#pragma once

namespace frontier_match {

inline constexpr const char* k_version = "0.1.0";

}  // namespace frontier_match
