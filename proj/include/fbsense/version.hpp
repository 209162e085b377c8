#pragma once

namespace fbsense {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fbsense
