#pragma once

namespace flarecast {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace flarecast
