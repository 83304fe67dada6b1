#pragma once

namespace phel {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kProjectName = "phel";

} // namespace phel
