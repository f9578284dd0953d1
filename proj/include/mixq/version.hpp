#pragma once

namespace mixq {
inline constexpr const char* kVersion = "0.1.0";
}  // namespace mixq
