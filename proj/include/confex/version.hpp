#pragma once

namespace confex {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace confex
