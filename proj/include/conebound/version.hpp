#pragma once

namespace conebound {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace conebound
