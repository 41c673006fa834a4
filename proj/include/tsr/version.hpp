#pragma once

namespace tsr {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tsr
