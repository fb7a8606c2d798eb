#pragma once

namespace morss {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace morss
