#pragma once

namespace nsfde {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace nsfde
