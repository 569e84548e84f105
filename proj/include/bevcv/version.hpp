#pragma once

namespace bevcv {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace bevcv
