#pragma once

namespace hmgan {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace hmgan
