#pragma once

namespace membench {
inline constexpr const char* kVersion = "0.1.0";
}
