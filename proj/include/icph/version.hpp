#pragma once

namespace icph {
inline constexpr const char* kVersion = "0.1.0";
}
