#pragma once

namespace riskmse {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace riskmse
