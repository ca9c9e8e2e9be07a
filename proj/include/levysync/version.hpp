#pragma once

namespace levysync {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace levysync
