#pragma once

namespace qdt {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace qdt
