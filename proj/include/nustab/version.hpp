#pragma once

namespace nustab {

inline constexpr const char* kVersion = "0.1.0";

} // namespace nustab
