#pragma once

namespace nwsr {

inline constexpr const char* kToolName = "nwsr";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace nwsr
