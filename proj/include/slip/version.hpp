#pragma once

namespace slip {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace slip
