#pragma once

namespace cellalign {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cellalign
