#pragma once

namespace petmood {

inline constexpr const char* kVersion = "0.3.0";

}  // namespace petmood
