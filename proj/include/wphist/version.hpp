#pragma once

namespace wphist {

inline constexpr const char* kVersion = "0.1.0";

} // namespace wphist
