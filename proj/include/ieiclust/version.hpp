#pragma once

namespace ieiclust {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ieiclust
