#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace inkless {

// 8-bit samples <-> network range [-1, 1].
inline float to_unit_range(std::uint8_t v) noexcept {
  return static_cast<float>(v) / 127.5f - 1.0f;
}

inline std::uint8_t from_unit_range(float v) noexcept {
  const double x = (std::clamp(static_cast<double>(v), -1.0, 1.0) + 1.0) * 127.5;
  return static_cast<std::uint8_t>(std::min(255.0, std::floor(x + 0.5)));
}

}  // namespace inkless
