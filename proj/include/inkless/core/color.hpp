#pragma once

#include <algorithm>
#include <cstdint>

namespace inkless {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Hue in degrees [0, 360), saturation and value in [0, 1].
struct Hsv {
  double h = 0.0, s = 0.0, v = 0.0;
};

inline Hsv rgb_to_hsv(double r, double g, double b) noexcept {
  r /= 255.0;
  g /= 255.0;
  b /= 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  Hsv out;
  out.v = mx;
  out.s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) return out;
  double h;
  if (mx == r) {
    h = 60.0 * ((g - b) / d);
  } else if (mx == g) {
    h = 60.0 * ((b - r) / d) + 120.0;
  } else {
    h = 60.0 * ((r - g) / d) + 240.0;
  }
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  out.h = h;
  return out;
}

inline double luminance(double r, double g, double b) noexcept {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

}  // namespace inkless
