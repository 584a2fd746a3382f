// SPDX-License-Identifier: Apache-2.0
#include "nuigo/color.hpp"

#include <cmath>

namespace nuigo {

namespace {

inline double srgb_to_linear(double c) {
  return c > 0.04045 ? std::pow((c + 0.055) / 1.055, 2.4) : c / 12.92;
}

// CIE f(t) with the classic 0.008856 cutoff; white point Yn = 1.
inline double lab_f(double t) {
  return t > 0.008856 ? std::cbrt(t) : 7.787 * t + 16.0 / 116.0;
}

}  // namespace

double srgb_lightness(double r, double g, double b) {
  const double y = 0.212671 * srgb_to_linear(r) + 0.715160 * srgb_to_linear(g) +
                   0.072169 * srgb_to_linear(b);
  const double lstar = 116.0 * lab_f(y) - 16.0;
  return lstar / 100.0;
}

Plane rgb_to_luminance(const Image& img) {
  validate_image(img);
  Plane out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      out.at(y, x) = static_cast<float>(
          srgb_lightness(img.at(0, y, x), img.at(1, y, x), img.at(2, y, x)));
    }
  }
  return out;
}

}  // namespace nuigo
