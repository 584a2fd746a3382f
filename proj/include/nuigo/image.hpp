// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "nuigo/common.hpp"

namespace nuigo {

// Single-channel raster, row-major.
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Plane() = default;
  Plane(int h, int w, float fill = 0.f)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  float& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return data.size(); }
};

// RGB raster, values in [0,1], stored channel-planar:
// data[(c*height + y)*width + x] with c in {0=red, 1=green, 2=blue}.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, float fill = 0.f)
      : height(h), width(w), data(static_cast<std::size_t>(3) * h * w, fill) {}

  float& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::size_t size() const { return data.size(); }
};

// Checks finiteness, the [0,1] range and the minimum 8x8 extent.
void validate_image(const Image& img);

// Bilinear resampling with half-pixel center alignment. Output values are
// convex combinations of the input, so ranges are preserved.
Plane resize_bilinear(const Plane& src, int out_h, int out_w);
Image resize_bilinear(const Image& src, int out_h, int out_w);

}  // namespace nuigo
