// SPDX-License-Identifier: Apache-2.0
#include "nuigo/image.hpp"

#include <algorithm>
#include <cmath>

namespace nuigo {

void validate_image(const Image& img) {
  require(img.height >= 8 && img.width >= 8,
          "image must be at least 8x8, got " + std::to_string(img.height) + "x" +
              std::to_string(img.width));
  require(img.data.size() == static_cast<std::size_t>(3) * img.height * img.width,
          "image buffer size does not match dimensions");
  for (float v : img.data) {
    require(std::isfinite(v), "image contains a non-finite pixel value");
    require(v >= 0.f && v <= 1.f, "image pixel value outside [0,1]");
  }
}

namespace {

// Maps a destination coordinate to source space (half-pixel centers) and
// returns the two neighbour indices plus the interpolation weight.
inline void sample_axis(int out_i, int out_n, int in_n, int& i0, int& i1, double& w1) {
  double pos = (out_i + 0.5) * static_cast<double>(in_n) / out_n - 0.5;
  pos = std::clamp(pos, 0.0, static_cast<double>(in_n - 1));
  i0 = static_cast<int>(pos);
  i1 = std::min(i0 + 1, in_n - 1);
  w1 = pos - i0;
}

}  // namespace

Plane resize_bilinear(const Plane& src, int out_h, int out_w) {
  require(src.height > 0 && src.width > 0 && out_h > 0 && out_w > 0,
          "resize_bilinear: empty input or output");
  Plane out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    int y0, y1;
    double wy;
    sample_axis(y, out_h, src.height, y0, y1, wy);
    for (int x = 0; x < out_w; ++x) {
      int x0, x1;
      double wx;
      sample_axis(x, out_w, src.width, x0, x1, wx);
      const double top = (1.0 - wx) * src.at(y0, x0) + wx * src.at(y0, x1);
      const double bot = (1.0 - wx) * src.at(y1, x0) + wx * src.at(y1, x1);
      out.at(y, x) = static_cast<float>((1.0 - wy) * top + wy * bot);
    }
  }
  return out;
}

Image resize_bilinear(const Image& src, int out_h, int out_w) {
  Image out(out_h, out_w);
  for (int c = 0; c < 3; ++c) {
    Plane p(src.height, src.width);
    std::copy_n(src.data.begin() + static_cast<std::size_t>(c) * src.height * src.width,
                p.size(), p.data.begin());
    Plane r = resize_bilinear(p, out_h, out_w);
    std::copy_n(r.data.begin(), r.size(),
                out.data.begin() + static_cast<std::size_t>(c) * out_h * out_w);
  }
  return out;
}

}  // namespace nuigo
