// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "nuigo/common.hpp"
#include "nuigo/image.hpp"

namespace nuigo {

// Dense NCHW activation/parameter block. Convolution weights use
// n=out_channels, c=in_channels, h=w=kernel; transposed-convolution weights
// use n=in_channels, c=out_channels. Biases are stored as (n,1,1,1).
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0)) {}

  std::size_t size() const { return v.size(); }
  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  T& at(int in_, int ic, int iy, int ix) {
    return v[((static_cast<std::size_t>(in_) * c + ic) * h + iy) * w + ix];
  }
  T at(int in_, int ic, int iy, int ix) const {
    return v[((static_cast<std::size_t>(in_) * c + ic) * h + iy) * w + ix];
  }

  // Pointer to one sample's [c,h,w] block.
  T* sample(int in_) { return v.data() + static_cast<std::size_t>(in_) * c * h * w; }
  const T* sample(int in_) const {
    return v.data() + static_cast<std::size_t>(in_) * c * h * w;
  }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  void zero() { std::fill(v.begin(), v.end(), T(0)); }
};

template <typename T>
Tensor<T> tensor_from_image(const Image& img) {
  Tensor<T> t(1, 3, img.height, img.width);
  for (std::size_t i = 0; i < img.data.size(); ++i) t.v[i] = static_cast<T>(img.data[i]);
  return t;
}

// Extracts one sample back into an Image; values are not clamped here.
template <typename T>
Image image_from_tensor(const Tensor<T>& t, int sample = 0) {
  require(t.c == 3, "tensor is not a 3-channel image batch");
  Image img(t.h, t.w);
  const T* src = t.sample(sample);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    img.data[i] = static_cast<float>(src[i]);
  return img;
}

}  // namespace nuigo
