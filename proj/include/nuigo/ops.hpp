// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <type_traits>
#include <vector>

#include "nuigo/tensor.hpp"

// Stride-1 "same" convolutions, 2x max pooling and stride-2 transposed
// convolutions in NCHW layout, implemented as im2col plus GEMM. Backward
// functions accept null gradient outputs to skip unneeded work (e.g. frozen
// weights need no weight gradient).
namespace nuigo::ops {

template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a,
          int lda, const T* b, int ldb, T beta, T* c, int ldc);

// y = w * x + b. w: [out_c, in_c, k, k] with k odd; zero padding k/2.
template <typename T>
void conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Tensor<T>& y);

// The gradient outputs sit in a non-deduced context so callers can pass a
// plain nullptr for the ones they do not need.
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy,
                     std::type_identity_t<Tensor<T>>* gx,
                     std::type_identity_t<Tensor<T>>* gw,
                     std::type_identity_t<Tensor<T>>* gb);

// 2x2 max pooling, stride 2; argmax records the winning flat index per
// output element for the backward pass. Requires even h and w.
template <typename T>
void maxpool2(const Tensor<T>& x, Tensor<T>& y, std::vector<std::int32_t>& argmax);

template <typename T>
void maxpool2_backward(const Tensor<T>& gy, const std::vector<std::int32_t>& argmax,
                       Tensor<T>& gx);

// Transposed convolution, kernel 3, stride 2, padding 1, output padding 1:
// maps (h,w) to exactly (2h,2w). w: [in_c, out_c, 3, 3].
template <typename T>
void deconv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Tensor<T>& y);

template <typename T>
void deconv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy,
                       std::type_identity_t<Tensor<T>>* gx,
                       std::type_identity_t<Tensor<T>>* gw,
                       std::type_identity_t<Tensor<T>>* gb);

template <typename T>
void relu(Tensor<T>& x);

// Masks gradients by the forward output (y > 0), in place.
template <typename T>
void relu_backward(const Tensor<T>& y, Tensor<T>& gy);

// y = [a ; b] along channels.
template <typename T>
void concat_channels(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& y);

template <typename T>
void split_channels_add(const Tensor<T>& gy, Tensor<T>& ga, Tensor<T>& gb);

// Row-wise softmax of a [rows, cols] matrix, in place, numerically stable.
template <typename T>
void softmax_rows(T* m, int rows, int cols);

}  // namespace nuigo::ops
