// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "nuigo/image.hpp"
#include "nuigo/network.hpp"
#include "nuigo/rng.hpp"
#include "nuigo/tensor.hpp"

namespace testsupport {

// Unique scratch directory, removed with its contents on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Deterministic synthetic fundus-style photograph: dark circular field of
// view, warm smooth background, one bright disc, dark vessel strokes.
nuigo::Image make_fundus_image(int size, std::uint64_t seed);

template <typename T>
nuigo::Tensor<T> random_tensor(int n, int c, int h, int w, nuigo::Rng& rng,
                               double lo = -1.0, double hi = 1.0) {
  nuigo::Tensor<T> t(n, c, h, w);
  for (auto& v : t.v) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Reference implementations, written as plainly as possible and sharing no
// code with src/ops.cpp.
template <typename T>
nuigo::Tensor<T> naive_conv2d(const nuigo::Tensor<T>& x, const nuigo::Tensor<T>& w,
                              const nuigo::Tensor<T>& b);
template <typename T>
nuigo::Tensor<T> naive_deconv2d(const nuigo::Tensor<T>& x, const nuigo::Tensor<T>& w,
                                const nuigo::Tensor<T>& b);
template <typename T>
nuigo::Tensor<T> naive_maxpool2(const nuigo::Tensor<T>& x);

// Brute-force self-attention over all positions: for every output position i,
// a softmax over similarity(i, j) weights the value embeddings, then the
// result is projected and added to the input. O(Np^2) two-loop form.
template <typename T>
nuigo::Tensor<T> naive_attention(const nuigo::Tensor<T>& x, const nuigo::Tensor<T>& qw,
                                 const nuigo::Tensor<T>& qb, const nuigo::Tensor<T>& kw,
                                 const nuigo::Tensor<T>& kb, const nuigo::Tensor<T>& vw,
                                 const nuigo::Tensor<T>& vb, const nuigo::Tensor<T>& ow,
                                 const nuigo::Tensor<T>& ob);

// Fingerprint of every data-dependent branch a forward pass took: rectifier
// sign patterns and pooling argmax picks. A finite-difference probe is only a
// valid gradient estimate when both evaluations stay on the same linear
// piece, i.e. when this fingerprint is unchanged.
template <typename T>
std::uint64_t activation_pattern(const std::vector<nuigo::StageCache<T>>& caches) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ull;
  };
  for (const auto& c : caches) {
    for (const nuigo::Tensor<T>* t : {&c.a1, &c.a2, &c.a3, &c.d4, &c.d5, &c.d6}) {
      std::uint64_t acc = 0;
      int bits = 0;
      for (const T v : t->v) {
        acc = (acc << 1) | (v > T(0) ? 1u : 0u);
        if (++bits == 64) {
          mix(acc);
          acc = 0;
          bits = 0;
        }
      }
      mix(acc ^ static_cast<std::uint64_t>(bits));
    }
    for (const std::vector<std::int32_t>* am : {&c.am1, &c.am2, &c.am3})
      for (const std::int32_t v : *am) mix(static_cast<std::uint64_t>(v));
  }
  return h;
}

}  // namespace testsupport
