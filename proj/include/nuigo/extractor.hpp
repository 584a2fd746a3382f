// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nuigo/tensor.hpp"

namespace nuigo {

// Frozen convolutional feature extractor backing the perceptual loss.
//
// The default is a 19-layer classification network (16 convolutions with 2x
// max pooling between blocks) whose weights come from a binary file; features
// are taken after the rectifier of a chosen convolution (default conv5_4, the
// deepest). An identity variant (features = raw pixels) exists strictly for
// unit tests where exact hand computation is needed.
template <typename T>
class FeatureExtractor {
 public:
  // Everything the backward-to-input pass needs from a forward pass.
  struct Cache {
    std::vector<Tensor<T>> in;                    // input to each convolution
    std::vector<Tensor<T>> act;                   // post-rectifier outputs
    std::vector<std::vector<std::int32_t>> pool;  // argmax per pooling step
  };

  static FeatureExtractor identity();
  // Loads a weight file, keeping layers up to and including `layer`. Throws
  // ValidationError with instructions when the file is missing or malformed.
  static FeatureExtractor load(const std::filesystem::path& weight_file,
                               const std::string& layer = "conv5_4");

  Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const;
  // Maps d(loss)/d(features) back to d(loss)/d(input). Weights are frozen, so
  // no parameter gradients exist.
  Tensor<T> backward(const Cache& cache, const Tensor<T>& g_feat) const;

  bool is_identity() const { return identity_; }
  // Spatial downsampling factor between input and features (1, 2, 4, 8 or 16).
  int scale() const;

 private:
  struct Layer {
    std::string name;
    int in_c = 0, out_c = 0;
    bool pool_before = false;  // 2x max pooling applied before this conv
    Tensor<T> w, b;            // [out_c, in_c, 3, 3], [out_c]
  };

  bool identity_ = true;
  std::vector<Layer> layers_;
  std::array<T, 3> mean_{}, std_{};
};

// Writes a weight file with the full 16-convolution architecture and
// variance-preserving random kernels. Lets the pipeline run end to end when
// pretrained weights cannot be obtained; features are then a fixed random
// projection rather than semantic, which the caller must opt into knowingly.
void write_random_extractor_weights(const std::filesystem::path& path,
                                    std::uint64_t seed);

}  // namespace nuigo
