// SPDX-License-Identifier: Apache-2.0
//
// Recursive encoder/decoder enhancement network.
//
// Each stage shares one topology: a three-level convolutional encoder with 2x
// max pooling between levels, a global self-attention unit at the coarsest
// scale, and a transposed-convolution decoder with skip concatenations back to
// the encoder activations. The stage output is its input plus a learned
// residual, and stages chain so later passes refine earlier ones. Weights are
// shared across stages by default, making the refinement recursive.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nuigo/image.hpp"
#include "nuigo/rng.hpp"
#include "nuigo/tensor.hpp"

namespace nuigo {

template <typename T>
struct ConvParam {
  Tensor<T> w, b;    // weights and bias
  Tensor<T> gw, gb;  // gradient accumulators, same shapes
};

// One encoder/attention/decoder block. Convolution weight layout is
// [out_c, in_c, k, k]; the upsampling (transposed) convolutions use
// [in_c, out_c, 3, 3] to match their scatter formulation.
template <typename T>
struct StageParams {
  ConvParam<T> enc1, enc2, enc3;              // 3x3 encoder convolutions
  ConvParam<T> attn_q, attn_k, attn_v;        // 1x1 embeddings for attention
  ConvParam<T> attn_out;                      // 1x1 projection back to C
  ConvParam<T> dec4, dec5, dec6;              // 3x3 decoder convolutions
  ConvParam<T> up1, up2, up3;                 // stride-2 transposed convolutions
  ConvParam<T> head;                          // 1x1 residual projection

  template <typename F>
  void for_each(F&& f) {
    f("enc1", enc1); f("enc2", enc2); f("enc3", enc3);
    f("attn_q", attn_q); f("attn_k", attn_k); f("attn_v", attn_v);
    f("attn_out", attn_out);
    f("dec4", dec4); f("dec5", dec5); f("dec6", dec6);
    f("up1", up1); f("up2", up2); f("up3", up3);
    f("head", head);
  }
};

struct ModelConfig {
  int stages = 3;
  int channels = 64;        // feature maps throughout encoder/decoder
  int inner_channels = 32;  // attention embedding width
  int in_channels = 3;
  bool weight_sharing = true;

  void validate() const;
};

template <typename T>
struct ModelParams {
  ModelConfig cfg;
  std::vector<StageParams<T>> stages;  // size 1 when weights are shared

  void allocate();  // sizes all tensors per cfg (values uninitialized)
  StageParams<T>& stage(int t) { return stages[cfg.weight_sharing ? 0 : t]; }
  const StageParams<T>& stage(int t) const {
    return stages[cfg.weight_sharing ? 0 : t];
  }

  // Visits every distinct parameter tensor pair (w,b) with a stable name like
  // "stage0.enc1". Shared weights are visited once.
  template <typename F>
  void for_each(F&& f) {
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const std::string prefix = "stage" + std::to_string(i) + ".";
      stages[i].for_each([&](const char* nm, ConvParam<T>& p) { f(prefix + nm, p); });
    }
  }

  void zero_grad();
  std::size_t param_count() const;
};

// Gaussian(0, init_std) weights; biases and the attention output projection
// start at zero, so each attention unit begins as the identity mapping.
template <typename T>
void init_params(ModelParams<T>& params, Rng& rng, T init_std = T(0.02));

// Intermediate state of one attention unit, kept for its backward pass.
template <typename T>
struct AttentionCache {
  Tensor<T> q, k, v;  // 1x1-conv embeddings of the input
  std::vector<T> attn;  // [n, Np, Np] row-stochastic weights, Np = h*w
  Tensor<T> y;        // attention-weighted value aggregate
};

// Global self-attention over all spatial positions with a residual output:
// z = project(attend(x)) + x, shapes preserved. Each attention row is a
// softmax over dot products of learned per-position embeddings.
template <typename T>
void non_local_forward(const StageParams<T>& sp, const Tensor<T>& x,
                       AttentionCache<T>& ac, Tensor<T>& z);

// Accumulates parameter gradients into sp's attention kernels and the input
// gradient (residual path included) into gx.
template <typename T>
void non_local_backward(StageParams<T>& sp, const Tensor<T>& x,
                        const AttentionCache<T>& ac, const Tensor<T>& g_z,
                        Tensor<T>& gx);

// Activations kept from the forward pass of one stage, consumed by backward.
template <typename T>
struct StageCache {
  Tensor<T> x;                       // stage input
  Tensor<T> a1, a2, a3;              // encoder activations (post-ReLU)
  Tensor<T> p1, p2, p3;              // pooled maps; p3 feeds the attention unit
  std::vector<std::int32_t> am1, am2, am3;
  AttentionCache<T> attn;
  Tensor<T> z;                       // attention output + residual
  Tensor<T> d4, d5, d6;              // decoder activations (post-ReLU)
  Tensor<T> u1, u2, u3;              // upsampled maps
  Tensor<T> cat1, cat2, cat3;        // skip concatenations
  Tensor<T> out;                     // x + residual
};

// Runs one stage. Throws on non-finite activations, naming the stage.
template <typename T>
void forward_stage(const StageParams<T>& sp, const Tensor<T>& x, StageCache<T>& cache,
                   int stage_index);

// Accumulates parameter gradients into sp's gw/gb and the input gradient into
// gx (caller-zeroed). g_out is the gradient w.r.t. the stage output.
template <typename T>
void backward_stage(StageParams<T>& sp, const StageCache<T>& cache,
                    const Tensor<T>& g_out, Tensor<T>& gx);

// Full forward pass; caches.size() == cfg.stages afterwards and
// caches[t].out is the stage-t output (caches.back().out is the result).
template <typename T>
void forward(const ModelParams<T>& params, const Tensor<T>& x,
             std::vector<StageCache<T>>& caches);

// g_stage_out[t] is the loss gradient w.r.t. the stage-t output (tensors may
// be empty when a stage receives no direct loss term). Parameter gradients
// accumulate into params; the return value is the gradient w.r.t. the input.
template <typename T>
Tensor<T> backward(ModelParams<T>& params, const std::vector<StageCache<T>>& caches,
                   const std::vector<Tensor<T>>& g_stage_out);

// Inference on one image: reflect-pads to a multiple of 8, runs all stages,
// crops back and clamps to [0, 1]. enhance_stages returns every intermediate
// result (the last element is the final output); enhance just the last.
std::vector<Image> enhance_stages(const ModelParams<float>& params, const Image& input);
Image enhance(const ModelParams<float>& params, const Image& input);

}  // namespace nuigo
