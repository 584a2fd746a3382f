// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "nuigo/extractor.hpp"
#include "nuigo/tensor.hpp"

namespace nuigo {

struct LossWeights {
  double lambda_l1 = 100.0;

  void validate() const;
};

// All reductions are unnormalized sums over the batch and every element, so
// the weighting keeps its meaning regardless of batch size.
struct LossReport {
  std::vector<double> perceptual;  // one value per stage
  double l1 = 0.0;
  double total = 0.0;
};

// Sum of absolute differences. grad, when given, must match pred's shape and
// receives the accumulated subgradient sign(pred - ref).
template <typename T>
double l1_loss(const Tensor<T>& pred, const Tensor<T>& ref, Tensor<T>* grad = nullptr);

// Sum-abs difference between extractor features of pred and ref, processed
// one sample at a time to bound activation memory. ref_feat, when provided,
// holds precomputed per-sample feature tensors for ref (ref_feat[i] is sample
// i as a batch of one); the trainer uses this to reuse reference features
// across epochs. grad accumulates d(loss)/d(pred).
template <typename T>
double perceptual_loss(const FeatureExtractor<T>& ex, const Tensor<T>& pred,
                       const Tensor<T>& ref, Tensor<T>* grad = nullptr,
                       const std::vector<Tensor<T>>* ref_feat = nullptr);

// Per-sample reference features in the form perceptual_loss consumes.
template <typename T>
std::vector<Tensor<T>> reference_features(const FeatureExtractor<T>& ex,
                                          const Tensor<T>& ref);

// The full objective: a perceptual term on every stage output plus the
// weighted L1 term on the final stage only. g_stage_out, when non-null, is
// resized to one gradient tensor per stage.
template <typename T>
LossReport total_loss(const FeatureExtractor<T>& ex,
                      const std::vector<const Tensor<T>*>& stage_out,
                      const Tensor<T>& ref, const LossWeights& weights,
                      std::vector<Tensor<T>>* g_stage_out = nullptr,
                      const std::vector<Tensor<T>>* ref_feat = nullptr);

}  // namespace nuigo
