// SPDX-License-Identifier: Apache-2.0
#include "nuigo/losses.hpp"

#include <algorithm>
#include <cmath>

#include "nuigo/common.hpp"

namespace nuigo {

void LossWeights::validate() const {
  require(lambda_l1 >= 0.0 && std::isfinite(lambda_l1),
          "loss: lambda_l1 must be finite and >= 0");
}

namespace {

template <typename T>
Tensor<T> slice_sample(const Tensor<T>& t, int s) {
  Tensor<T> out(1, t.c, t.h, t.w);
  std::copy_n(t.sample(s), out.size(), out.data());
  return out;
}

template <typename T>
T sign_of(T d) {
  return d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
}

}  // namespace

template <typename T>
double l1_loss(const Tensor<T>& pred, const Tensor<T>& ref, Tensor<T>* grad) {
  require(pred.same_shape(ref), "l1_loss: shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred.v[i] - ref.v[i];
    sum += std::abs(static_cast<double>(d));
    if (grad) grad->v[i] += sign_of(d);
  }
  return sum;
}

template <typename T>
double perceptual_loss(const FeatureExtractor<T>& ex, const Tensor<T>& pred,
                       const Tensor<T>& ref, Tensor<T>* grad,
                       const std::vector<Tensor<T>>* ref_feat) {
  require(pred.same_shape(ref), "perceptual_loss: shape mismatch");
  if (ref_feat)
    require(static_cast<int>(ref_feat->size()) == pred.n,
            "perceptual_loss: cached reference feature count mismatch");
  double sum = 0.0;
  for (int s = 0; s < pred.n; ++s) {
    typename FeatureExtractor<T>::Cache cache;
    const Tensor<T> xs = slice_sample(pred, s);
    const Tensor<T> fp = ex.forward(xs, grad ? &cache : nullptr);
    const Tensor<T> fr = ref_feat ? (*ref_feat)[s] : ex.forward(slice_sample(ref, s));
    require(fp.same_shape(fr), "perceptual_loss: feature shape mismatch");
    Tensor<T> g_feat;
    if (grad) g_feat = Tensor<T>(fp.n, fp.c, fp.h, fp.w);
    for (std::size_t i = 0; i < fp.size(); ++i) {
      const T d = fp.v[i] - fr.v[i];
      sum += std::abs(static_cast<double>(d));
      if (grad) g_feat.v[i] = sign_of(d);
    }
    if (grad) {
      const Tensor<T> gx = ex.backward(cache, g_feat);
      T* dst = grad->sample(s);
      for (std::size_t i = 0; i < gx.size(); ++i) dst[i] += gx.v[i];
    }
  }
  return sum;
}

template <typename T>
std::vector<Tensor<T>> reference_features(const FeatureExtractor<T>& ex,
                                          const Tensor<T>& ref) {
  std::vector<Tensor<T>> out;
  out.reserve(ref.n);
  for (int s = 0; s < ref.n; ++s) out.push_back(ex.forward(slice_sample(ref, s)));
  return out;
}

template <typename T>
LossReport total_loss(const FeatureExtractor<T>& ex,
                      const std::vector<const Tensor<T>*>& stage_out,
                      const Tensor<T>& ref, const LossWeights& weights,
                      std::vector<Tensor<T>>* g_stage_out,
                      const std::vector<Tensor<T>>* ref_feat) {
  weights.validate();
  require(!stage_out.empty(), "total_loss: no stage outputs");
  const int n_stages = static_cast<int>(stage_out.size());
  LossReport report;
  report.perceptual.resize(n_stages, 0.0);
  if (g_stage_out) g_stage_out->assign(n_stages, Tensor<T>{});
  for (int t = 0; t < n_stages; ++t) {
    const Tensor<T>& out = *stage_out[t];
    Tensor<T>* g = nullptr;
    if (g_stage_out) {
      (*g_stage_out)[t] = Tensor<T>(out.n, out.c, out.h, out.w);
      g = &(*g_stage_out)[t];
    }
    report.perceptual[t] = perceptual_loss(ex, out, ref, g, ref_feat);
  }
  // L1 applies to the final stage only; earlier stages train through their
  // perceptual terms alone.
  const Tensor<T>& last = *stage_out.back();
  require(last.same_shape(ref), "total_loss: shape mismatch");
  Tensor<T>* g_last = g_stage_out ? &g_stage_out->back() : nullptr;
  const T lam = static_cast<T>(weights.lambda_l1);
  double l1 = 0.0;
  for (std::size_t i = 0; i < last.size(); ++i) {
    const T d = last.v[i] - ref.v[i];
    l1 += std::abs(static_cast<double>(d));
    if (g_last) g_last->v[i] += lam * sign_of(d);
  }
  report.l1 = l1;
  report.total = report.perceptual[0];
  for (int t = 1; t < n_stages; ++t) report.total += report.perceptual[t];
  report.total += weights.lambda_l1 * report.l1;
  return report;
}

#define NUIGO_INSTANTIATE_LOSSES(T)                                                   \
  template double l1_loss<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>*);         \
  template double perceptual_loss<T>(const FeatureExtractor<T>&, const Tensor<T>&,    \
                                     const Tensor<T>&, Tensor<T>*,                    \
                                     const std::vector<Tensor<T>>*);                  \
  template std::vector<Tensor<T>> reference_features<T>(const FeatureExtractor<T>&,   \
                                                        const Tensor<T>&);            \
  template LossReport total_loss<T>(const FeatureExtractor<T>&,                       \
                                    const std::vector<const Tensor<T>*>&,             \
                                    const Tensor<T>&, const LossWeights&,             \
                                    std::vector<Tensor<T>>*,                          \
                                    const std::vector<Tensor<T>>*);

NUIGO_INSTANTIATE_LOSSES(float)
NUIGO_INSTANTIATE_LOSSES(double)

}  // namespace nuigo
