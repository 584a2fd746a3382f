// SPDX-License-Identifier: Apache-2.0
#include "nuigo/network.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "nuigo/common.hpp"
#include "nuigo/ops.hpp"

namespace nuigo {

void ModelConfig::validate() const {
  require(stages >= 1, "model: stages must be >= 1");
  require(channels >= 1, "model: channels must be >= 1");
  require(inner_channels >= 1, "model: inner_channels must be >= 1");
  require(in_channels >= 1, "model: in_channels must be >= 1");
}

namespace {

template <typename T>
void alloc_conv(ConvParam<T>& p, int out_c, int in_c, int k) {
  p.w = Tensor<T>(out_c, in_c, k, k);
  p.b = Tensor<T>(out_c, 1, 1, 1);
  p.gw = Tensor<T>(out_c, in_c, k, k);
  p.gb = Tensor<T>(out_c, 1, 1, 1);
}

template <typename T>
void check_finite(const Tensor<T>& t, int stage_index, const char* what) {
  for (const T v : t.v) {
    if (!std::isfinite(static_cast<double>(v)))
      throw std::runtime_error("non-finite activation in stage " +
                               std::to_string(stage_index + 1) + " (" + what + ")");
  }
}

}  // namespace

template <typename T>
void ModelParams<T>::allocate() {
  cfg.validate();
  const int C = cfg.channels, Ci = cfg.inner_channels, IC = cfg.in_channels;
  stages.assign(cfg.weight_sharing ? 1 : cfg.stages, StageParams<T>{});
  for (auto& sp : stages) {
    alloc_conv(sp.enc1, C, IC, 3);
    alloc_conv(sp.enc2, C, C, 3);
    alloc_conv(sp.enc3, C, C, 3);
    alloc_conv(sp.attn_q, Ci, C, 1);
    alloc_conv(sp.attn_k, Ci, C, 1);
    alloc_conv(sp.attn_v, Ci, C, 1);
    alloc_conv(sp.attn_out, C, Ci, 1);
    alloc_conv(sp.dec4, C, C, 3);
    alloc_conv(sp.dec5, C, 2 * C, 3);
    alloc_conv(sp.dec6, C, 2 * C, 3);
    // transposed convolutions store [in_c, out_c, 3, 3]
    alloc_conv(sp.up1, C, C, 3);
    alloc_conv(sp.up2, C, C, 3);
    alloc_conv(sp.up3, C, C, 3);
    alloc_conv(sp.head, IC, 2 * C, 1);
  }
}

template <typename T>
void ModelParams<T>::zero_grad() {
  for_each([](const std::string&, ConvParam<T>& p) {
    p.gw.zero();
    p.gb.zero();
  });
}

template <typename T>
std::size_t ModelParams<T>::param_count() const {
  std::size_t n = 0;
  const_cast<ModelParams<T>*>(this)->for_each(
      [&](const std::string&, ConvParam<T>& p) { n += p.w.size() + p.b.size(); });
  return n;
}

template <typename T>
void init_params(ModelParams<T>& params, Rng& rng, T init_std) {
  params.allocate();
  params.for_each([&](const std::string& name, ConvParam<T>& p) {
    const bool zero_w = name.size() >= 8 && name.compare(name.size() - 8, 8, "attn_out") == 0;
    for (auto& v : p.w.v) v = zero_w ? T(0) : static_cast<T>(rng.gaussian()) * init_std;
    p.b.zero();
  });
}

template <typename T>
void non_local_forward(const StageParams<T>& sp, const Tensor<T>& x,
                       AttentionCache<T>& ac, Tensor<T>& z) {
  ops::conv2d(x, sp.attn_q.w, sp.attn_q.b, ac.q);
  ops::conv2d(x, sp.attn_k.w, sp.attn_k.b, ac.k);
  ops::conv2d(x, sp.attn_v.w, sp.attn_v.b, ac.v);
  const int np = x.h * x.w;
  const int ci = ac.q.c;
  ac.attn.assign(static_cast<std::size_t>(x.n) * np * np, T(0));
  ac.y = Tensor<T>(x.n, ci, x.h, x.w);
  for (int s = 0; s < x.n; ++s) {
    T* a = ac.attn.data() + static_cast<std::size_t>(s) * np * np;
    // a[i,j] = q(:,i) . k(:,j)
    ops::gemm<T>(true, false, np, np, ci, T(1), ac.q.sample(s), np, ac.k.sample(s),
                 np, T(0), a, np);
    ops::softmax_rows(a, np, np);
    // y(:,i) = sum_j a[i,j] v(:,j)
    ops::gemm<T>(false, true, ci, np, np, T(1), ac.v.sample(s), np, a, np, T(0),
                 ac.y.sample(s), np);
  }
  ops::conv2d(ac.y, sp.attn_out.w, sp.attn_out.b, z);
  for (std::size_t i = 0; i < z.size(); ++i) z.v[i] += x.v[i];
}

template <typename T>
void non_local_backward(StageParams<T>& sp, const Tensor<T>& x,
                        const AttentionCache<T>& ac, const Tensor<T>& g_z,
                        Tensor<T>& gx) {
  // residual path
  for (std::size_t i = 0; i < gx.size(); ++i) gx.v[i] += g_z.v[i];
  Tensor<T> g_y(ac.y.n, ac.y.c, ac.y.h, ac.y.w);
  ops::conv2d_backward(ac.y, sp.attn_out.w, g_z, &g_y, &sp.attn_out.gw,
                       &sp.attn_out.gb);

  const int np = x.h * x.w;
  const int ci = ac.q.c;
  Tensor<T> g_q(ac.q.n, ci, ac.q.h, ac.q.w);
  Tensor<T> g_k = g_q, g_v = g_q;
  std::vector<T> ds(static_cast<std::size_t>(np) * np);
  for (int s = 0; s < x.n; ++s) {
    const T* a = ac.attn.data() + static_cast<std::size_t>(s) * np * np;
    // y = v A^T: dv = g_y A, dA = g_y^T v
    ops::gemm<T>(false, false, ci, np, np, T(1), g_y.sample(s), np, a, np, T(0),
                 g_v.sample(s), np);
    ops::gemm<T>(true, false, np, np, ci, T(1), g_y.sample(s), np, ac.v.sample(s),
                 np, T(0), ds.data(), np);
    // softmax rows: dS_i = A_i * (dA_i - <dA_i, A_i>)
    for (int r = 0; r < np; ++r) {
      T* drow = ds.data() + static_cast<std::size_t>(r) * np;
      const T* arow = a + static_cast<std::size_t>(r) * np;
      T dot = T(0);
      for (int j = 0; j < np; ++j) dot += drow[j] * arow[j];
      for (int j = 0; j < np; ++j) drow[j] = arow[j] * (drow[j] - dot);
    }
    // S = q^T k: dq = k dS^T, dk = q dS
    ops::gemm<T>(false, true, ci, np, np, T(1), ac.k.sample(s), np, ds.data(), np,
                 T(0), g_q.sample(s), np);
    ops::gemm<T>(false, false, ci, np, np, T(1), ac.q.sample(s), np, ds.data(), np,
                 T(0), g_k.sample(s), np);
  }
  ops::conv2d_backward(x, sp.attn_q.w, g_q, &gx, &sp.attn_q.gw, &sp.attn_q.gb);
  ops::conv2d_backward(x, sp.attn_k.w, g_k, &gx, &sp.attn_k.gw, &sp.attn_k.gb);
  ops::conv2d_backward(x, sp.attn_v.w, g_v, &gx, &sp.attn_v.gw, &sp.attn_v.gb);
}

template <typename T>
void forward_stage(const StageParams<T>& sp, const Tensor<T>& x, StageCache<T>& cache,
                   int stage_index) {
  require(x.h % 8 == 0 && x.w % 8 == 0, "stage input dims must be multiples of 8");
  cache.x = x;

  ops::conv2d(x, sp.enc1.w, sp.enc1.b, cache.a1);
  ops::relu(cache.a1);
  ops::maxpool2(cache.a1, cache.p1, cache.am1);
  ops::conv2d(cache.p1, sp.enc2.w, sp.enc2.b, cache.a2);
  ops::relu(cache.a2);
  ops::maxpool2(cache.a2, cache.p2, cache.am2);
  ops::conv2d(cache.p2, sp.enc3.w, sp.enc3.b, cache.a3);
  ops::relu(cache.a3);
  ops::maxpool2(cache.a3, cache.p3, cache.am3);

  non_local_forward(sp, cache.p3, cache.attn, cache.z);
  check_finite(cache.z, stage_index, "attention output");

  ops::conv2d(cache.z, sp.dec4.w, sp.dec4.b, cache.d4);
  ops::relu(cache.d4);
  ops::deconv2d(cache.d4, sp.up1.w, sp.up1.b, cache.u1);
  ops::concat_channels(cache.u1, cache.a3, cache.cat1);
  ops::conv2d(cache.cat1, sp.dec5.w, sp.dec5.b, cache.d5);
  ops::relu(cache.d5);
  ops::deconv2d(cache.d5, sp.up2.w, sp.up2.b, cache.u2);
  ops::concat_channels(cache.u2, cache.a2, cache.cat2);
  ops::conv2d(cache.cat2, sp.dec6.w, sp.dec6.b, cache.d6);
  ops::relu(cache.d6);
  ops::deconv2d(cache.d6, sp.up3.w, sp.up3.b, cache.u3);
  ops::concat_channels(cache.u3, cache.a1, cache.cat3);
  ops::conv2d(cache.cat3, sp.head.w, sp.head.b, cache.out);
  for (std::size_t i = 0; i < cache.out.size(); ++i) cache.out.v[i] += x.v[i];
  check_finite(cache.out, stage_index, "stage output");
}

template <typename T>
void backward_stage(StageParams<T>& sp, const StageCache<T>& cache,
                    const Tensor<T>& g_out, Tensor<T>& gx) {
  // residual: out = x + head(cat3)
  for (std::size_t i = 0; i < gx.size(); ++i) gx.v[i] += g_out.v[i];
  Tensor<T> g_cat3(cache.cat3.n, cache.cat3.c, cache.cat3.h, cache.cat3.w);
  ops::conv2d_backward(cache.cat3, sp.head.w, g_out, &g_cat3, &sp.head.gw, &sp.head.gb);

  Tensor<T> g_u3(cache.u3.n, cache.u3.c, cache.u3.h, cache.u3.w);
  Tensor<T> g_a1(cache.a1.n, cache.a1.c, cache.a1.h, cache.a1.w);
  ops::split_channels_add(g_cat3, g_u3, g_a1);
  Tensor<T> g_d6(cache.d6.n, cache.d6.c, cache.d6.h, cache.d6.w);
  ops::deconv2d_backward(cache.d6, sp.up3.w, g_u3, &g_d6, &sp.up3.gw, &sp.up3.gb);
  ops::relu_backward(cache.d6, g_d6);
  Tensor<T> g_cat2(cache.cat2.n, cache.cat2.c, cache.cat2.h, cache.cat2.w);
  ops::conv2d_backward(cache.cat2, sp.dec6.w, g_d6, &g_cat2, &sp.dec6.gw, &sp.dec6.gb);

  Tensor<T> g_u2(cache.u2.n, cache.u2.c, cache.u2.h, cache.u2.w);
  Tensor<T> g_a2(cache.a2.n, cache.a2.c, cache.a2.h, cache.a2.w);
  ops::split_channels_add(g_cat2, g_u2, g_a2);
  Tensor<T> g_d5(cache.d5.n, cache.d5.c, cache.d5.h, cache.d5.w);
  ops::deconv2d_backward(cache.d5, sp.up2.w, g_u2, &g_d5, &sp.up2.gw, &sp.up2.gb);
  ops::relu_backward(cache.d5, g_d5);
  Tensor<T> g_cat1(cache.cat1.n, cache.cat1.c, cache.cat1.h, cache.cat1.w);
  ops::conv2d_backward(cache.cat1, sp.dec5.w, g_d5, &g_cat1, &sp.dec5.gw, &sp.dec5.gb);

  Tensor<T> g_u1(cache.u1.n, cache.u1.c, cache.u1.h, cache.u1.w);
  Tensor<T> g_a3(cache.a3.n, cache.a3.c, cache.a3.h, cache.a3.w);
  ops::split_channels_add(g_cat1, g_u1, g_a3);
  Tensor<T> g_d4(cache.d4.n, cache.d4.c, cache.d4.h, cache.d4.w);
  ops::deconv2d_backward(cache.d4, sp.up1.w, g_u1, &g_d4, &sp.up1.gw, &sp.up1.gb);
  ops::relu_backward(cache.d4, g_d4);
  Tensor<T> g_z(cache.z.n, cache.z.c, cache.z.h, cache.z.w);
  ops::conv2d_backward(cache.z, sp.dec4.w, g_d4, &g_z, &sp.dec4.gw, &sp.dec4.gb);

  Tensor<T> g_p3(cache.p3.n, cache.p3.c, cache.p3.h, cache.p3.w);
  non_local_backward(sp, cache.p3, cache.attn, g_z, g_p3);

  ops::maxpool2_backward(g_p3, cache.am3, g_a3);
  ops::relu_backward(cache.a3, g_a3);
  Tensor<T> g_p2(cache.p2.n, cache.p2.c, cache.p2.h, cache.p2.w);
  ops::conv2d_backward(cache.p2, sp.enc3.w, g_a3, &g_p2, &sp.enc3.gw, &sp.enc3.gb);
  ops::maxpool2_backward(g_p2, cache.am2, g_a2);
  ops::relu_backward(cache.a2, g_a2);
  Tensor<T> g_p1(cache.p1.n, cache.p1.c, cache.p1.h, cache.p1.w);
  ops::conv2d_backward(cache.p1, sp.enc2.w, g_a2, &g_p1, &sp.enc2.gw, &sp.enc2.gb);
  ops::maxpool2_backward(g_p1, cache.am1, g_a1);
  ops::relu_backward(cache.a1, g_a1);
  ops::conv2d_backward(cache.x, sp.enc1.w, g_a1, &gx, &sp.enc1.gw, &sp.enc1.gb);
}

template <typename T>
void forward(const ModelParams<T>& params, const Tensor<T>& x,
             std::vector<StageCache<T>>& caches) {
  caches.assign(params.cfg.stages, StageCache<T>{});
  const Tensor<T>* input = &x;
  for (int t = 0; t < params.cfg.stages; ++t) {
    forward_stage(params.stage(t), *input, caches[t], t);
    input = &caches[t].out;
  }
}

template <typename T>
Tensor<T> backward(ModelParams<T>& params, const std::vector<StageCache<T>>& caches,
                   const std::vector<Tensor<T>>& g_stage_out) {
  require(g_stage_out.size() == caches.size(), "per-stage gradient count mismatch");
  Tensor<T> carry;
  for (int t = static_cast<int>(caches.size()) - 1; t >= 0; --t) {
    Tensor<T> g = g_stage_out[t];
    if (g.size() == 0) {
      g = Tensor<T>(caches[t].out.n, caches[t].out.c, caches[t].out.h, caches[t].out.w);
    }
    if (carry.size() != 0)
      for (std::size_t i = 0; i < g.size(); ++i) g.v[i] += carry.v[i];
    Tensor<T> gx(caches[t].x.n, caches[t].x.c, caches[t].x.h, caches[t].x.w);
    backward_stage(params.stage(t), caches[t], g, gx);
    carry = std::move(gx);
  }
  return carry;
}

std::vector<Image> enhance_stages(const ModelParams<float>& params, const Image& input) {
  validate_image(input);
  require(params.cfg.in_channels == 3, "model expects 3-channel input");
  const int h = input.height, w = input.width;
  const int ph = (8 - h % 8) % 8, pw = (8 - w % 8) % 8;
  Tensor<float> x(1, 3, h + ph, w + pw);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h + ph; ++y) {
      const int sy = y < h ? y : 2 * h - 2 - y;  // reflect bottom edge
      for (int xx = 0; xx < w + pw; ++xx) {
        const int sx = xx < w ? xx : 2 * w - 2 - xx;
        x.at(0, c, y, xx) = input.at(c, sy, sx);
      }
    }
  std::vector<StageCache<float>> caches;
  forward(params, x, caches);
  std::vector<Image> results;
  results.reserve(caches.size());
  for (const auto& cache : caches) {
    Image result(h, w);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          const float v = cache.out.at(0, c, y, xx);
          result.at(c, y, xx) = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
        }
    results.push_back(std::move(result));
  }
  return results;
}

Image enhance(const ModelParams<float>& params, const Image& input) {
  return enhance_stages(params, input).back();
}

#define NUIGO_INSTANTIATE_NET(T)                                                      \
  template struct ModelParams<T>;                                                     \
  template void init_params<T>(ModelParams<T>&, Rng&, T);                             \
  template void non_local_forward<T>(const StageParams<T>&, const Tensor<T>&,         \
                                     AttentionCache<T>&, Tensor<T>&);                 \
  template void non_local_backward<T>(StageParams<T>&, const Tensor<T>&,              \
                                      const AttentionCache<T>&, const Tensor<T>&,     \
                                      Tensor<T>&);                                    \
  template void forward_stage<T>(const StageParams<T>&, const Tensor<T>&,             \
                                 StageCache<T>&, int);                                \
  template void backward_stage<T>(StageParams<T>&, const StageCache<T>&,              \
                                  const Tensor<T>&, Tensor<T>&);                      \
  template void forward<T>(const ModelParams<T>&, const Tensor<T>&,                   \
                           std::vector<StageCache<T>>&);                              \
  template Tensor<T> backward<T>(ModelParams<T>&, const std::vector<StageCache<T>>&,  \
                                 const std::vector<Tensor<T>>&);

NUIGO_INSTANTIATE_NET(float)
NUIGO_INSTANTIATE_NET(double)

}  // namespace nuigo
