// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <string>
#include <vector>

#include <doctest.h>

#include "nuigo/common.hpp"
#include "nuigo/network.hpp"
#include "nuigo/rng.hpp"
#include "support/helpers.hpp"

using nuigo::AttentionCache;
using nuigo::ModelConfig;
using nuigo::ModelParams;
using nuigo::Rng;
using nuigo::StageCache;
using nuigo::Tensor;
using testsupport::random_tensor;

namespace {

template <typename T>
ModelParams<T> make_model(int stages, int channels, int inner, bool shared,
                          std::uint64_t seed, T init_std = T(0.02)) {
  ModelParams<T> p;
  p.cfg.stages = stages;
  p.cfg.channels = channels;
  p.cfg.inner_channels = inner;
  p.cfg.weight_sharing = shared;
  Rng rng(seed);
  nuigo::init_params(p, rng, init_std);
  return p;
}

template <typename T>
void zero_head(ModelParams<T>& p) {
  for (auto& sp : p.stages) {
    sp.head.w.zero();
    sp.head.b.zero();
  }
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("parameter count matches the architecture arithmetic") {
  // Hand-computed totals for the default topology.
  auto tied = make_model<float>(3, 64, 32, true, 1);
  CHECK(tied.param_count() == 379683);
  auto untied = make_model<float>(3, 64, 32, false, 1);
  CHECK(untied.param_count() == 3 * 379683);
  CHECK(tied.stages.size() == 1);
  CHECK(untied.stages.size() == 3);
}

TEST_CASE("initialization is seed-deterministic") {
  auto a = make_model<float>(2, 8, 4, true, 42);
  auto b = make_model<float>(2, 8, 4, true, 42);
  auto c = make_model<float>(2, 8, 4, true, 43);
  bool all_equal = true, any_diff_seed = false;
  a.for_each([&](const std::string& name, nuigo::ConvParam<float>& pa) {
    b.for_each([&](const std::string& nb, nuigo::ConvParam<float>& pb) {
      if (nb == name && pa.w.v != pb.w.v) all_equal = false;
    });
    c.for_each([&](const std::string& nc, nuigo::ConvParam<float>& pc) {
      if (nc == name && name.find("attn_out") == std::string::npos &&
          pa.w.v != pc.w.v)
        any_diff_seed = true;
    });
  });
  CHECK(all_equal);
  CHECK(any_diff_seed);
}

TEST_CASE("init zeroes biases and the attention projection") {
  auto p = make_model<float>(1, 8, 4, true, 7);
  p.for_each([&](const std::string& name, nuigo::ConvParam<float>& cp) {
    for (float v : cp.b.v) CHECK(v == 0.f);
    if (name.find("attn_out") != std::string::npos)
      for (float v : cp.w.v) CHECK(v == 0.f);
  });
}

TEST_CASE("init weight spread tracks init_std") {
  auto p = make_model<double>(1, 16, 8, true, 11, 0.02);
  double sq = 0.0, sum = 0.0;
  std::size_t n = 0;
  p.for_each([&](const std::string& name, nuigo::ConvParam<double>& cp) {
    if (name.find("attn_out") != std::string::npos) return;
    for (double v : cp.w.v) {
      sum += v;
      sq += v * v;
      ++n;
    }
  });
  const double mean = sum / n;
  const double std = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean) < 0.002);
  CHECK(std == doctest::Approx(0.02).epsilon(0.05));
}

TEST_CASE("forward produces the documented shapes") {
  auto p = make_model<float>(3, 8, 4, true, 3);
  Rng rng(5);
  const auto x = random_tensor<float>(2, 3, 16, 24, rng, 0.0, 1.0);
  std::vector<StageCache<float>> caches;
  nuigo::forward(p, x, caches);
  REQUIRE(caches.size() == 3);
  for (const auto& cache : caches) {
    CHECK(cache.a1.c == 8);
    CHECK(cache.a1.h == 16);
    CHECK(cache.a1.w == 24);
    CHECK(cache.p1.h == 8);
    CHECK(cache.p2.h == 4);
    CHECK(cache.p3.h == 2);
    CHECK(cache.p3.w == 3);
    CHECK(cache.attn.q.c == 4);
    CHECK(cache.attn.attn.size() == 2u * 6 * 6);
    CHECK(cache.z.c == 8);
    CHECK(cache.out.c == 3);
    CHECK(cache.out.h == 16);
    CHECK(cache.out.w == 24);
  }
  // stages chain: stage t+1 consumes stage t's output
  CHECK(caches[1].x.v == caches[0].out.v);
  CHECK(caches[2].x.v == caches[1].out.v);
}

TEST_CASE("forward rejects sizes that do not divide by 8") {
  auto p = make_model<float>(1, 4, 2, true, 9);
  Rng rng(2);
  const auto x = random_tensor<float>(1, 3, 12, 16, rng);
  std::vector<StageCache<float>> caches;
  CHECK_THROWS_AS(nuigo::forward(p, x, caches), nuigo::ValidationError);
}

TEST_CASE("zeroed residual head makes every stage the identity") {
  auto p = make_model<float>(3, 8, 4, true, 21);
  zero_head(p);
  Rng rng(22);
  const auto x = random_tensor<float>(2, 3, 16, 16, rng, 0.0, 1.0);
  std::vector<StageCache<float>> caches;
  nuigo::forward(p, x, caches);
  for (const auto& cache : caches) CHECK(cache.out.v == x.v);  // bitwise
}

TEST_CASE("attention unit matches the brute-force oracle") {
  Rng rng(31);
  for (const auto [c, ci, h, w] : {std::tuple{8, 4, 4, 4}, {6, 3, 3, 5}}) {
    ModelParams<double> p;
    p.cfg.stages = 1;
    p.cfg.channels = c;
    p.cfg.inner_channels = ci;
    p.allocate();
    auto& sp = p.stages[0];
    for (auto* cp : {&sp.attn_q, &sp.attn_k, &sp.attn_v, &sp.attn_out}) {
      for (auto& v : cp->w.v) v = rng.uniform(-0.5, 0.5);
      for (auto& v : cp->b.v) v = rng.uniform(-0.2, 0.2);
    }
    const auto x = random_tensor<double>(2, c, h, w, rng);
    AttentionCache<double> ac;
    Tensor<double> z;
    nuigo::non_local_forward(sp, x, ac, z);

    const auto want = testsupport::naive_attention(
        x, sp.attn_q.w, sp.attn_q.b, sp.attn_k.w, sp.attn_k.b, sp.attn_v.w,
        sp.attn_v.b, sp.attn_out.w, sp.attn_out.b);
    REQUIRE(z.size() == want.size());
    for (std::size_t i = 0; i < z.size(); ++i)
      CHECK(z.v[i] == doctest::Approx(want.v[i]).epsilon(1e-10));

    // attention rows are probability distributions
    const int np = h * w;
    for (int s = 0; s < 2; ++s)
      for (int r = 0; r < np; ++r) {
        double sum = 0.0;
        for (int j = 0; j < np; ++j)
          sum += ac.attn[(static_cast<std::size_t>(s) * np + r) * np + j];
        CHECK(std::abs(sum - 1.0) < 1e-6);
      }
  }
}

TEST_CASE("attention commutes with spatial permutations") {
  // No positional information: permuting positions permutes the output.
  Rng rng(41);
  const int c = 6, ci = 3, h = 2, w = 4, np = h * w;
  ModelParams<double> p;
  p.cfg.channels = c;
  p.cfg.inner_channels = ci;
  p.allocate();
  auto& sp = p.stages[0];
  for (auto* cp : {&sp.attn_q, &sp.attn_k, &sp.attn_v, &sp.attn_out}) {
    for (auto& v : cp->w.v) v = rng.uniform(-0.6, 0.6);
    for (auto& v : cp->b.v) v = rng.uniform(-0.2, 0.2);
  }
  const auto x = random_tensor<double>(1, c, h, w, rng);
  std::vector<int> perm(np);
  for (int i = 0; i < np; ++i) perm[i] = i;
  Rng shuf(5);
  shuf.shuffle(perm);

  Tensor<double> xp(1, c, h, w);
  for (int cc = 0; cc < c; ++cc)
    for (int i = 0; i < np; ++i)
      xp.v[static_cast<std::size_t>(cc) * np + i] =
          x.v[static_cast<std::size_t>(cc) * np + perm[i]];

  AttentionCache<double> ac1, ac2;
  Tensor<double> z, zp;
  nuigo::non_local_forward(sp, x, ac1, z);
  nuigo::non_local_forward(sp, xp, ac2, zp);
  for (int cc = 0; cc < c; ++cc)
    for (int i = 0; i < np; ++i)
      CHECK(zp.v[static_cast<std::size_t>(cc) * np + i] ==
            doctest::Approx(z.v[static_cast<std::size_t>(cc) * np + perm[i]])
                .epsilon(1e-10));
}

TEST_CASE("constant input gives uniform attention rows") {
  Rng rng(51);
  const int c = 4, ci = 2, h = 4, w = 2, np = h * w;
  ModelParams<double> p;
  p.cfg.channels = c;
  p.cfg.inner_channels = ci;
  p.allocate();
  auto& sp = p.stages[0];
  for (auto* cp : {&sp.attn_q, &sp.attn_k, &sp.attn_v, &sp.attn_out}) {
    for (auto& v : cp->w.v) v = rng.uniform(-1, 1);
    for (auto& v : cp->b.v) v = rng.uniform(-1, 1);
  }
  Tensor<double> x(1, c, h, w);
  for (int cc = 0; cc < c; ++cc)
    for (int i = 0; i < np; ++i)
      x.v[static_cast<std::size_t>(cc) * np + i] = 0.3 * (cc + 1);
  AttentionCache<double> ac;
  Tensor<double> z;
  nuigo::non_local_forward(sp, x, ac, z);
  for (const double a : ac.attn) CHECK(a == doctest::Approx(1.0 / np).epsilon(1e-12));
  // output is constant across positions too
  for (int cc = 0; cc < c; ++cc)
    for (int i = 1; i < np; ++i)
      CHECK(z.v[static_cast<std::size_t>(cc) * np + i] ==
            doctest::Approx(z.v[static_cast<std::size_t>(cc) * np]).epsilon(1e-12));
}

TEST_CASE("non-finite activations abort with the stage named") {
  auto p = make_model<float>(2, 4, 2, true, 61);
  for (auto& v : p.stages[0].enc1.w.v) v = 1e25f;  // overflow downstream
  Rng rng(3);
  const auto x = random_tensor<float>(1, 3, 8, 8, rng, 0.5, 1.0);
  std::vector<StageCache<float>> caches;
  try {
    nuigo::forward(p, x, caches);
    FAIL("expected a non-finite activation error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
    CHECK(std::string(e.what()).find("stage 1") != std::string::npos);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  // Loss = sum of fixed random weights times the stage outputs, probing the
  // whole backward pass including skip connections and tied weights. A
  // 16x16 input keeps the attention map at 2x2, so the softmax path carries
  // real gradient (the projection is randomized for the same reason).
  auto p = make_model<double>(2, 4, 2, true, 71, 0.05);
  Rng rng(72);
  for (auto& v : p.stages[0].attn_out.w.v) v = rng.uniform(-0.3, 0.3);
  const auto x = random_tensor<double>(1, 3, 16, 16, rng, 0.1, 0.9);
  const auto r1 = random_tensor<double>(1, 3, 16, 16, rng);
  const auto r2 = random_tensor<double>(1, 3, 16, 16, rng);

  // Returns the loss plus a fingerprint of the rectifier/pooling decisions.
  // Probes where the perturbation flips a decision are discarded: there the
  // difference quotient straddles two linear pieces and estimates nothing.
  auto eval = [&](const ModelParams<double>& m, const Tensor<double>& in) {
    std::vector<StageCache<double>> caches;
    nuigo::forward(m, in, caches);
    double loss = 0.0;
    for (std::size_t i = 0; i < r1.size(); ++i) {
      loss += r1.v[i] * caches[0].out.v[i];
      loss += r2.v[i] * caches[1].out.v[i];
    }
    return std::pair{loss, testsupport::activation_pattern(caches)};
  };

  std::vector<StageCache<double>> caches;
  nuigo::forward(p, x, caches);
  const std::uint64_t base_pattern = testsupport::activation_pattern(caches);
  p.zero_grad();
  const Tensor<double> gin = nuigo::backward(p, caches, {r1, r2});

  // Gradients below the denominator floor are compared absolutely; at that
  // size the difference quotient is dominated by truncation error anyway.
  const double h = 1e-5;
  const double floor = 1e-3;
  int checked = 0, skipped = 0;
  Rng pick(73);
  p.for_each([&](const std::string&, nuigo::ConvParam<double>& cp) {
    for (auto [tensor, grad] : {std::pair{&cp.w, &cp.gw}, {&cp.b, &cp.gb}}) {
      if (tensor->size() == 0) return;
      for (int trial = 0; trial < 3; ++trial) {
        const std::size_t i = pick.index(tensor->size());
        const double keep = tensor->v[i];
        tensor->v[i] = keep + h;
        const auto [up, pat_up] = eval(p, x);
        tensor->v[i] = keep - h;
        const auto [dn, pat_dn] = eval(p, x);
        tensor->v[i] = keep;
        if (pat_up != base_pattern || pat_dn != base_pattern) {
          ++skipped;
          continue;
        }
        const double fd = (up - dn) / (2 * h);
        const double an = grad->v[i];
        const double denom = std::max({std::abs(fd), std::abs(an), floor});
        CHECK(std::abs(fd - an) / denom < 1e-4);
        ++checked;
      }
    }
  });
  CHECK(checked >= 50);
  CHECK(skipped < checked);  // kink hits must stay the exception

  // input gradient as well
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t i = pick.index(x.size());
    Tensor<double> xb = x;
    xb.v[i] += h;
    const auto [up, pat_up] = eval(p, xb);
    xb.v[i] -= 2 * h;
    const auto [dn, pat_dn] = eval(p, xb);
    if (pat_up != base_pattern || pat_dn != base_pattern) continue;
    const double fd = (up - dn) / (2 * h);
    const double denom = std::max({std::abs(fd), std::abs(gin.v[i]), floor});
    CHECK(std::abs(fd - gin.v[i]) / denom < 1e-4);
  }
}

TEST_CASE("untied stages hold and train independent weights") {
  auto p = make_model<double>(2, 4, 2, false, 81, 0.05);
  REQUIRE(p.stages.size() == 2);
  std::vector<std::string> names;
  p.for_each([&](const std::string& n, nuigo::ConvParam<double>&) {
    names.push_back(n);
  });
  CHECK(names.size() == 28);
  CHECK(std::find(names.begin(), names.end(), "stage0.enc1") != names.end());
  CHECK(std::find(names.begin(), names.end(), "stage1.head") != names.end());

  Rng rng(82);
  const auto x = random_tensor<double>(1, 3, 8, 8, rng, 0.1, 0.9);
  std::vector<StageCache<double>> caches;
  nuigo::forward(p, x, caches);
  p.zero_grad();
  const auto r = random_tensor<double>(1, 3, 8, 8, rng);
  nuigo::backward(p, caches, {Tensor<double>{}, r});
  // a loss on the last stage still reaches the first stage's weights
  double g0 = 0.0, g1 = 0.0;
  for (double v : p.stages[0].enc1.gw.v) g0 += std::abs(v);
  for (double v : p.stages[1].enc1.gw.v) g1 += std::abs(v);
  CHECK(g0 > 0.0);
  CHECK(g1 > 0.0);
}

TEST_CASE("enhance keeps arbitrary sizes and zero-head passes pixels through") {
  auto p = make_model<float>(3, 4, 2, true, 91);
  zero_head(p);
  const nuigo::Image img = testsupport::make_fundus_image(50, 5);  // 50 % 8 != 0
  const nuigo::Image out = nuigo::enhance(p, img);
  REQUIRE(out.height == 50);
  REQUIRE(out.width == 50);
  CHECK(out.data == img.data);  // bitwise, clamp is a no-op inside [0,1]

  const auto stages = nuigo::enhance_stages(p, img);
  CHECK(stages.size() == 3);
  for (const auto& s : stages) CHECK(s.data == img.data);
}

TEST_CASE("enhance output always lands in [0,1]") {
  auto p = make_model<float>(2, 4, 2, true, 101);  // random head too
  const nuigo::Image img = testsupport::make_fundus_image(32, 6);
  const nuigo::Image out = nuigo::enhance(p, img);
  for (float v : out.data) {
    CHECK(v >= 0.f);
    CHECK(v <= 1.f);
  }
}

}  // TEST_SUITE
