// SPDX-License-Identifier: Apache-2.0
#include "nuigo/extractor.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "nuigo/common.hpp"
#include "nuigo/ops.hpp"
#include "nuigo/rng.hpp"

namespace nuigo {

namespace {

constexpr char kMagic[8] = {'N', 'U', 'I', 'G', 'O', 'V', 'G', '1'};

struct LayerSpec {
  const char* name;
  int out_c;
  bool pool_before;
};

// The 16-convolution stack; in_c of each layer is the previous out_c.
constexpr LayerSpec kLayers[] = {
    {"conv1_1", 64, false},  {"conv1_2", 64, false},  {"conv2_1", 128, true},
    {"conv2_2", 128, false}, {"conv3_1", 256, true},  {"conv3_2", 256, false},
    {"conv3_3", 256, false}, {"conv3_4", 256, false}, {"conv4_1", 512, true},
    {"conv4_2", 512, false}, {"conv4_3", 512, false}, {"conv4_4", 512, false},
    {"conv5_1", 512, true},  {"conv5_2", 512, false}, {"conv5_3", 512, false},
    {"conv5_4", 512, false},
};
constexpr int kLayerCount = 16;

// Channel statistics of the dataset the pretrained classifier expects.
constexpr float kMean[3] = {0.485f, 0.456f, 0.406f};
constexpr float kStd[3] = {0.229f, 0.224f, 0.225f};

void write_u32(std::ofstream& f, std::uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::ifstream& f) {
  std::uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

int layer_index(const std::string& name) {
  for (int i = 0; i < kLayerCount; ++i)
    if (name == kLayers[i].name) return i;
  return -1;
}

}  // namespace

template <typename T>
FeatureExtractor<T> FeatureExtractor<T>::identity() {
  FeatureExtractor<T> ex;
  ex.identity_ = true;
  return ex;
}

template <typename T>
FeatureExtractor<T> FeatureExtractor<T>::load(const std::filesystem::path& weight_file,
                                              const std::string& layer) {
  const int last = layer_index(layer);
  require(last >= 0, "unknown extractor layer '" + layer + "' (expected conv1_1 .. conv5_4)");
  std::ifstream f(weight_file, std::ios::binary);
  require(f.good(), "extractor weight file not found: " + weight_file.string() +
                        "\nConvert pretrained weights with tools/export_vgg19_weights.py "
                        "and pass the result via --extractor-weights.");
  char magic[8];
  f.read(magic, 8);
  require(f.good() && std::memcmp(magic, kMagic, 8) == 0,
          "bad extractor weight file (magic mismatch): " + weight_file.string());
  const std::uint32_t version = read_u32(f);
  require(version == 1, "unsupported extractor weight file version");
  const std::uint32_t n_convs = read_u32(f);
  require(n_convs == kLayerCount, "extractor weight file must contain all 16 convolutions");

  FeatureExtractor<T> ex;
  ex.identity_ = false;
  float stats[6];
  f.read(reinterpret_cast<char*>(stats), sizeof stats);
  for (int c = 0; c < 3; ++c) {
    ex.mean_[c] = static_cast<T>(stats[c]);
    ex.std_[c] = static_cast<T>(stats[3 + c]);
    require(std::isfinite(stats[3 + c]) && stats[3 + c] > 0,
            "extractor weight file has invalid normalization stats");
  }

  int prev_c = 3;
  for (int i = 0; i < kLayerCount; ++i) {
    const std::uint32_t name_len = read_u32(f);
    require(f.good() && name_len < 64, "corrupt extractor weight file");
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    require(name == kLayers[i].name,
            "extractor weight file layer order mismatch: expected " +
                std::string(kLayers[i].name) + ", found " + name);
    const int out_c = static_cast<int>(read_u32(f));
    const int in_c = static_cast<int>(read_u32(f));
    const int kh = static_cast<int>(read_u32(f));
    const int kw = static_cast<int>(read_u32(f));
    require(out_c == kLayers[i].out_c && in_c == prev_c && kh == 3 && kw == 3,
            "extractor weight shape mismatch at " + name);
    std::vector<float> wbuf(static_cast<std::size_t>(out_c) * in_c * 9);
    std::vector<float> bbuf(out_c);
    f.read(reinterpret_cast<char*>(wbuf.data()),
           static_cast<std::streamsize>(wbuf.size() * 4));
    f.read(reinterpret_cast<char*>(bbuf.data()),
           static_cast<std::streamsize>(bbuf.size() * 4));
    require(f.good(), "extractor weight file truncated at " + name);
    if (i <= last) {
      Layer l;
      l.name = name;
      l.in_c = in_c;
      l.out_c = out_c;
      l.pool_before = kLayers[i].pool_before;
      l.w = Tensor<T>(out_c, in_c, 3, 3);
      l.b = Tensor<T>(out_c, 1, 1, 1);
      for (std::size_t j = 0; j < wbuf.size(); ++j) l.w.v[j] = static_cast<T>(wbuf[j]);
      for (int j = 0; j < out_c; ++j) l.b.v[j] = static_cast<T>(bbuf[j]);
      ex.layers_.push_back(std::move(l));
    }
    prev_c = out_c;
  }
  return ex;
}

template <typename T>
int FeatureExtractor<T>::scale() const {
  if (identity_) return 1;
  int s = 1;
  for (const auto& l : layers_)
    if (l.pool_before) s *= 2;
  return s;
}

template <typename T>
Tensor<T> FeatureExtractor<T>::forward(const Tensor<T>& x, Cache* cache) const {
  if (identity_) return x;
  require(x.c == 3, "extractor expects 3-channel input");
  if (cache) {
    cache->in.clear();
    cache->act.clear();
    cache->pool.clear();
  }
  Tensor<T> cur = x;
  for (int s = 0; s < cur.n; ++s)
    for (int c = 0; c < 3; ++c) {
      T* p = cur.sample(s) + static_cast<std::size_t>(c) * cur.h * cur.w;
      for (int i = 0; i < cur.h * cur.w; ++i) p[i] = (p[i] - mean_[c]) / std_[c];
    }
  for (const auto& l : layers_) {
    if (l.pool_before) {
      Tensor<T> pooled;
      std::vector<std::int32_t> arg;
      ops::maxpool2(cur, pooled, arg);
      if (cache) cache->pool.push_back(std::move(arg));
      cur = std::move(pooled);
    }
    Tensor<T> out;
    ops::conv2d(cur, l.w, l.b, out);
    ops::relu(out);
    if (cache) {
      cache->in.push_back(std::move(cur));
      cache->act.push_back(out);
    }
    cur = std::move(out);
  }
  return cur;
}

template <typename T>
Tensor<T> FeatureExtractor<T>::backward(const Cache& cache, const Tensor<T>& g_feat) const {
  if (identity_) return g_feat;
  require(cache.act.size() == layers_.size(), "extractor cache does not match layer count");
  Tensor<T> g = g_feat;
  int pool_idx = static_cast<int>(cache.pool.size());
  for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
    const Layer& l = layers_[i];
    ops::relu_backward(cache.act[i], g);
    const Tensor<T>& in = cache.in[i];
    Tensor<T> g_in(in.n, in.c, in.h, in.w);
    ops::conv2d_backward(in, l.w, g, &g_in, nullptr, nullptr);
    if (l.pool_before) {
      --pool_idx;
      const Tensor<T>& prev =
          i > 0 ? cache.act[i - 1] : in;  // pooling never precedes conv1_1
      Tensor<T> g_prev(prev.n, prev.c, prev.h, prev.w);
      ops::maxpool2_backward(g_in, cache.pool[pool_idx], g_prev);
      g = std::move(g_prev);
    } else {
      g = std::move(g_in);
    }
  }
  for (int c = 0; c < 3; ++c)
    for (int s = 0; s < g.n; ++s) {
      T* p = g.sample(s) + static_cast<std::size_t>(c) * g.h * g.w;
      for (int i = 0; i < g.h * g.w; ++i) p[i] /= std_[c];
    }
  return g;
}

void write_random_extractor_weights(const std::filesystem::path& path,
                                    std::uint64_t seed) {
  Rng rng(seed);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), "cannot write extractor weights to " + path.string());
  f.write(kMagic, 8);
  write_u32(f, 1);
  write_u32(f, kLayerCount);
  f.write(reinterpret_cast<const char*>(kMean), sizeof kMean);
  f.write(reinterpret_cast<const char*>(kStd), sizeof kStd);
  int prev_c = 3;
  for (const auto& spec : kLayers) {
    const std::string name = spec.name;
    write_u32(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(f, static_cast<std::uint32_t>(spec.out_c));
    write_u32(f, static_cast<std::uint32_t>(prev_c));
    write_u32(f, 3);
    write_u32(f, 3);
    const double he = std::sqrt(2.0 / (static_cast<double>(prev_c) * 9.0));
    std::vector<float> w(static_cast<std::size_t>(spec.out_c) * prev_c * 9);
    for (auto& v : w) v = static_cast<float>(rng.gaussian() * he);
    std::vector<float> b(spec.out_c, 0.f);
    f.write(reinterpret_cast<const char*>(w.data()),
            static_cast<std::streamsize>(w.size() * 4));
    f.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size() * 4));
    prev_c = spec.out_c;
  }
  require(f.good(), "failed writing extractor weights to " + path.string());
}

template class FeatureExtractor<float>;
template class FeatureExtractor<double>;

}  // namespace nuigo
