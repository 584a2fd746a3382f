// SPDX-License-Identifier: Apache-2.0
#include "nuigo/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "nuigo/common.hpp"

namespace nuigo {

namespace {

constexpr char kMagic[8] = {'N', 'U', 'I', 'G', 'O', 'C', 'P', '1'};

template <typename V>
void write_pod(std::ofstream& f, V v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename V>
V read_pod(std::ifstream& f) {
  V v{};
  f.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void write_string(std::ofstream& f, const std::string& s) {
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(s.size()));
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& f) {
  const auto len = read_pod<std::uint32_t>(f);
  require(f.good() && len < 256, "corrupt checkpoint string");
  std::string s(len, '\0');
  f.read(s.data(), len);
  return s;
}

void write_block(std::ofstream& f, const std::string& name, const Tensor<float>& t) {
  write_string(f, name);
  write_pod<std::int32_t>(f, t.n);
  write_pod<std::int32_t>(f, t.c);
  write_pod<std::int32_t>(f, t.h);
  write_pod<std::int32_t>(f, t.w);
  f.write(reinterpret_cast<const char*>(t.data()),
          static_cast<std::streamsize>(t.size() * 4));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params,
                     const OptimizerState* opt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    require(f.good(), "cannot write checkpoint to " + path.string());
    f.write(kMagic, 8);
    write_pod<std::uint32_t>(f, 1);  // format version
    write_pod<std::int32_t>(f, params.cfg.stages);
    write_pod<std::int32_t>(f, params.cfg.channels);
    write_pod<std::int32_t>(f, params.cfg.inner_channels);
    write_pod<std::int32_t>(f, params.cfg.in_channels);
    write_pod<std::uint8_t>(f, params.cfg.weight_sharing ? 1 : 0);

    std::uint32_t n_blocks = 0;
    auto& mut = const_cast<ModelParams<float>&>(params);
    mut.for_each([&](const std::string&, ConvParam<float>&) { n_blocks += 2; });
    write_pod<std::uint32_t>(f, n_blocks);
    mut.for_each([&](const std::string& name, ConvParam<float>& p) {
      write_block(f, name + ".w", p.w);
      write_block(f, name + ".b", p.b);
    });

    write_pod<std::uint8_t>(f, opt ? 1 : 0);
    if (opt) {
      write_pod<std::uint64_t>(f, opt->step);
      write_pod<double>(f, opt->best_val_psnr);
      write_pod<std::int32_t>(f, opt->epochs_since_best);
      write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(opt->blocks.size()));
      for (const auto& b : opt->blocks) {
        write_string(f, b.name);
        write_pod<std::uint64_t>(f, b.m.size());
        f.write(reinterpret_cast<const char*>(b.m.data()),
                static_cast<std::streamsize>(b.m.size() * 4));
        f.write(reinterpret_cast<const char*>(b.v.data()),
                static_cast<std::streamsize>(b.v.size() * 4));
      }
    }
    require(f.good(), "failed writing checkpoint to " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

ModelParams<float> load_checkpoint(const std::filesystem::path& path,
                                   OptimizerState* opt) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "cannot open checkpoint: " + path.string());
  char magic[8];
  f.read(magic, 8);
  require(f.good() && std::memcmp(magic, kMagic, 8) == 0,
          "not a checkpoint file (magic mismatch): " + path.string());
  require(read_pod<std::uint32_t>(f) == 1, "unsupported checkpoint format version");

  ModelParams<float> params;
  params.cfg.stages = read_pod<std::int32_t>(f);
  params.cfg.channels = read_pod<std::int32_t>(f);
  params.cfg.inner_channels = read_pod<std::int32_t>(f);
  params.cfg.in_channels = read_pod<std::int32_t>(f);
  params.cfg.weight_sharing = read_pod<std::uint8_t>(f) != 0;
  params.allocate();

  std::map<std::string, Tensor<float>*> by_name;
  params.for_each([&](const std::string& name, ConvParam<float>& p) {
    by_name[name + ".w"] = &p.w;
    by_name[name + ".b"] = &p.b;
  });

  const auto n_blocks = read_pod<std::uint32_t>(f);
  require(n_blocks == by_name.size(),
          "checkpoint block count does not match the declared architecture");
  for (std::uint32_t i = 0; i < n_blocks; ++i) {
    const std::string name = read_string(f);
    const int n = read_pod<std::int32_t>(f), c = read_pod<std::int32_t>(f);
    const int h = read_pod<std::int32_t>(f), w = read_pod<std::int32_t>(f);
    auto it = by_name.find(name);
    require(it != by_name.end(), "checkpoint tensor '" + name +
                                     "' does not exist in the declared architecture");
    Tensor<float>* t = it->second;
    require(t->n == n && t->c == c && t->h == h && t->w == w,
            "checkpoint tensor '" + name + "' has mismatched shape");
    f.read(reinterpret_cast<char*>(t->data()),
           static_cast<std::streamsize>(t->size() * 4));
    require(f.good(), "checkpoint truncated at tensor '" + name + "'");
    by_name.erase(it);
  }
  require(by_name.empty(), "checkpoint is missing tensor '" +
                               (by_name.empty() ? "" : by_name.begin()->first) + "'");

  const bool has_opt = read_pod<std::uint8_t>(f) != 0;
  if (opt) {
    *opt = OptimizerState{};
    if (has_opt) {
      opt->step = read_pod<std::uint64_t>(f);
      opt->best_val_psnr = read_pod<double>(f);
      opt->epochs_since_best = read_pod<std::int32_t>(f);
      const auto n = read_pod<std::uint32_t>(f);
      opt->blocks.resize(n);
      for (auto& b : opt->blocks) {
        b.name = read_string(f);
        const auto numel = read_pod<std::uint64_t>(f);
        require(numel < (1ull << 32), "corrupt optimizer block size");
        b.m.resize(numel);
        b.v.resize(numel);
        f.read(reinterpret_cast<char*>(b.m.data()),
               static_cast<std::streamsize>(numel * 4));
        f.read(reinterpret_cast<char*>(b.v.data()),
               static_cast<std::streamsize>(numel * 4));
        require(f.good(), "checkpoint truncated in optimizer state");
      }
    }
  }
  return params;
}

}  // namespace nuigo
