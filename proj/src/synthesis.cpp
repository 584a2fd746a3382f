// SPDX-License-Identifier: Apache-2.0
#include "nuigo/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "nuigo/color.hpp"
#include "nuigo/image_io.hpp"

namespace nuigo {

namespace fs = std::filesystem;

void SynthesisConfig::validate() const {
  require(!thresholds.empty(), "at least one threshold is required");
  for (double t : thresholds)
    require(t > 0.0 && t < 1.0, "thresholds must lie in (0,1)");
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    require(thresholds[i] > thresholds[i - 1], "thresholds must be strictly increasing");
  require(gamma_min > 0.0 && gamma_max <= 1.0 && gamma_min <= gamma_max,
          "gamma range must be a sub-interval of (0,1]");
  require(luminance_floor > 0.0 && luminance_floor < 1.0,
          "luminance floor must lie in (0,1)");
  require(image_size >= 8, "image size must be at least 8");
}

Plane coarse_mask(const Plane& luminance, double threshold, double gamma,
                  double luminance_floor, bool inverse_gamma) {
  require(threshold > 0.0 && threshold < 1.0, "threshold must lie in (0,1)");
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0,1]");
  const double exponent = inverse_gamma ? 1.0 / gamma : gamma;
  Plane mask(luminance.height, luminance.width);
  for (std::size_t i = 0; i < luminance.data.size(); ++i) {
    const double lum = luminance.data[i];
    if (lum > threshold) {
      mask.data[i] = 1.0f;
    } else {
      const double floored = std::max(lum, luminance_floor);
      mask.data[i] = static_cast<float>(std::pow(floored, exponent));
    }
  }
  return mask;
}

Plane smooth_mask(const Plane& mask) {
  require(mask.height >= 8 && mask.width >= 8,
          "smooth_mask needs at least 8x8 input, got " + std::to_string(mask.height) +
              "x" + std::to_string(mask.width));
  const int small_h = (mask.height + 7) / 8;
  const int small_w = (mask.width + 7) / 8;
  Plane small(small_h, small_w);
  for (int by = 0; by < small_h; ++by) {
    for (int bx = 0; bx < small_w; ++bx) {
      const int y0 = by * 8, y1 = std::min(y0 + 8, mask.height);
      const int x0 = bx * 8, x1 = std::min(x0 + 8, mask.width);
      double sum = 0.0;
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) sum += mask.at(y, x);
      small.at(by, bx) = static_cast<float>(sum / ((y1 - y0) * (x1 - x0)));
    }
  }
  return resize_bilinear(small, mask.height, mask.width);
}

Image apply_degradation(const Image& clean, const Plane& mask) {
  require(mask.height == clean.height && mask.width == clean.width,
          "mask size does not match image size");
  Image out(clean.height, clean.width);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < clean.height; ++y)
      for (int x = 0; x < clean.width; ++x)
        out.at(c, y, x) = clean.at(c, y, x) * mask.at(y, x);
  return out;
}

SynthesizedPair synthesize_pair(const Image& clean, double threshold, Rng& rng,
                                const SynthesisConfig& config) {
  validate_image(clean);
  SynthesizedPair pair;
  pair.gamma = rng.uniform(config.gamma_min, config.gamma_max);
  const Plane lum = rgb_to_luminance(clean);
  const Plane coarse = coarse_mask(lum, threshold, pair.gamma,
                                   config.luminance_floor, config.inverse_gamma);
  pair.mask = smooth_mask(coarse);
  pair.degraded = apply_degradation(clean, pair.mask);
  return pair;
}

SampleManifest synthesize_dataset(const fs::path& clean_dir, const fs::path& out_dir,
                                  const SynthesisConfig& config) {
  config.validate();
  const auto files = list_image_files(clean_dir);
  require(!files.empty(), "no image files found in " + clean_dir.string());

  fs::create_directories(out_dir / "clean");
  fs::create_directories(out_dir / "degraded");
  if (config.save_masks) fs::create_directories(out_dir / "masks");

  SampleManifest manifest;
  std::size_t skipped = 0;
  for (const auto& file : files) {
    Image raw;
    try {
      raw = load_image(file);
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping " << file.string() << ": " << e.what() << "\n";
      ++skipped;
      continue;
    }
    const std::string id = file.stem().string();
    const Image clean = resize_bilinear(raw, config.image_size, config.image_size);
    save_image_png(out_dir / "clean" / (id + ".png"), clean);

    for (std::size_t k = 0; k < config.thresholds.size(); ++k) {
      // One deterministic stream per (image, threshold index).
      const std::uint64_t stream =
          derive_seed(config.rng_seed, {fnv1a(id), static_cast<std::uint64_t>(k)});
      Rng rng(stream);
      SynthesizedPair pair = synthesize_pair(clean, config.thresholds[k], rng, config);

      ManifestEntry entry;
      entry.clean_id = id;
      entry.degraded_id = id + "_th" + std::to_string(k);
      entry.threshold = config.thresholds[k];
      entry.gamma = pair.gamma;
      entry.seed = stream;
      save_image_png(out_dir / "degraded" / (entry.degraded_id + ".png"), pair.degraded);
      if (config.save_masks)
        save_plane_png16(out_dir / "masks" / (entry.degraded_id + ".png"), pair.mask);
      manifest.entries.push_back(std::move(entry));
    }
  }
  require(!manifest.entries.empty(),
          "all " + std::to_string(skipped) + " input files were unreadable");
  save_manifest(out_dir / "manifest.csv", manifest);
  return manifest;
}

}  // namespace nuigo
