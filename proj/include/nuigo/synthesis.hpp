// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "nuigo/image.hpp"
#include "nuigo/manifest.hpp"
#include "nuigo/rng.hpp"

namespace nuigo {

// Settings for paired-sample generation. One degraded image is produced per
// (clean image, threshold) combination.
struct SynthesisConfig {
  std::vector<double> thresholds{0.1, 0.2, 0.3, 0.4, 0.5};
  double gamma_min = 0.1;
  double gamma_max = 0.5;
  double luminance_floor = 1e-3;  // applied before exponentiation
  // When set, dark pixels use exponent 1/gamma instead of gamma.
  bool inverse_gamma = false;
  std::uint64_t rng_seed = 0;
  int image_size = 256;  // clean images are resized to this before degradation
  bool save_masks = false;

  void validate() const;
};

// Pointwise mask rule: luminance above the threshold keeps full illumination
// (mask 1); darker pixels are pushed down by a power law on the floored
// luminance. Result values lie in (0,1].
Plane coarse_mask(const Plane& luminance, double threshold, double gamma,
                  double luminance_floor = 1e-3, bool inverse_gamma = false);

// 8x8 block average followed by bilinear upsampling back to the original
// size. Both steps are convex combinations, so the (0,1] range is kept.
// Requires height and width >= 8; edge blocks average over their real extent.
Plane smooth_mask(const Plane& mask);

// Pixelwise product; the same mask multiplies every channel.
Image apply_degradation(const Image& clean, const Plane& mask);

struct SynthesizedPair {
  Image degraded;
  Plane mask;
  double gamma = 0.0;
};

// Full pipeline for one (image, threshold) combination. Gamma is drawn
// uniformly from [gamma_min, gamma_max]; deterministic given the rng state.
SynthesizedPair synthesize_pair(const Image& clean, double threshold, Rng& rng,
                                const SynthesisConfig& config);

// Generates the paired dataset under out_dir:
//   clean/<id>.png        resized clean reference
//   degraded/<id>_th<k>.png  one per threshold index k
//   masks/<id>_th<k>.png  16-bit masks (only with save_masks)
//   manifest.csv
// Unreadable inputs are skipped with a warning; an input directory without
// any decodable image is an error.
SampleManifest synthesize_dataset(const std::filesystem::path& clean_dir,
                                  const std::filesystem::path& out_dir,
                                  const SynthesisConfig& config);

}  // namespace nuigo
