// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nuigo/network.hpp"

namespace nuigo {

// Adam moment estimates for one parameter tensor ("stage0.enc1.w", ...).
struct MomentBlock {
  std::string name;
  std::vector<float> m, v;
};

struct OptimizerState {
  std::vector<MomentBlock> blocks;  // in ModelParams::for_each order, w then b
  std::uint64_t step = 0;
  double best_val_psnr = -1.0;  // -1 = no validation pass recorded yet
  std::int32_t epochs_since_best = 0;
};

// Single-file format: versioned header (magic, format version, architecture),
// named parameter blocks with explicit shapes, then an optional optimizer
// section. Writes go to a temp file renamed into place, so a crash never
// leaves a truncated checkpoint behind.
void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params,
                     const OptimizerState* opt = nullptr);

// Loading validates every block name and shape against the architecture
// declared in the header and reports the first mismatch by tensor name.
// opt, when non-null, receives the optimizer section (empty if absent).
ModelParams<float> load_checkpoint(const std::filesystem::path& path,
                                   OptimizerState* opt = nullptr);

}  // namespace nuigo
