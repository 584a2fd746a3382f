// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "nuigo/dataset.hpp"
#include "nuigo/network.hpp"

namespace nuigo {

struct TrainConfig {
  int batch_size = 8;
  double learning_rate = 1e-4;  // fixed; no schedule
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  double init_std = 0.02;
  int epochs = 200;
  std::uint64_t max_steps = 0;  // 0 = bounded by epochs only
  int image_size = 256;         // training resolution (inputs resized if needed)
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
  std::uint64_t checkpoint_every = 500;  // steps; the rolling checkpoint cadence
  int patience = 20;     // epochs without validation PSNR gain; 0 disables
  int val_eval_cap = 0;  // evaluate at most this many validation pairs (0 = all)
  double lambda_l1 = 100.0;
  std::string extractor = "vgg19";  // "vgg19" | "identity" (tests only)
  std::string extractor_layer = "conv5_4";
  std::filesystem::path extractor_weights;
  bool cache_reference_features = true;
  ModelConfig model;

  void validate() const;
};

struct TrainResult {
  std::uint64_t steps = 0;
  int epochs_completed = 0;
  double best_val_psnr = -1.0;
  bool early_stopped = false;
  std::filesystem::path last_checkpoint;
  std::filesystem::path best_checkpoint;
};

// Optimizes the model on the dataset's training split, logging one CSV row
// per step to out_dir/train_log.csv and keeping rolling (last.ckpt) and best
// validation (best.ckpt) checkpoints in out_dir.
//
// If out_dir/last.ckpt exists the run resumes from it: the shuffle for each
// epoch depends only on (seed, epoch), so a resumed run replays exactly the
// batches an uninterrupted run would have seen.
TrainResult train(const TrainConfig& cfg, const Dataset& ds,
                  const std::filesystem::path& out_dir);

}  // namespace nuigo
