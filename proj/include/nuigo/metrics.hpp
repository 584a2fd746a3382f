// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nuigo/image.hpp"

namespace nuigo {

// Peak signal-to-noise ratio in decibels for signals in [0,1]; identical
// inputs (and anything above the cap) report kPsnrCap so results stay finite.
inline constexpr double kPsnrCap = 100.0;

double psnr(const Plane& a, const Plane& b);
double psnr(const Image& a, const Image& b);

// Mean local structural similarity: 11x11 Gaussian window (sigma 1.5),
// stability constants K1=0.01 / K2=0.03, dynamic range 1. Only windows fully
// inside the image contribute, so boundary handling cannot skew the score.
// Color images are compared on their lightness channel.
double ssim(const Plane& a, const Plane& b);
double ssim(const Image& a, const Image& b);

struct PairMetrics {
  std::string id;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  std::vector<PairMetrics> per_image;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  int count = 0;
};

// Scores every prediction against the reference with the same file stem.
// Unmatched files on either side are warned about and skipped; an empty
// intersection or an unreadable/mismatched pair is an error.
MetricReport evaluate_pairs(const std::filesystem::path& pred_dir,
                            const std::filesystem::path& ref_dir);

// CSV rows `id,psnr_db,ssim` followed by a `mean,...` summary line.
void write_metric_report(const MetricReport& report,
                         const std::filesystem::path& csv_path);

}  // namespace nuigo
