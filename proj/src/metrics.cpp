// SPDX-License-Identifier: Apache-2.0
#include "nuigo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "nuigo/color.hpp"
#include "nuigo/common.hpp"
#include "nuigo/image_io.hpp"

namespace nuigo {

namespace {

double mse_to_psnr(double mse) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(10.0 * std::log10(1.0 / mse), kPsnrCap);
}

constexpr int kWinRadius = 5;  // 11x11 window
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1*L)^2 with L = 1
constexpr double kC2 = 0.03 * 0.03;

}  // namespace

double psnr(const Plane& a, const Plane& b) {
  require(a.height == b.height && a.width == b.width, "psnr: shape mismatch");
  require(a.size() > 0, "psnr: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    sum += d * d;
  }
  return mse_to_psnr(sum / static_cast<double>(a.size()));
}

double psnr(const Image& a, const Image& b) {
  require(a.height == b.height && a.width == b.width, "psnr: shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    sum += d * d;
  }
  return mse_to_psnr(sum / static_cast<double>(a.size()));
}

double ssim(const Plane& a, const Plane& b) {
  require(a.height == b.height && a.width == b.width, "ssim: shape mismatch");
  require(std::min(a.height, a.width) >= 2 * kWinRadius + 1,
          "ssim: image smaller than the 11x11 window");
  double k1d[2 * kWinRadius + 1];
  double ksum = 0.0;
  for (int i = -kWinRadius; i <= kWinRadius; ++i) {
    k1d[i + kWinRadius] = std::exp(-(i * i) / (2.0 * kSigma * kSigma));
    ksum += k1d[i + kWinRadius];
  }
  for (double& v : k1d) v /= ksum;

  double acc = 0.0;
  std::size_t n = 0;
  for (int y = kWinRadius; y < a.height - kWinRadius; ++y) {
    for (int x = kWinRadius; x < a.width - kWinRadius; ++x) {
      double ua = 0, ub = 0, uaa = 0, ubb = 0, uab = 0;
      for (int dy = -kWinRadius; dy <= kWinRadius; ++dy) {
        const double wy = k1d[dy + kWinRadius];
        const float* ra = &a.data[static_cast<std::size_t>(y + dy) * a.width + x];
        const float* rb = &b.data[static_cast<std::size_t>(y + dy) * b.width + x];
        for (int dx = -kWinRadius; dx <= kWinRadius; ++dx) {
          const double w = wy * k1d[dx + kWinRadius];
          const double va = ra[dx], vb = rb[dx];
          ua += w * va;
          ub += w * vb;
          uaa += w * va * va;
          ubb += w * vb * vb;
          uab += w * va * vb;
        }
      }
      const double var_a = uaa - ua * ua;
      const double var_b = ubb - ub * ub;
      const double cov = uab - ua * ub;
      const double num = (2 * ua * ub + kC1) * (2 * cov + kC2);
      const double den = (ua * ua + ub * ub + kC1) * (var_a + var_b + kC2);
      acc += num / den;
      ++n;
    }
  }
  return acc / static_cast<double>(n);
}

double ssim(const Image& a, const Image& b) {
  require(a.height == b.height && a.width == b.width, "ssim: shape mismatch");
  return ssim(rgb_to_luminance(a), rgb_to_luminance(b));
}

MetricReport evaluate_pairs(const std::filesystem::path& pred_dir,
                            const std::filesystem::path& ref_dir) {
  const auto preds = list_image_files(pred_dir);
  const auto refs = list_image_files(ref_dir);
  std::map<std::string, std::filesystem::path> ref_by_stem;
  for (const auto& p : refs) ref_by_stem.emplace(p.stem().string(), p);

  MetricReport report;
  std::map<std::string, bool> ref_used;
  for (const auto& p : preds) {
    const std::string id = p.stem().string();
    const auto it = ref_by_stem.find(id);
    if (it == ref_by_stem.end()) {
      std::cerr << "warning: no reference for '" << id << "', skipping\n";
      continue;
    }
    ref_used[id] = true;
    Image pred, ref;
    try {
      pred = load_image(p);
      ref = load_image(it->second);
    } catch (const std::exception& e) {
      throw ValidationError("failed to evaluate pair '" + id + "': " + e.what());
    }
    require(pred.height == ref.height && pred.width == ref.width,
            "failed to evaluate pair '" + id + "': size mismatch");
    report.per_image.push_back({id, psnr(pred, ref), ssim(pred, ref)});
  }
  for (const auto& r : refs)
    if (!ref_used.count(r.stem().string()))
      std::cerr << "warning: no prediction for '" << r.stem().string()
                << "', skipping\n";
  require(!report.per_image.empty(),
          "no matching prediction/reference pairs between " + pred_dir.string() +
              " and " + ref_dir.string());

  for (const auto& m : report.per_image) {
    report.mean_psnr += m.psnr_db;
    report.mean_ssim += m.ssim;
  }
  report.count = static_cast<int>(report.per_image.size());
  report.mean_psnr /= report.count;
  report.mean_ssim /= report.count;
  return report;
}

void write_metric_report(const MetricReport& report,
                         const std::filesystem::path& csv_path) {
  if (csv_path.has_parent_path())
    std::filesystem::create_directories(csv_path.parent_path());
  const auto tmp = csv_path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc);
    require(f.good(), "cannot write metric report to " + csv_path.string());
    f << "id,psnr_db,ssim\n";
    char line[160];
    for (const auto& m : report.per_image) {
      std::snprintf(line, sizeof line, "%s,%.6f,%.6f\n", m.id.c_str(), m.psnr_db,
                    m.ssim);
      f << line;
    }
    std::snprintf(line, sizeof line, "mean,%.6f,%.6f\n", report.mean_psnr,
                  report.mean_ssim);
    f << line;
    require(f.good(), "failed writing metric report to " + csv_path.string());
  }
  std::filesystem::rename(tmp, csv_path);
}

}  // namespace nuigo
