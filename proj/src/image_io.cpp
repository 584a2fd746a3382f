// SPDX-License-Identifier: Apache-2.0
#include "nuigo/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace nuigo {

namespace fs = std::filesystem;

namespace {

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

// imwrite picks the codec from the extension, so the temp name keeps it.
void atomic_imwrite(const fs::path& file, const cv::Mat& mat) {
  fs::path tmp = file;
  tmp += ".tmp" + file.extension().string();
  if (!cv::imwrite(tmp.string(), mat)) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw std::runtime_error("failed to write image: " + file.string());
  }
  fs::rename(tmp, file);
}

}  // namespace

Image load_image(const fs::path& file) {
  cv::Mat raw = cv::imread(file.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw ValidationError("cannot decode image: " + file.string());

  const double scale = raw.depth() == CV_16U ? 65535.0
                       : raw.depth() == CV_8U ? 255.0
                                              : 0.0;
  if (scale == 0.0)
    throw ValidationError("unsupported sample depth in " + file.string());

  Image img(raw.rows, raw.cols);
  const int ch = raw.channels();
  if (ch != 1 && ch != 3 && ch != 4)
    throw ValidationError("unsupported channel count in " + file.string());

  for (int y = 0; y < raw.rows; ++y) {
    for (int x = 0; x < raw.cols; ++x) {
      double r, g, b;
      if (ch == 1) {
        const double v = raw.depth() == CV_16U ? raw.at<std::uint16_t>(y, x)
                                               : raw.at<std::uint8_t>(y, x);
        r = g = b = v;
      } else if (raw.depth() == CV_16U) {
        const auto* px = raw.ptr<std::uint16_t>(y) + static_cast<std::size_t>(x) * ch;
        b = px[0];
        g = px[1];
        r = px[2];
      } else {
        const auto* px = raw.ptr<std::uint8_t>(y) + static_cast<std::size_t>(x) * ch;
        b = px[0];
        g = px[1];
        r = px[2];
      }
      img.at(0, y, x) = static_cast<float>(r / scale);
      img.at(1, y, x) = static_cast<float>(g / scale);
      img.at(2, y, x) = static_cast<float>(b / scale);
    }
  }
  return img;
}

void save_image_png(const fs::path& file, const Image& img) {
  cv::Mat mat(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    auto* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(img.at(c, y, x), 0.f, 1.f);
        row[x * 3 + (2 - c)] =
            static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  atomic_imwrite(file, mat);
}

void save_plane_png16(const fs::path& file, const Plane& plane) {
  cv::Mat mat(plane.height, plane.width, CV_16UC1);
  for (int y = 0; y < plane.height; ++y) {
    auto* row = mat.ptr<std::uint16_t>(y);
    for (int x = 0; x < plane.width; ++x) {
      const float v = std::clamp(plane.at(y, x), 0.f, 1.f);
      row[x] = static_cast<std::uint16_t>(std::lround(v * 65535.0f));
    }
  }
  atomic_imwrite(file, mat);
}

Plane load_plane_png16(const fs::path& file) {
  cv::Mat raw = cv::imread(file.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw ValidationError("cannot decode image: " + file.string());
  if (raw.channels() != 1 || raw.depth() != CV_16U)
    throw ValidationError("expected 16-bit single-channel PNG: " + file.string());
  Plane plane(raw.rows, raw.cols);
  for (int y = 0; y < raw.rows; ++y)
    for (int x = 0; x < raw.cols; ++x)
      plane.at(y, x) = static_cast<float>(raw.at<std::uint16_t>(y, x) / 65535.0);
  return plane;
}

std::vector<fs::path> list_image_files(const fs::path& dir) {
  require(fs::is_directory(dir), "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = lower_ext(entry.path());
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace nuigo
