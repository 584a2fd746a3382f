// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

#include "nuigo/image.hpp"

namespace nuigo {

// Decodes a PNG or JPEG file. 8-bit and 16-bit rasters are normalized to
// [0,1] by the type maximum; grayscale inputs are replicated across RGB.
Image load_image(const std::filesystem::path& file);

// Writes an 8-bit RGB PNG (values clamped to [0,1], rounded to 255 steps).
// The file is written to a temporary name and renamed into place.
void save_image_png(const std::filesystem::path& file, const Image& img);

// Writes a single-channel 16-bit PNG, used for illumination masks.
void save_plane_png16(const std::filesystem::path& file, const Plane& plane);
Plane load_plane_png16(const std::filesystem::path& file);

// Sorted list of decodable image files (.png/.jpg/.jpeg, case-insensitive).
std::vector<std::filesystem::path> list_image_files(const std::filesystem::path& dir);

}  // namespace nuigo
