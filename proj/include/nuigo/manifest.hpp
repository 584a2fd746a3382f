// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace nuigo {

// One synthesized pair. Ids resolve to files relative to the manifest
// directory: clean/<clean_id>.png and degraded/<degraded_id>.png.
struct ManifestEntry {
  std::string clean_id;
  std::string degraded_id;
  double threshold = 0.0;
  double gamma = 0.0;
  std::uint64_t seed = 0;
};

struct SampleManifest {
  std::vector<ManifestEntry> entries;
};

// CSV with header clean_id,degraded_id,threshold,gamma,seed. Written via a
// temporary file and an atomic rename.
void save_manifest(const std::filesystem::path& file, const SampleManifest& manifest);
SampleManifest load_manifest(const std::filesystem::path& file);

}  // namespace nuigo
