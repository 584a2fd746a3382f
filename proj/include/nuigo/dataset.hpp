// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nuigo/manifest.hpp"

namespace nuigo {

struct DatasetEntry {
  ManifestEntry meta;
  std::filesystem::path clean_path;
  std::filesystem::path degraded_path;
};

struct Dataset {
  std::filesystem::path root;
  std::vector<DatasetEntry> entries;
};

// Reads a manifest and resolves image paths relative to its directory
// (root/clean/<clean_id>.png, root/degraded/<degraded_id>.png). Every
// referenced file must exist.
Dataset load_dataset(const std::filesystem::path& manifest_path);

struct DatasetSplit {
  std::vector<int> train, val;  // indices into Dataset::entries
};

// Seed-deterministic split grouped by clean id: all degraded variants of one
// clean image land on the same side, so no reference leaks into validation.
DatasetSplit split_dataset(const Dataset& ds, double train_fraction,
                           std::uint64_t seed);

}  // namespace nuigo
