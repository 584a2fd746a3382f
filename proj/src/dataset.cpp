// SPDX-License-Identifier: Apache-2.0
#include "nuigo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "nuigo/common.hpp"
#include "nuigo/rng.hpp"

namespace nuigo {

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  Dataset ds;
  ds.root = manifest_path.has_parent_path() ? manifest_path.parent_path()
                                            : std::filesystem::path(".");
  const auto manifest = load_manifest(manifest_path);
  require(!manifest.entries.empty(), "manifest is empty: " + manifest_path.string());
  ds.entries.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    DatasetEntry de;
    de.meta = e;
    de.clean_path = ds.root / "clean" / (e.clean_id + ".png");
    de.degraded_path = ds.root / "degraded" / (e.degraded_id + ".png");
    require(std::filesystem::exists(de.clean_path),
            "dataset image missing: " + de.clean_path.string());
    require(std::filesystem::exists(de.degraded_path),
            "dataset image missing: " + de.degraded_path.string());
    ds.entries.push_back(std::move(de));
  }
  return ds;
}

DatasetSplit split_dataset(const Dataset& ds, double train_fraction,
                           std::uint64_t seed) {
  require(train_fraction > 0.0 && train_fraction < 1.0,
          "train_fraction must be in (0, 1)");
  std::set<std::string> unique_ids;
  for (const auto& e : ds.entries) unique_ids.insert(e.meta.clean_id);
  require(unique_ids.size() >= 2, "need at least 2 distinct clean images to split");

  std::vector<std::string> ids(unique_ids.begin(), unique_ids.end());
  Rng rng = derive_rng(seed, {fnv1a("split")});
  rng.shuffle(ids);
  auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(ids.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, ids.size() - 1);
  const std::unordered_set<std::string> train_ids(ids.begin(), ids.begin() + n_train);

  DatasetSplit split;
  for (int i = 0; i < static_cast<int>(ds.entries.size()); ++i) {
    if (train_ids.count(ds.entries[i].meta.clean_id))
      split.train.push_back(i);
    else
      split.val.push_back(i);
  }
  return split;
}

}  // namespace nuigo
